//! Coarse second-order finite-difference Boussinesq solver used as an
//! independent reference for the spectral solver.
//!
//! Uniform grid, vorticity–streamfunction form, Thom wall vorticity, Heun
//! time stepping, and a direct DFT + tridiagonal Poisson solve. Shares no
//! code with the library beyond the physical parameters.

use std::f64::consts::PI;

pub struct FdOracle {
    pub nx: usize,
    pub ny: usize,
    nu: f64,
    kappa: f64,
    pub t_bottom: f64,
    pub t_top: f64,
    dx: f64,
    dy: f64,
    pub omega: Vec<f64>,
    pub psi: Vec<f64>,
    pub temp: Vec<f64>,
    pub time: f64,
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

impl FdOracle {
    /// Same free-fall scaling as the library (`Ra` on the full height).
    pub fn new(ra: f64, pr: f64, nx: usize, ny: usize) -> Self {
        let nu = (8.0 * pr / ra).sqrt();
        let kappa = (8.0 / (ra * pr)).sqrt();
        let dy = 2.0 / (ny - 1) as f64;
        let (t_bottom, t_top) = (2.0, 1.0);
        let mut temp = vec![0.0; nx * ny];
        for j in 0..ny {
            let y = -1.0 + j as f64 * dy;
            for i in 0..nx {
                temp[j * nx + i] = t_bottom - (y + 1.0) / 2.0 * (t_bottom - t_top);
            }
        }
        FdOracle {
            nx,
            ny,
            nu,
            kappa,
            t_bottom,
            t_top,
            dx: 2.0 * PI / nx as f64,
            dy,
            omega: vec![0.0; nx * ny],
            psi: vec![0.0; nx * ny],
            temp,
            time: 0.0,
            cos_table: (0..nx).map(|k| (2.0 * PI * k as f64 / nx as f64).cos()).collect(),
            sin_table: (0..nx).map(|k| (2.0 * PI * k as f64 / nx as f64).sin()).collect(),
        }
    }

    /// Adds `amplitude * f(x, y)` to the interior temperature.
    pub fn perturb(&mut self, amplitude: f64, f: impl Fn(f64, f64) -> f64) {
        for j in 1..self.ny - 1 {
            let y = -1.0 + j as f64 * self.dy;
            for i in 0..self.nx {
                let x = i as f64 * self.dx;
                self.temp[j * self.nx + i] += amplitude * f(x, y);
            }
        }
    }

    fn at(&self, f: &[f64], i: isize, j: usize) -> f64 {
        let nx = self.nx as isize;
        f[j * self.nx + (((i % nx) + nx) % nx) as usize]
    }

    pub fn velocity(&self) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let mut u = vec![0.0; nx * ny];
        let mut v = vec![0.0; nx * ny];
        for j in 1..ny - 1 {
            for i in 0..nx {
                let ii = i as isize;
                u[j * nx + i] = (self.psi[(j + 1) * nx + i] - self.psi[(j - 1) * nx + i]) / (2.0 * self.dy);
                v[j * nx + i] =
                    -(self.at(&self.psi, ii + 1, j) - self.at(&self.psi, ii - 1, j)) / (2.0 * self.dx);
            }
        }
        (u, v)
    }

    fn tendencies(&self, omega: &[f64], temp: &[f64], psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let (dx, dy) = (self.dx, self.dy);
        let mut dw = vec![0.0; nx * ny];
        let mut dt = vec![0.0; nx * ny];
        let get = |f: &[f64], i: isize, j: usize| {
            let n = nx as isize;
            f[j * nx + (((i % n) + n) % n) as usize]
        };
        for j in 1..ny - 1 {
            for i in 0..nx {
                let ii = i as isize;
                let u = (psi[(j + 1) * nx + i] - psi[(j - 1) * nx + i]) / (2.0 * dy);
                let v = -(get(psi, ii + 1, j) - get(psi, ii - 1, j)) / (2.0 * dx);
                let lap = |f: &[f64]| {
                    (get(f, ii + 1, j) - 2.0 * f[j * nx + i] + get(f, ii - 1, j)) / (dx * dx)
                        + (f[(j + 1) * nx + i] - 2.0 * f[j * nx + i] + f[(j - 1) * nx + i]) / (dy * dy)
                };
                let ddx = |f: &[f64]| (get(f, ii + 1, j) - get(f, ii - 1, j)) / (2.0 * dx);
                let ddy = |f: &[f64]| (f[(j + 1) * nx + i] - f[(j - 1) * nx + i]) / (2.0 * dy);
                dw[j * nx + i] =
                    -(u * ddx(omega) + v * ddy(omega)) + self.nu * lap(omega) + ddx(temp);
                dt[j * nx + i] = -(u * ddx(temp) + v * ddy(temp)) + self.kappa * lap(temp);
            }
        }
        (dw, dt)
    }

    fn solve_streamfunction(&self, omega: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let n_int = ny - 2;
        let mut psi = vec![0.0; nx * ny];
        // direct DFT of each interior row
        let mut re = vec![vec![0.0; n_int]; nx];
        let mut im = vec![vec![0.0; n_int]; nx];
        for j in 1..ny - 1 {
            for m in 0..nx {
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..nx {
                    let p = (m * i) % nx;
                    a += -omega[j * nx + i] * self.cos_table[p];
                    b -= -omega[j * nx + i] * self.sin_table[p];
                }
                re[m][j - 1] = a;
                im[m][j - 1] = b;
            }
        }
        let dy2 = self.dy * self.dy;
        for m in 0..nx {
            let kk = (2.0 - 2.0 * (2.0 * PI * m as f64 / nx as f64).cos()) / (self.dx * self.dx);
            let diag = -2.0 / dy2 - kk;
            let off = 1.0 / dy2;
            re[m] = thomas(off, diag, off, &re[m]);
            im[m] = thomas(off, diag, off, &im[m]);
        }
        for j in 1..ny - 1 {
            for i in 0..nx {
                let mut s = 0.0;
                for m in 0..nx {
                    let p = (m * i) % nx;
                    s += re[m][j - 1] * self.cos_table[p] - im[m][j - 1] * self.sin_table[p];
                }
                psi[j * nx + i] = s / nx as f64;
            }
        }
        psi
    }

    fn apply_wall_vorticity(&self, omega: &mut [f64], psi: &[f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let dy2 = self.dy * self.dy;
        for i in 0..nx {
            omega[i] = -2.0 * psi[nx + i] / dy2;
            omega[(ny - 1) * nx + i] = -2.0 * psi[(ny - 2) * nx + i] / dy2;
        }
    }

    /// One Heun (RK2) step.
    pub fn step(&mut self, dt: f64) {
        let (dw1, dt1) = self.tendencies(&self.omega, &self.temp, &self.psi);
        let mut w_star: Vec<f64> = self.omega.iter().zip(&dw1).map(|(a, b)| a + dt * b).collect();
        let t_star: Vec<f64> = self.temp.iter().zip(&dt1).map(|(a, b)| a + dt * b).collect();
        let psi_star = self.solve_streamfunction(&w_star);
        self.apply_wall_vorticity(&mut w_star, &psi_star);
        let (dw2, dt2) = self.tendencies(&w_star, &t_star, &psi_star);
        for k in 0..self.omega.len() {
            self.omega[k] += 0.5 * dt * (dw1[k] + dw2[k]);
            self.temp[k] += 0.5 * dt * (dt1[k] + dt2[k]);
        }
        self.psi = self.solve_streamfunction(&self.omega);
        let mut omega = std::mem::take(&mut self.omega);
        self.apply_wall_vorticity(&mut omega, &self.psi);
        self.omega = omega;
        self.time += dt;
    }

    pub fn kinetic_energy(&self) -> f64 {
        let (u, v) = self.velocity();
        u.iter().zip(&v).map(|(a, b)| a * a + b * b).sum()
    }

    /// Largest deviation of the temperature from the linear conduction state.
    pub fn conduction_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.ny {
            let y = -1.0 + j as f64 * self.dy;
            let base = self.t_bottom - (y + 1.0) / 2.0 * (self.t_bottom - self.t_top);
            for i in 0..self.nx {
                worst = worst.max((self.temp[j * self.nx + i] - base).abs());
            }
        }
        worst
    }

    /// Convective Nusselt number with trapezoid averaging.
    pub fn nusselt(&self) -> f64 {
        let (_, v) = self.velocity();
        let (nx, ny) = (self.nx, self.ny);
        let weight = |j: usize| if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        let norm = (ny - 1) as f64 * nx as f64;
        let mean_t: f64 = (0..ny)
            .map(|j| weight(j) * self.temp[j * nx..(j + 1) * nx].iter().sum::<f64>())
            .sum::<f64>()
            / norm;
        let mean_q: f64 = (0..ny)
            .map(|j| {
                weight(j)
                    * (0..nx)
                        .map(|i| v[j * nx + i] * (self.temp[j * nx + i] - mean_t))
                        .sum::<f64>()
            })
            .sum::<f64>()
            / norm;
        mean_q / (self.kappa * (self.t_bottom - self.t_top) / 2.0)
    }
}

fn thomas(a: f64, b: f64, c: f64, d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / b;
    dp[0] = d[0] / b;
    for i in 1..n {
        let m = b - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (d[i] - a * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
