//! Vorticity–streamfunction time stepper.
//!
//! Each Fourier mode `k != 0` carries a vorticity profile `w_k(y)` and a
//! streamfunction `psi_k(y)` with `u = d psi / dy`, `v = -i k psi`, so the
//! velocity is divergence-free by construction. The no-slip conditions
//! `psi = d psi / dy = 0` are met with an influence-matrix correction on the
//! wall vorticity. The mean horizontal flow `U(y)` is evolved separately.
//!
//! Time stepping is second-order semi-implicit backward differentiation
//! (implicit diffusion, extrapolated advection and buoyancy). The first step
//! after construction is first order.

use super::chebyshev;
use super::spectral::{ddx, truncate, RowFft};
use super::{BottomProfile, FieldState, SimConfig};
use crate::error::{RbcError, Result};
use nalgebra::{DMatrix, DVector, Matrix2};
use std::sync::Arc;

const FLUSH_BELOW: f64 = 1e-150;

struct Influence {
    omega_a: DVector<f64>,
    omega_b: DVector<f64>,
    psi_a: DVector<f64>,
    psi_b: DVector<f64>,
    inv: Matrix2<f64>,
}

struct VorticityOps {
    /// Index 0: first-order step, index 1: second-order step.
    helmholtz_inv: [DMatrix<f64>; 2],
    influence: [Influence; 2],
    poisson_inv: DMatrix<f64>,
}

struct ModeOps {
    temp_inv: [DMatrix<f64>; 2],
    vorticity: Option<VorticityOps>,
    pressure_inv: DMatrix<f64>,
}

/// Precomputed collocation operators for one [`SimConfig`]. Read-only and
/// shareable between solvers of the same configuration.
pub struct Operators {
    config: SimConfig,
    y: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    modes: Vec<ModeOps>,
    mean_flow_inv: [DMatrix<f64>; 2],
    quad_y: Vec<f64>,
}

fn with_dirichlet_rows(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() - 1;
    for row in [0, n] {
        a.row_mut(row).fill(0.0);
        a[(row, row)] = 1.0;
    }
    a
}

fn invert(a: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.try_inverse()
        .ok_or_else(|| RbcError::Config(format!("singular {what} operator")))
}

impl Operators {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let ny = config.ny;
        let n = ny - 1;
        let y = chebyshev::nodes(ny);
        let d1 = chebyshev::diff_matrix(&y);
        let d2 = &d1 * &d1;
        let eye = DMatrix::<f64>::identity(ny, ny);
        let nu = config.viscosity();
        let kappa = config.diffusivity();
        let sigmas = [1.0 / config.dt, 1.5 / config.dt];

        let helmholtz = |sigma: f64, coeff: f64, k: f64| {
            with_dirichlet_rows(&eye * (sigma + coeff * k * k) - &d2 * coeff)
        };

        let n_modes = config.nx / 2 + 1;
        let mut modes = Vec::with_capacity(n_modes);
        for m in 0..n_modes {
            let k = m as f64;
            let temp_inv = [
                invert(helmholtz(sigmas[0], kappa, k), "temperature")?,
                invert(helmholtz(sigmas[1], kappa, k), "temperature")?,
            ];

            let vorticity = if m == 0 || m == config.nx / 2 {
                None
            } else {
                let poisson_inv = invert(
                    with_dirichlet_rows(&d2 - &eye * (k * k)),
                    "streamfunction",
                )?;
                let mut helmholtz_inv = Vec::with_capacity(2);
                let mut influence = Vec::with_capacity(2);
                for &sigma in &sigmas {
                    let h_inv = invert(helmholtz(sigma, nu, k), "vorticity")?;
                    let omega_a = h_inv.column(0).into_owned();
                    let omega_b = h_inv.column(n).into_owned();
                    let stream = |omega: &DVector<f64>| {
                        let mut rhs = -omega;
                        rhs[0] = 0.0;
                        rhs[n] = 0.0;
                        &poisson_inv * rhs
                    };
                    let psi_a = stream(&omega_a);
                    let psi_b = stream(&omega_b);
                    let slope = |row: usize, psi: &DVector<f64>| d1.row(row).dot(&psi.transpose());
                    let m2 = Matrix2::new(
                        slope(0, &psi_a),
                        slope(0, &psi_b),
                        slope(n, &psi_a),
                        slope(n, &psi_b),
                    );
                    let inv = m2.try_inverse().ok_or_else(|| {
                        RbcError::Config(format!("singular influence matrix at k = {m}"))
                    })?;
                    helmholtz_inv.push(h_inv);
                    influence.push(Influence {
                        omega_a,
                        omega_b,
                        psi_a,
                        psi_b,
                        inv,
                    });
                }
                let helmholtz_inv: [DMatrix<f64>; 2] = helmholtz_inv.try_into().ok().unwrap();
                let influence: [Influence; 2] = influence.try_into().ok().unwrap();
                Some(VorticityOps {
                    helmholtz_inv,
                    influence,
                    poisson_inv,
                })
            };

            let pressure_inv = if m == 0 {
                // p0' = f with p0(bottom) = 0
                let mut a = d1.clone();
                a.row_mut(0).fill(0.0);
                a[(0, 0)] = 1.0;
                invert(a, "mean pressure")?
            } else {
                let mut a = &d2 - &eye * (k * k);
                a.row_mut(0).copy_from(&d1.row(0));
                a.row_mut(n).copy_from(&d1.row(n));
                invert(a, "pressure")?
            };

            modes.push(ModeOps {
                temp_inv,
                vorticity,
                pressure_inv,
            });
        }

        let mean_flow_inv = [
            invert(helmholtz(sigmas[0], nu, 0.0), "mean flow")?,
            invert(helmholtz(sigmas[1], nu, 0.0), "mean flow")?,
        ];
        let quad_y = chebyshev::clenshaw_curtis_weights(ny);

        Ok(Operators {
            config,
            y,
            d1,
            d2,
            modes,
            mean_flow_inv,
            quad_y,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Wall-normal differentiation matrix.
    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    /// Clenshaw–Curtis weights in `y` (sum 2).
    pub fn quad_y(&self) -> &[f64] {
        &self.quad_y
    }
}

struct History {
    omega: DMatrix<f64>,
    temp: DMatrix<f64>,
    mean_u: DVector<f64>,
    n_omega: DMatrix<f64>,
    n_temp: DMatrix<f64>,
    n_u: DVector<f64>,
}

/// Time integrator owning the spectral state and the multistep history.
///
/// A solver is single-threaded but `Send`; independent solvers can run on
/// different threads.
pub struct Solver {
    ops: Arc<Operators>,
    fft: RowFft,
    psi: DMatrix<f64>,
    omega: DMatrix<f64>,
    temp: DMatrix<f64>,
    mean_u: DVector<f64>,
    history: Option<History>,
    bottom: BottomProfile,
    state: FieldState,
    steps_taken: u64,
}

impl Solver {
    pub fn new(config: SimConfig, state: &FieldState) -> Result<Self> {
        Self::with_operators(Arc::new(Operators::new(config)?), state)
    }

    /// Starts from a physical state; vorticity and streamfunction are
    /// reconstructed from the velocity field.
    pub fn with_operators(ops: Arc<Operators>, state: &FieldState) -> Result<Self> {
        let config = ops.config;
        state.check_grid(&config)?;
        if !state.is_finite() {
            return Err(RbcError::Input("initial state contains non-finite values".into()));
        }
        let (nx, ny) = (config.nx, config.ny);
        let mut fft = RowFft::new(nx, ny);
        let cols = 2 * fft.modes();
        let mut u_hat = DMatrix::zeros(ny, cols);
        let mut v_hat = DMatrix::zeros(ny, cols);
        let mut temp = DMatrix::zeros(ny, cols);
        fft.forward(&state.u_x, &mut u_hat);
        fft.forward(&state.u_y, &mut v_hat);
        fft.forward(&state.temp, &mut temp);

        let mut psi = DMatrix::zeros(ny, cols);
        for m in 1..fft.modes() {
            if m == nx / 2 {
                continue;
            }
            let k = m as f64;
            for j in 0..ny {
                // psi = i v / k
                psi[(j, 2 * m)] = -v_hat[(j, 2 * m + 1)] / k;
                psi[(j, 2 * m + 1)] = v_hat[(j, 2 * m)] / k;
            }
        }
        let mut omega = ddx(&v_hat, nx) - &ops.d1 * &u_hat;
        omega.column_mut(0).fill(0.0);
        omega.column_mut(1).fill(0.0);
        let nyq = nx / 2;
        omega.column_mut(2 * nyq).fill(0.0);
        omega.column_mut(2 * nyq + 1).fill(0.0);
        let mean_u = u_hat.column(0).into_owned();

        let bottom = BottomProfile {
            values: state.row(&state.temp, 0).to_vec(),
        };
        Ok(Solver {
            ops,
            fft,
            psi,
            omega,
            temp,
            mean_u,
            history: None,
            bottom,
            state: state.clone(),
            steps_taken: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.ops.config
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    /// Physical fields after the most recent [`Solver::step`] call.
    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn into_state(self) -> FieldState {
        self.state
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    /// Advances `n_steps` time steps with the bottom wall held at `bottom`.
    pub fn step(&mut self, bottom: &BottomProfile, n_steps: usize) -> Result<()> {
        let config = self.ops.config;
        if bottom.values.len() != config.nx {
            return Err(RbcError::Config(format!(
                "bottom profile has {} points, grid has {}",
                bottom.values.len(),
                config.nx
            )));
        }
        if !bottom.values.iter().all(|v| v.is_finite()) {
            return Err(RbcError::Input("bottom profile contains non-finite values".into()));
        }
        self.bottom = bottom.clone();
        let bottom_hat = self.fft.forward_row(&bottom.values);
        for _ in 0..n_steps {
            self.advance(&bottom_hat)?;
        }
        self.synthesize();
        Ok(())
    }

    fn nonlinear(&mut self) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let ops = Arc::clone(&self.ops);
        let (nx, ny) = (ops.config.nx, ops.config.ny);
        let d1 = &ops.d1;

        let mut u_hat = d1 * &self.psi;
        u_hat.column_mut(0).copy_from(&self.mean_u);
        let mut v_hat = -ddx(&self.psi, nx);
        let mut omega_full = self.omega.clone();
        omega_full.column_mut(0).copy_from(&(-(d1 * &self.mean_u)));
        let mut wx = ddx(&omega_full, nx);
        let mut wy = d1 * &omega_full;
        let tx_full = ddx(&self.temp, nx);
        let mut tx = tx_full.clone();
        let mut ty = d1 * &self.temp;
        for spec in [&mut u_hat, &mut v_hat, &mut wx, &mut wy, &mut tx, &mut ty] {
            truncate(spec, nx);
        }

        let n = nx * ny;
        let mut phys = vec![vec![0.0; n]; 6];
        for (spec, out) in [&u_hat, &v_hat, &wx, &wy, &tx, &ty].into_iter().zip(phys.iter_mut()) {
            self.fft.inverse(spec, out);
        }
        let (u, v) = (&phys[0], &phys[1]);
        let mut n_w = vec![0.0; n];
        let mut n_t = vec![0.0; n];
        for idx in 0..n {
            n_w[idx] = -(u[idx] * phys[2][idx] + v[idx] * phys[3][idx]);
            n_t[idx] = -(u[idx] * phys[4][idx] + v[idx] * phys[5][idx]);
        }
        let mean_uv = DVector::from_iterator(
            ny,
            (0..ny).map(|j| {
                let row = j * nx..(j + 1) * nx;
                u[row.clone()].iter().zip(&v[row]).map(|(a, b)| a * b).sum::<f64>() / nx as f64
            }),
        );
        let n_u = -(d1 * mean_uv);

        let cols = 2 * self.fft.modes();
        let mut n_omega = DMatrix::zeros(ny, cols);
        let mut n_temp = DMatrix::zeros(ny, cols);
        self.fft.forward(&n_w, &mut n_omega);
        self.fft.forward(&n_t, &mut n_temp);
        truncate(&mut n_omega, nx);
        truncate(&mut n_temp, nx);
        n_omega += tx_full;
        n_omega.column_mut(0).fill(0.0);
        n_omega.column_mut(1).fill(0.0);
        (n_omega, n_temp, n_u)
    }

    fn advance(&mut self, bottom_hat: &[realfft::num_complex::Complex<f64>]) -> Result<()> {
        let ops = Arc::clone(&self.ops);
        let config = ops.config;
        let ny = config.ny;
        let last = ny - 1;
        let dt = config.dt;
        let (n_omega, n_temp, n_u) = self.nonlinear();

        let (order, mut rhs_w, mut rhs_t, mut rhs_u) = match &self.history {
            None => (
                0,
                &self.omega / dt + &n_omega,
                &self.temp / dt + &n_temp,
                &self.mean_u / dt + &n_u,
            ),
            Some(h) => (
                1,
                (&self.omega * 4.0 - &h.omega) / (2.0 * dt) + &n_omega * 2.0 - &h.n_omega,
                (&self.temp * 4.0 - &h.temp) / (2.0 * dt) + &n_temp * 2.0 - &h.n_temp,
                (&self.mean_u * 4.0 - &h.mean_u) / (2.0 * dt) + &n_u * 2.0 - &h.n_u,
            ),
        };

        let cols = rhs_w.ncols();
        let mut omega_new = DMatrix::zeros(ny, cols);
        let mut psi_new = DMatrix::zeros(ny, cols);
        let mut temp_new = DMatrix::zeros(ny, cols);

        rhs_w.row_mut(0).fill(0.0);
        rhs_w.row_mut(last).fill(0.0);
        for (m, mode) in ops.modes.iter().enumerate() {
            // temperature with Dirichlet walls
            for c in 0..2 {
                rhs_t[(0, 2 * m + c)] = if c == 0 { bottom_hat[m].re } else { bottom_hat[m].im };
                rhs_t[(last, 2 * m + c)] = if m == 0 && c == 0 { config.t_top } else { 0.0 };
            }
            temp_new
                .columns_mut(2 * m, 2)
                .gemm(1.0, &mode.temp_inv[order], &rhs_t.columns(2 * m, 2), 0.0);

            let Some(vort) = &mode.vorticity else { continue };
            let infl = &vort.influence[order];
            let omega_p = &vort.helmholtz_inv[order] * rhs_w.columns(2 * m, 2);
            let mut src = -&omega_p;
            src.row_mut(0).fill(0.0);
            src.row_mut(last).fill(0.0);
            let psi_p = &vort.poisson_inv * src;
            let slope_bottom = ops.d1.row(0) * &psi_p;
            let slope_top = ops.d1.row(last) * &psi_p;
            for c in 0..2 {
                let coeffs = -(infl.inv
                    * nalgebra::Vector2::new(slope_bottom[c], slope_top[c]));
                let (ca, cb) = (coeffs[0], coeffs[1]);
                let mut w = omega_new.column_mut(2 * m + c);
                w.copy_from(&omega_p.column(c));
                w.axpy(ca, &infl.omega_a, 1.0);
                w.axpy(cb, &infl.omega_b, 1.0);
                let mut p = psi_new.column_mut(2 * m + c);
                p.copy_from(&psi_p.column(c));
                p.axpy(ca, &infl.psi_a, 1.0);
                p.axpy(cb, &infl.psi_b, 1.0);
            }
        }

        rhs_u[0] = 0.0;
        rhs_u[last] = 0.0;
        let mean_u_new = &ops.mean_flow_inv[order] * rhs_u;

        let finite = omega_new.iter().chain(temp_new.iter()).chain(mean_u_new.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(RbcError::Diverged {
                step: self.steps_taken + 1,
                time: self.state.time + dt,
            });
        }
        let mut mean_u_new = mean_u_new;
        for v in omega_new
            .iter_mut()
            .chain(psi_new.iter_mut())
            .chain(temp_new.iter_mut())
            .chain(mean_u_new.iter_mut())
        {
            // decaying modes would otherwise sink into slow subnormal arithmetic
            if v.abs() < FLUSH_BELOW {
                *v = 0.0;
            }
        }

        let omega_old = std::mem::replace(&mut self.omega, omega_new);
        let temp_old = std::mem::replace(&mut self.temp, temp_new);
        let mean_u_old = std::mem::replace(&mut self.mean_u, mean_u_new);
        self.psi = psi_new;
        self.history = Some(History {
            omega: omega_old,
            temp: temp_old,
            mean_u: mean_u_old,
            n_omega,
            n_temp,
            n_u,
        });
        self.steps_taken += 1;
        self.state.time += dt;
        Ok(())
    }

    /// Rebuilds the physical fields (and the diagnostic pressure) from the
    /// spectral state.
    fn synthesize(&mut self) {
        let ops = Arc::clone(&self.ops);
        let config = ops.config;
        let (nx, ny) = (config.nx, config.ny);
        let last = ny - 1;
        let d1 = &ops.d1;

        let mut u_hat = d1 * &self.psi;
        u_hat.column_mut(0).copy_from(&self.mean_u);
        let v_hat = -ddx(&self.psi, nx);

        let state = &mut self.state;
        self.fft.inverse(&u_hat, &mut state.u_x);
        self.fft.inverse(&v_hat, &mut state.u_y);
        self.fft.inverse(&self.temp, &mut state.temp);
        for i in 0..nx {
            for j in [0, last] {
                state.u_x[j * nx + i] = 0.0;
                state.u_y[j * nx + i] = 0.0;
            }
            state.temp[i] = self.bottom.values[i];
            state.temp[last * nx + i] = config.t_top;
        }

        // Pressure from the Poisson equation with Neumann data taken from
        // the wall-normal momentum balance.
        let mut ux_hat = ddx(&u_hat, nx);
        let mut uy_hat = d1 * &u_hat;
        let mut vx_hat = ddx(&v_hat, nx);
        let mut vy_hat = d1 * &v_hat;
        let ty_hat = d1 * &self.temp;
        for spec in [&mut ux_hat, &mut uy_hat, &mut vx_hat, &mut vy_hat] {
            truncate(spec, nx);
        }
        let n = nx * ny;
        let mut grads = vec![vec![0.0; n]; 4];
        for (spec, out) in [&ux_hat, &uy_hat, &vx_hat, &vy_hat].into_iter().zip(grads.iter_mut()) {
            self.fft.inverse(spec, out);
        }
        let source: Vec<f64> = (0..n)
            .map(|i| {
                let (ux, uy, vx, vy) = (grads[0][i], grads[1][i], grads[2][i], grads[3][i]);
                -(ux * ux + 2.0 * uy * vx + vy * vy)
            })
            .collect();
        let cols = 2 * self.fft.modes();
        let mut rhs = DMatrix::zeros(ny, cols);
        self.fft.forward(&source, &mut rhs);
        rhs += ty_hat;

        let mut v_trunc = v_hat.clone();
        truncate(&mut v_trunc, nx);
        let mut v_phys = vec![0.0; n];
        self.fft.inverse(&v_trunc, &mut v_phys);
        let mean_vv = DVector::from_iterator(
            ny,
            (0..ny).map(|j| v_phys[j * nx..(j + 1) * nx].iter().map(|v| v * v).sum::<f64>() / nx as f64),
        );
        let d2v = &ops.d2 * &v_hat;
        let nu = config.viscosity();

        let mut p_hat = DMatrix::zeros(ny, cols);
        for (m, mode) in ops.modes.iter().enumerate() {
            if m == 0 {
                let mut f = self.temp.column(0).into_owned() - d1 * &mean_vv;
                f[0] = 0.0;
                p_hat.column_mut(0).copy_from(&(&mode.pressure_inv * f));
                continue;
            }
            let mut cols_rhs = rhs.columns(2 * m, 2).into_owned();
            for c in 0..2 {
                for row in [0, last] {
                    cols_rhs[(row, c)] = nu * d2v[(row, 2 * m + c)] + self.temp[(row, 2 * m + c)];
                }
            }
            p_hat
                .columns_mut(2 * m, 2)
                .gemm(1.0, &mode.pressure_inv, &cols_rhs, 0.0);
        }
        self.fft.inverse(&p_hat, &mut state.pressure);
        let mean: f64 = (0..ny)
            .map(|j| ops.quad_y[j] * state.pressure[j * nx..(j + 1) * nx].iter().sum::<f64>() / nx as f64)
            .sum::<f64>()
            / 2.0;
        state.pressure.iter_mut().for_each(|p| *p -= mean);
    }
}
