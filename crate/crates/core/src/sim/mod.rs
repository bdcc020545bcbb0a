//! Pseudo-spectral Boussinesq solver for 2D Rayleigh–Bénard convection on
//! `[0, 2pi) x [-1, 1]`: Fourier in the periodic direction, Chebyshev
//! collocation between the no-slip walls, and a piecewise bottom
//! temperature set by a row of heaters.

pub mod checkpoint;
pub mod chebyshev;
pub mod solver;
pub mod spectral;

use crate::error::{RbcError, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use solver::{Operators, Solver};

/// Horizontal period of the domain.
pub const DOMAIN_WIDTH: f64 = 2.0 * PI;
/// Distance between the plates.
pub const DOMAIN_HEIGHT: f64 = 2.0;
/// Number of independently controlled heater segments on the bottom wall.
pub const N_HEATERS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Rayleigh number based on the full plate distance.
    pub ra: f64,
    pub pr: f64,
    pub nx: usize,
    /// Wall-normal collocation points, both walls included.
    pub ny: usize,
    pub dt: f64,
    pub t_bottom: f64,
    pub t_top: f64,
}

impl SimConfig {
    pub const DEFAULT_PR: f64 = 0.7;

    /// Configuration with default Prandtl number, temperatures `(2, 1)` and
    /// the default time step for `ra`.
    pub fn new(ra: f64, nx: usize, ny: usize) -> Self {
        SimConfig {
            ra,
            pr: Self::DEFAULT_PR,
            nx,
            ny,
            dt: Self::default_dt(ra),
            t_bottom: 2.0,
            t_top: 1.0,
        }
    }

    /// 0.025 at `Ra = 1e4`, halved for every (started) decade above it and
    /// doubled for every decade below.
    pub fn default_dt(ra: f64) -> f64 {
        let decades = (ra / 1e4).log10();
        let halvings = (decades - 1e-9).ceil();
        0.025 * 0.5f64.powf(halvings)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.ra) || !positive(self.pr) || !positive(self.dt) {
            return Err(RbcError::Config(format!(
                "ra, pr and dt must be positive (ra={}, pr={}, dt={})",
                self.ra, self.pr, self.dt
            )));
        }
        if !(self.t_bottom > self.t_top) {
            return Err(RbcError::Config(format!(
                "bottom temperature {} must exceed top temperature {}",
                self.t_bottom, self.t_top
            )));
        }
        if self.nx < 8 || self.ny < 8 {
            return Err(RbcError::Config(format!(
                "grid {}x{} too small (need at least 8x8)",
                self.nx, self.ny
            )));
        }
        if !self.nx.is_multiple_of(2) {
            return Err(RbcError::Config(format!("nx = {} must be even", self.nx)));
        }
        Ok(())
    }

    /// Kinematic viscosity in free-fall units, with the half gap as length
    /// scale: `sqrt(Pr / Ra_half)` where `Ra_half = Ra / 8`.
    pub fn viscosity(&self) -> f64 {
        (8.0 * self.pr / self.ra).sqrt()
    }

    /// Thermal diffusivity `1 / sqrt(Ra_half Pr)`.
    pub fn diffusivity(&self) -> f64 {
        (8.0 / (self.ra * self.pr)).sqrt()
    }

    pub fn delta_t(&self) -> f64 {
        self.t_bottom - self.t_top
    }

    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|i| DOMAIN_WIDTH * i as f64 / self.nx as f64)
            .collect()
    }

    pub fn y_coords(&self) -> Vec<f64> {
        chebyshev::nodes(self.ny)
    }

    /// Number of solver steps covering `duration`, which must be an integer
    /// multiple of `dt`.
    pub fn steps_for(&self, duration: f64) -> Result<usize> {
        let n = (duration / self.dt).round();
        if duration < 0.0 || (n * self.dt - duration).abs() > 1e-9 * duration.max(1.0) {
            return Err(RbcError::Config(format!(
                "duration {duration} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    /// Smallest number of solver steps spanning at least `duration`.
    pub fn steps_for_at_least(&self, duration: f64) -> usize {
        if duration <= 0.0 {
            return 0;
        }
        (duration / self.dt - 1e-9).ceil() as usize
    }

    /// Linear conduction temperature at the collocation height `y`, equal to
    /// the imposed wall temperatures at `y = -1` and `y = 1`.
    pub fn conduction_temperature(&self, y: f64) -> f64 {
        self.t_bottom - (y + 1.0) / DOMAIN_HEIGHT * self.delta_t()
    }
}

/// Velocity, temperature and pressure on the `nx x ny` collocation grid,
/// row-major with `x` fastest (`index = j * nx + i`), row `0` at the bottom
/// wall.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub nx: usize,
    pub ny: usize,
    pub u_x: Vec<f64>,
    pub u_y: Vec<f64>,
    pub temp: Vec<f64>,
    pub pressure: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        FieldState {
            nx,
            ny,
            u_x: vec![0.0; n],
            u_y: vec![0.0; n],
            temp: vec![0.0; n],
            pressure: vec![0.0; n],
            time: 0.0,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn row<'a>(&self, field: &'a [f64], j: usize) -> &'a [f64] {
        &field[j * self.nx..(j + 1) * self.nx]
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.u_x
            .iter()
            .zip(&self.u_y)
            .map(|(u, v)| u * u + v * v)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.u_x
            .iter()
            .chain(&self.u_y)
            .chain(&self.temp)
            .all(|v| v.is_finite())
    }

    pub fn check_grid(&self, config: &SimConfig) -> Result<()> {
        let n = config.nx * config.ny;
        if self.nx != config.nx
            || self.ny != config.ny
            || self.u_x.len() != n
            || self.u_y.len() != n
            || self.temp.len() != n
        {
            return Err(RbcError::Config(format!(
                "state grid {}x{} does not match configuration {}x{}",
                self.nx, self.ny, config.nx, config.ny
            )));
        }
        Ok(())
    }
}

/// Bottom wall temperature at each of the `nx` grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct BottomProfile {
    pub values: Vec<f64>,
}

impl BottomProfile {
    pub fn uniform(value: f64, nx: usize) -> Self {
        BottomProfile {
            values: vec![value; nx],
        }
    }
}

/// Heater segment owning grid point `i`: `floor(12 x_i / 2pi)`, evaluated
/// exactly in integers.
pub fn heater_of(i: usize, nx: usize) -> usize {
    ((N_HEATERS * i) / nx).min(N_HEATERS - 1)
}

/// Piecewise-constant expansion of heater temperatures onto the grid.
pub fn expand_heaters(temps: &[f64; N_HEATERS], nx: usize) -> BottomProfile {
    BottomProfile {
        values: (0..nx).map(|i| temps[heater_of(i, nx)]).collect(),
    }
}

/// Motionless state on the conduction profile with seeded uniform noise of
/// the given amplitude on the interior temperature.
pub fn init_conduction(config: &SimConfig, amplitude: f64, seed: u64) -> Result<FieldState> {
    config.validate()?;
    if !(amplitude >= 0.0) {
        return Err(RbcError::Input(format!(
            "perturbation amplitude must be non-negative, got {amplitude}"
        )));
    }
    let (nx, ny) = (config.nx, config.ny);
    let y = config.y_coords();
    let mut state = FieldState::zeros(nx, ny);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..ny {
        let base = config.conduction_temperature(y[j]);
        let wall = j == 0 || j == ny - 1;
        for i in 0..nx {
            let noise = if wall || amplitude == 0.0 {
                0.0
            } else {
                amplitude * (2.0 * rng.random::<f64>() - 1.0)
            };
            state.temp[j * nx + i] = base + noise;
        }
    }
    // walls carry the exact boundary values
    for i in 0..nx {
        state.temp[i] = config.t_bottom;
        state.temp[(ny - 1) * nx + i] = config.t_top;
    }
    Ok(state)
}

/// Advances `state` by `n_steps` with a fresh solver (first step first-order).
/// Long runs that are split into several calls should keep one [`Solver`]
/// alive instead so the multistep history carries over.
pub fn step(
    config: &SimConfig,
    state: &FieldState,
    bottom: &BottomProfile,
    n_steps: usize,
) -> Result<FieldState> {
    if n_steps == 0 {
        return Err(RbcError::Input("n_steps must be at least 1".into()));
    }
    let mut solver = Solver::new(*config, state)?;
    solver.step(bottom, n_steps)?;
    Ok(solver.state().clone())
}

/// L-infinity norm of the spectral divergence `d_x u_x + d_y u_y`.
pub fn divergence_linf(config: &SimConfig, state: &FieldState) -> f64 {
    let (nx, ny) = (config.nx, config.ny);
    let mut fft = spectral::RowFft::new(nx, ny);
    let d = chebyshev::diff_matrix(&config.y_coords());
    let cols = 2 * fft.modes();
    let mut u_hat = DMatrix::zeros(ny, cols);
    let mut v_hat = DMatrix::zeros(ny, cols);
    fft.forward(&state.u_x, &mut u_hat);
    fft.forward(&state.u_y, &mut v_hat);
    let div_hat = spectral::ddx(&u_hat, nx) + &d * &v_hat;
    let mut div = vec![0.0; nx * ny];
    fft.inverse(&div_hat, &mut div);
    div.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}
