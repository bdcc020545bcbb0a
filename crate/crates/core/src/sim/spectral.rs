//! Fourier transforms along the periodic direction.
//!
//! Spectral fields are `ny x 2M` matrices (`M = nx/2 + 1`): column `2m`
//! holds the real part and column `2m + 1` the imaginary part of the
//! normalized coefficient of wavenumber `m` on every wall-normal row.

use nalgebra::DMatrix;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use std::sync::Arc;

pub struct RowFft {
    nx: usize,
    ny: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    real_buf: Vec<f64>,
    spec_buf: Vec<Complex<f64>>,
    scratch_fwd: Vec<Complex<f64>>,
    scratch_inv: Vec<Complex<f64>>,
}

impl RowFft {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(nx);
        let inverse = planner.plan_fft_inverse(nx);
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        RowFft {
            nx,
            ny,
            real_buf: forward.make_input_vec(),
            spec_buf: forward.make_output_vec(),
            forward,
            inverse,
            scratch_fwd,
            scratch_inv,
        }
    }

    pub fn modes(&self) -> usize {
        self.nx / 2 + 1
    }

    /// Physical row-major field (x fastest) to normalized coefficients.
    pub fn forward(&mut self, field: &[f64], out: &mut DMatrix<f64>) {
        let scale = 1.0 / self.nx as f64;
        for j in 0..self.ny {
            self.real_buf
                .copy_from_slice(&field[j * self.nx..(j + 1) * self.nx]);
            self.forward
                .process_with_scratch(&mut self.real_buf, &mut self.spec_buf, &mut self.scratch_fwd)
                .expect("forward FFT buffer sizes");
            for (m, c) in self.spec_buf.iter().enumerate() {
                out[(j, 2 * m)] = c.re * scale;
                out[(j, 2 * m + 1)] = c.im * scale;
            }
        }
    }

    /// Normalized coefficients back to a physical row-major field. The
    /// imaginary parts of the mean and Nyquist modes are ignored.
    pub fn inverse(&mut self, spec: &DMatrix<f64>, field: &mut [f64]) {
        let last = self.modes() - 1;
        for j in 0..self.ny {
            for (m, c) in self.spec_buf.iter_mut().enumerate() {
                *c = Complex::new(spec[(j, 2 * m)], spec[(j, 2 * m + 1)]);
            }
            self.spec_buf[0].im = 0.0;
            if self.nx.is_multiple_of(2) {
                self.spec_buf[last].im = 0.0;
            }
            self.inverse
                .process_with_scratch(&mut self.spec_buf, &mut self.real_buf, &mut self.scratch_inv)
                .expect("inverse FFT buffer sizes");
            field[j * self.nx..(j + 1) * self.nx].copy_from_slice(&self.real_buf);
        }
    }

    /// One physical row to its normalized coefficients.
    pub fn forward_row(&mut self, row: &[f64]) -> Vec<Complex<f64>> {
        let scale = 1.0 / self.nx as f64;
        self.real_buf.copy_from_slice(row);
        self.forward
            .process_with_scratch(&mut self.real_buf, &mut self.spec_buf, &mut self.scratch_fwd)
            .expect("forward FFT buffer sizes");
        self.spec_buf.iter().map(|c| c * scale).collect()
    }
}

/// Multiplies every mode by `i k` (Nyquist derivative set to zero).
pub fn ddx(spec: &DMatrix<f64>, nx: usize) -> DMatrix<f64> {
    let modes = spec.ncols() / 2;
    let mut out = DMatrix::zeros(spec.nrows(), spec.ncols());
    for m in 0..modes {
        if nx.is_multiple_of(2) && m == nx / 2 {
            continue;
        }
        let k = m as f64;
        for j in 0..spec.nrows() {
            out[(j, 2 * m)] = -k * spec[(j, 2 * m + 1)];
            out[(j, 2 * m + 1)] = k * spec[(j, 2 * m)];
        }
    }
    out
}

/// Zeroes all modes above the 2/3-rule cutoff `nx / 3`.
pub fn truncate(spec: &mut DMatrix<f64>, nx: usize) {
    let cutoff = nx / 3;
    let modes = spec.ncols() / 2;
    for m in (cutoff + 1)..modes {
        spec.column_mut(2 * m).fill(0.0);
        spec.column_mut(2 * m + 1).fill(0.0);
    }
}
