//! Fully connected tanh network with manual backpropagation.
//!
//! Activations are stored column-wise: an input batch is a
//! `features x batch` matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out x in`
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Multilayer perceptron with tanh hidden layers and a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Layer activations from a forward pass, input first.
pub struct ForwardCache {
    activations: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Orthogonal matrix of shape `rows x cols` scaled by `gain`.
pub fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> DMatrix<f64> {
    let (m, n) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let g = DMatrix::<f64>::from_fn(m, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    q * gain
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`. Hidden weights use gain
    /// `hidden_gain`, the output layer `output_gain`; biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let gain = if l + 1 == n { output_gain } else { hidden_gain };
                Dense {
                    w: orthogonal(sizes[l + 1], sizes[l], gain, rng),
                    b: DVector::zeros(sizes[l + 1]),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.nrows()
    }

    /// `[input, hidden..., output]`
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.w.nrows()))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn affine(layer: &Dense, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &layer.w * x;
        for mut col in z.column_iter_mut() {
            col += &layer.b;
        }
        z
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            a = Self::affine(layer, &a);
            if l + 1 < self.layers.len() {
                a.apply(|v| *v = v.tanh());
            }
        }
        a
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> ForwardCache {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Self::affine(layer, activations.last().unwrap());
            if l + 1 < self.layers.len() {
                z.apply(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    /// Gradient of a scalar loss with respect to all parameters, in
    /// [`Mlp::flatten`] order, given the loss gradient at the output.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &DMatrix<f64>) -> Vec<f64> {
        let n = self.layers.len();
        let mut per_layer: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(n);
        let mut delta = grad_output.clone();
        for l in (0..n).rev() {
            let input = &cache.activations[l];
            let gw = &delta * input.transpose();
            let gb = delta.column_sum();
            if l > 0 {
                let mut back = self.layers[l].w.transpose() * &delta;
                back.zip_apply(input, |g, a| *g *= 1.0 - a * a);
                delta = back;
            }
            per_layer.push((gw, gb));
        }
        per_layer.reverse();
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in per_layer {
            flat.extend_from_slice(gw.as_slice());
            flat.extend_from_slice(gb.as_slice());
        }
        flat
    }

    /// Weights (column-major) then biases, layer by layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        self.write_flat(&mut flat);
        flat
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            out.extend_from_slice(layer.w.as_slice());
            out.extend_from_slice(layer.b.as_slice());
        }
    }

    /// Inverse of [`Mlp::flatten`]; returns the number of values consumed.
    pub fn read_flat(&mut self, flat: &[f64]) -> usize {
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.w.len();
            layer.w.as_mut_slice().copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = layer.b.len();
            layer.b.as_mut_slice().copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        at
    }

    /// Zero-initialized network of the given shape.
    pub fn zeros(sizes: &[usize]) -> Self {
        Mlp {
            layers: sizes
                .windows(2)
                .map(|w| Dense {
                    w: DMatrix::zeros(w[1], w[0]),
                    b: DVector::zeros(w[1]),
                })
                .collect(),
        }
    }
}
