//! Chebyshev–Gauss–Lobatto collocation in the wall-normal direction.
//!
//! Nodes are ordered bottom to top, `y_j = -cos(pi j / N)`, so row 0 is the
//! heated wall and row `N` the cooled one.

use nalgebra::DMatrix;
use std::f64::consts::PI;

pub fn nodes(n_points: usize) -> Vec<f64> {
    let n = (n_points - 1) as f64;
    (0..n_points).map(|j| -(PI * j as f64 / n).cos()).collect()
}

/// Barycentric weights of the Lobatto nodes (up to a common factor).
pub fn barycentric_weights(n_points: usize) -> Vec<f64> {
    (0..n_points)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n_points - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect()
}

/// First-derivative collocation matrix. The diagonal uses the negative-sum
/// trick so that constants are differentiated to zero exactly.
pub fn diff_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let w = barycentric_weights(n);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                row_sum += v;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Clenshaw–Curtis quadrature weights on the Lobatto nodes (sum to 2).
pub fn clenshaw_curtis_weights(n_points: usize) -> Vec<f64> {
    let n = n_points - 1;
    let mut w = vec![0.0; n_points];
    let theta: Vec<f64> = (0..=n).map(|j| PI * j as f64 / n as f64).collect();
    if n.is_multiple_of(2) {
        w[0] = 1.0 / ((n * n - 1) as f64);
        w[n] = w[0];
        for j in 1..n {
            let mut v = 1.0;
            for k in 1..n / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / ((4 * k * k - 1) as f64);
            }
            v -= (n as f64 * theta[j]).cos() / ((n * n - 1) as f64);
            w[j] = 2.0 * v / n as f64;
        }
    } else {
        w[0] = 1.0 / ((n * n) as f64);
        w[n] = w[0];
        for j in 1..n {
            let mut v = 1.0;
            for k in 1..=(n - 1) / 2 {
                v -= 2.0 * (2.0 * k as f64 * theta[j]).cos() / ((4 * k * k - 1) as f64);
            }
            w[j] = 2.0 * v / n as f64;
        }
    }
    w
}

/// Row vector that evaluates the collocation interpolant at `y`.
pub fn interpolation_row(nodes: &[f64], y: f64) -> Vec<f64> {
    let w = barycentric_weights(nodes.len());
    if let Some(hit) = nodes.iter().position(|&x| (x - y).abs() < 1e-15) {
        let mut row = vec![0.0; nodes.len()];
        row[hit] = 1.0;
        return row;
    }
    let terms: Vec<f64> = nodes.iter().zip(&w).map(|(&x, &wj)| wj / (y - x)).collect();
    let denom: f64 = terms.iter().sum();
    terms.into_iter().map(|t| t / denom).collect()
}
