//! Reference computations written independently of the library.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Pairwise periodic distance written straight from its definition.
pub fn pair_distance(c1: f64, c2: f64) -> f64 {
    f64::min((c1 - c2).abs(), 2.0 * PI - (c1 - c2).abs())
}

/// Maximum over all ordered pairs, 0 for fewer than two points.
pub fn brute_cell_distance(positions: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for (a, &p) in positions.iter().enumerate() {
        for (b, &q) in positions.iter().enumerate() {
            if a != b {
                best = best.max(pair_distance(p, q));
            }
        }
    }
    best
}

/// Brute-force local maxima of a periodic sequence with strict neighbours.
pub fn brute_strict_maxima(signal: &[f64]) -> Vec<usize> {
    let n = signal.len();
    (0..n)
        .filter(|&i| {
            let v = signal[i];
            v > 0.0 && signal[(i + n - 1) % n] < v && signal[(i + 1) % n] < v
        })
        .collect()
}

/// Advantage estimates by explicit summation over future TD residuals,
/// one environment at a time. Arrays use the `t * n_envs + e` layout.
pub fn gae_nested(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: &[f64],
    n_envs: usize,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n_steps = rewards.len() / n_envs;
    let mut out = vec![0.0; rewards.len()];
    for e in 0..n_envs {
        let value_after = |t: usize| {
            if t + 1 < n_steps {
                values[(t + 1) * n_envs + e]
            } else {
                bootstrap[e]
            }
        };
        for t in 0..n_steps {
            let mut total = 0.0;
            let mut weight = 1.0;
            for l in t..n_steps {
                let k = l * n_envs + e;
                let next = if dones[k] { 0.0 } else { value_after(l) };
                let delta = rewards[k] + gamma * next - values[k];
                total += weight * delta;
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            out[t * n_envs + e] = total;
        }
    }
    out
}
