#![allow(dead_code)]

pub mod fd_oracle;
pub mod oracles;

use rbc_control::diagnostics::nusselt;
use rbc_control::sim::{BottomProfile, FieldState, SimConfig, Solver};

/// Conduction state plus `amp * cos(k x) * cos(pi y / 2)` in the interior.
pub fn mode_perturbed(config: &SimConfig, k: f64, amp: f64) -> FieldState {
    let mut state = FieldState::zeros(config.nx, config.ny);
    let xs = config.x_coords();
    let ys = config.y_coords();
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let wall = j == 0 || j + 1 == config.ny;
            let bump = if wall { 0.0 } else { amp * (k * x).cos() * (std::f64::consts::FRAC_PI_2 * y).cos() };
            state.temp[j * config.nx + i] = config.conduction_temperature(y) + bump;
        }
    }
    state
}

/// Runs `warmup` uncontrolled time units, then samples Nu every `every`
/// units over `window`. Returns (mean, min, max).
pub fn nusselt_window(config: &SimConfig, start: &FieldState, warmup: f64, window: f64, every: f64) -> (f64, f64, f64) {
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mut solver = Solver::new(*config, start).unwrap();
    solver.step(&bottom, config.steps_for_at_least(warmup)).unwrap();
    let chunk = config.steps_for(every).unwrap();
    let samples = (window / every).round() as usize;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        solver.step(&bottom, chunk).unwrap();
        values.push(nusselt(solver.state(), config).unwrap());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, min, max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbc_control::rl::{loss_and_gradient, Minibatch, PolicyParams, PpoConfig, RolloutBuffer};

/// Random rollout buffer without observations or actions.
pub fn random_buffer(rng: &mut ChaCha8Rng, n_envs: usize, n_steps: usize, done_prob: f64) -> RolloutBuffer {
    let n = n_envs * n_steps;
    let mut buffer = RolloutBuffer::new(n_envs, n_steps, 0, 0);
    buffer.log_probs = vec![0.0; n];
    buffer.rewards = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    buffer.values = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    buffer.dones = (0..n).map(|_| rng.random_bool(done_prob)).collect();
    buffer.bootstrap_values = (0..n_envs).map(|_| rng.random_range(-5.0..5.0)).collect();
    buffer
}

/// Largest deviation between the library GAE and the nested-sum oracle
/// over `trials` random buffers.
pub fn gae_max_error(seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n_envs = rng.random_range(1..5);
        let n_steps = rng.random_range(1..40);
        let gamma = rng.random_range(0.0..1.0);
        let lambda = rng.random_range(0.0..1.0);
        let mut buffer = random_buffer(&mut rng, n_envs, n_steps, 0.1);
        buffer.compute_gae(gamma, lambda).unwrap();
        let expected = oracles::gae_nested(
            &buffer.rewards,
            &buffer.values,
            &buffer.dones,
            &buffer.bootstrap_values,
            n_envs,
            gamma,
            lambda,
        );
        worst = worst.max(max_abs_diff(&buffer.advantages, &expected));
        for ((r, a), v) in buffer.returns.iter().zip(&buffer.advantages).zip(&buffer.values) {
            worst = worst.max((r - (a + v)).abs());
        }
    }
    worst
}

/// Tiny policy (4 observations, 2 actions) with a minibatch of 8 samples
/// whose probability ratios stay well inside the clip range.
pub fn tiny_problem(seed: u64, config: &PpoConfig, ratio_spread: f64) -> (PolicyParams, Minibatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = PolicyParams::new(4, 2, config, &mut rng);
    // move away from the near-zero output initialization
    let mut flat = params.flatten();
    flat.iter_mut().for_each(|p| *p += rng.random_range(-0.3..0.3));
    params.read_flat(&flat);
    let b = 8;
    let obs = nalgebra::DMatrix::from_fn(4, b, |_, _| rng.random_range(-1.5..1.5));
    let out = params.evaluate(&obs);
    let actions = nalgebra::DMatrix::from_fn(2, b, |d, c| out.mean[(d, c)] + rng.random_range(-0.8..0.8));
    let old_log_probs = (0..b)
        .map(|c| {
            let m: Vec<f64> = out.mean.column(c).iter().copied().collect();
            let a: Vec<f64> = actions.column(c).iter().copied().collect();
            params.log_prob(&m, &a) + rng.random_range(-ratio_spread..ratio_spread)
        })
        .collect();
    let mb = Minibatch {
        obs,
        actions,
        old_log_probs,
        advantages: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
    };
    (params, mb)
}

/// Relative error between the analytic loss gradient and central finite
/// differences, `|g - g_fd|_inf / |g_fd|_inf`.
pub fn ppo_gradient_relative_error(seed: u64) -> f64 {
    let config = PpoConfig { hidden: vec![6, 5], ent_coef: 0.01, log_std_init: -0.3, ..PpoConfig::default() };
    let (params, mb) = tiny_problem(seed, &config, 0.05);
    let (_, grad) = loss_and_gradient(&params, &mb, &config);
    let flat = params.flatten();
    let h = 1e-6;
    let mut probe = params.clone();
    let mut fd = vec![0.0; flat.len()];
    for k in 0..flat.len() {
        let mut p = flat.clone();
        p[k] = flat[k] + h;
        probe.read_flat(&p);
        let up = loss_and_gradient(&probe, &mb, &config).0.total;
        p[k] = flat[k] - h;
        probe.read_flat(&p);
        let down = loss_and_gradient(&probe, &mb, &config).0.total;
        fd[k] = (up - down) / (2.0 * h);
    }
    let scale = fd.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    max_abs_diff(&grad, &fd) / scale
}
