mod common;

use common::{gae_max_error, ppo_gradient_relative_error, tiny_problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rbc_control::env::{generate_checkpoints, EnvConfig};
use rbc_control::rl::{
    loss_and_gradient, rbc_envs, sample_action, train, EnvStep, PolicyParams, PpoConfig, RlEnv,
};
use rbc_control::sim::checkpoint::Checkpoint;
use rbc_control::sim::SimConfig;
use rbc_control::{RbcError, Result};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

#[test]
fn gae_matches_the_nested_sum() {
    assert!(gae_max_error(17, 500) <= 1e-10);
}

#[test]
fn ppo_gradient_matches_finite_differences() {
    for seed in 0..5 {
        let err = ppo_gradient_relative_error(seed);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn unbounded_clip_range_gives_the_plain_surrogate() {
    let config = PpoConfig { hidden: vec![6, 5], clip_range: 1e12, ..PpoConfig::default() };
    // ratios far from one would be clipped at the default range
    let (params, mb) = tiny_problem(3, &config, 1.0);
    let out = params.evaluate(&mb.obs);
    let n = mb.len() as f64;
    let mean_adv = mb.advantages.iter().sum::<f64>() / n;
    let std = (mb.advantages.iter().map(|a| (a - mean_adv).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut surrogate = 0.0;
    for c in 0..mb.len() {
        let m: Vec<f64> = out.mean.column(c).iter().copied().collect();
        let a: Vec<f64> = mb.actions.column(c).iter().copied().collect();
        let ratio = (params.log_prob(&m, &a) - mb.old_log_probs[c]).exp();
        surrogate += ratio * (mb.advantages[c] - mean_adv) / (std + 1e-8) / n;
    }
    let (parts, _) = loss_and_gradient(&params, &mb, &config);
    assert!((parts.policy_loss + surrogate).abs() < 1e-12, "{} vs {}", parts.policy_loss, -surrogate);
    assert_eq!(parts.clip_fraction, 0.0);

    let clipped = PpoConfig { clip_range: 0.2, ..config };
    let (tight, _) = loss_and_gradient(&params, &mb, &clipped);
    assert!(tight.clip_fraction > 0.0);
    // the clipped objective is a pessimistic bound
    assert!(tight.policy_loss >= parts.policy_loss - 1e-12);
}

#[test]
fn sampled_actions_follow_a_clamped_gaussian() {
    let config = PpoConfig { hidden: vec![8], log_std_init: (0.6f64).ln(), ..PpoConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut params = PolicyParams::new(3, 2, &config, &mut rng);
    let mut flat = params.flatten();
    flat.iter_mut().for_each(|p| *p += rng.random_range(-0.5..0.5));
    params.read_flat(&flat);
    let obs = [0.3, -0.8, 1.1];
    let (mean, _) = sample_action(&params, &obs, &mut rng, true).unwrap();

    let n = 200_000;
    let mut sums = [0.0; 2];
    for _ in 0..n {
        let (a, lp) = sample_action(&params, &obs, &mut rng, false).unwrap();
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(lp.is_finite());
        sums[0] += a[0];
        sums[1] += a[1];
    }
    for d in 0..2 {
        let sigma = params.log_std[d].exp();
        let normal = Normal::new(mean[d], sigma).unwrap();
        let std_normal = Normal::new(0.0, 1.0).unwrap();
        let (lo, hi) = ((-1.0 - mean[d]) / sigma, (1.0 - mean[d]) / sigma);
        let expected = -normal.cdf(-1.0) + (1.0 - normal.cdf(1.0))
            + mean[d] * (normal.cdf(1.0) - normal.cdf(-1.0))
            - sigma * (std_normal.pdf(hi) - std_normal.pdf(lo));
        let got = sums[d] / n as f64;
        assert!((got - expected).abs() < 4.0 * sigma / (n as f64).sqrt(), "dim {d}: {got} vs {expected}");
    }

    let action = [0.2, -0.4];
    let expected: f64 = (0..2)
        .map(|d| Normal::new(mean[d], params.log_std[d].exp()).unwrap().ln_pdf(action[d]))
        .sum();
    assert!((params.log_prob(&mean, &action) - expected).abs() < 1e-12);
}

/// Episodes of fixed length; the observation is the elapsed fraction and
/// the reward is constant.
struct Countdown {
    horizon: usize,
    t: usize,
    reward: f64,
}

impl RlEnv for Countdown {
    fn obs_dim(&self) -> usize {
        1
    }
    fn act_dim(&self) -> usize {
        1
    }
    fn n_initial_states(&self) -> usize {
        1
    }
    fn initial_state_name(&self, _: usize) -> String {
        "countdown".into()
    }
    fn reset(&mut self, _: usize) -> Result<Vec<f64>> {
        self.t = 0;
        Ok(vec![0.0])
    }
    fn step(&mut self, _: &[f64]) -> Result<EnvStep> {
        self.t += 1;
        Ok(EnvStep {
            obs: vec![self.t as f64 / self.horizon as f64],
            reward: self.reward,
            done: self.t == self.horizon,
            failed: false,
            nu_reduction: None,
            celldist: None,
            cell_count: None,
        })
    }
}

#[test]
fn critic_learns_the_discounted_return() {
    let horizon = 200;
    let gamma: f64 = 0.9;
    let env = || Countdown { horizon, t: 0, reward: 1.0 };
    let config = PpoConfig {
        gamma,
        n_envs: 2,
        n_steps: 200,
        minibatch_size: 100,
        learning_rate: 1e-3,
        total_updates: 25,
        eval_every: 25,
        hidden: vec![32, 32],
        max_grad_norm: 10.0,
        ..PpoConfig::default()
    };
    let outcome = train(vec![env(), env()], vec![env()], &config, 1, |_, _| {}).unwrap();
    let params = outcome.final_params;
    for (t, expected) in [(0usize, (1.0 - gamma.powi(200)) / (1.0 - gamma)), (190, (1.0 - gamma.powi(10)) / (1.0 - gamma))] {
        let v = params.value(&[t as f64 / horizon as f64]).unwrap();
        assert!((v - expected).abs() < 0.1 * expected, "V(t = {t}) = {v}, expected {expected}");
    }
}

/// One-step episodes rewarding actions close to 0.5.
struct Target;

impl RlEnv for Target {
    fn obs_dim(&self) -> usize {
        2
    }
    fn act_dim(&self) -> usize {
        2
    }
    fn n_initial_states(&self) -> usize {
        1
    }
    fn initial_state_name(&self, _: usize) -> String {
        "target".into()
    }
    fn reset(&mut self, _: usize) -> Result<Vec<f64>> {
        Ok(vec![1.0, -1.0])
    }
    fn step(&mut self, a: &[f64]) -> Result<EnvStep> {
        let reward = 1.0 - a.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>();
        Ok(EnvStep { obs: vec![1.0, -1.0], reward, done: true, failed: false, nu_reduction: None, celldist: None, cell_count: None })
    }
}

#[test]
fn policy_moves_toward_the_rewarded_action() {
    let config = PpoConfig {
        n_envs: 2,
        n_steps: 64,
        minibatch_size: 32,
        learning_rate: 3e-3,
        total_updates: 30,
        eval_every: 10,
        hidden: vec![16],
        ..PpoConfig::default()
    };
    let outcome = train(vec![Target, Target], vec![Target], &config, 4, |_, _| {}).unwrap();
    let first = &outcome.validation[0];
    let best = outcome.best_validation();
    assert!(best.mean_return >= first.mean_return);
    assert!(best.mean_return > 0.9, "best return {}", best.mean_return);
    let (a, _) = sample_action(&outcome.best, &[1.0, -1.0], &mut ChaCha8Rng::seed_from_u64(0), true).unwrap();
    assert!(a.iter().all(|v| (v - 0.5).abs() < 0.25), "{a:?}");
}

struct Exploding;

impl RlEnv for Exploding {
    fn obs_dim(&self) -> usize {
        1
    }
    fn act_dim(&self) -> usize {
        1
    }
    fn n_initial_states(&self) -> usize {
        1
    }
    fn initial_state_name(&self, _: usize) -> String {
        "unstable".into()
    }
    fn reset(&mut self, _: usize) -> Result<Vec<f64>> {
        Ok(vec![0.0])
    }
    fn step(&mut self, _: &[f64]) -> Result<EnvStep> {
        Ok(EnvStep { obs: vec![0.0], reward: 0.0, done: true, failed: true, nu_reduction: None, celldist: None, cell_count: None })
    }
}

#[test]
fn repeated_failures_abort_training() {
    let config = PpoConfig { n_envs: 1, n_steps: 8, minibatch_size: 8, total_updates: 2, hidden: vec![4], ..PpoConfig::default() };
    match train(vec![Exploding], vec![Exploding], &config, 0, |_, _| {}) {
        Err(RbcError::TrainingDiverged { initial_state }) => assert_eq!(initial_state, "unstable"),
        other => panic!("expected TrainingDiverged, got {:?}", other.map(|o| o.best_update)),
    }
}

fn small_rbc_setup() -> (EnvConfig, Vec<(String, Checkpoint)>) {
    let sim = SimConfig::new(1e4, 32, 24);
    let states = generate_checkpoints(&sim, 3, 30.0, 0).unwrap();
    let named = states
        .into_iter()
        .enumerate()
        .map(|(k, state)| (format!("c{k}"), Checkpoint { ra: sim.ra, pr: sim.pr, state }))
        .collect();
    let mut env = EnvConfig::new(sim, 0.25, 1.5);
    env.actions_per_episode = 4;
    (env, named)
}

fn smoke_config() -> PpoConfig {
    PpoConfig { n_envs: 2, n_steps: 8, minibatch_size: 8, n_epochs: 2, total_updates: 2, eval_every: 1, hidden: vec![16, 16], ..PpoConfig::default() }
}

#[test]
fn short_rbc_training_run_is_logged_and_reproducible() {
    let (env, checkpoints) = small_rbc_setup();
    let config = smoke_config();
    let run = || {
        let train_envs = rbc_envs(env, checkpoints.clone(), 2).unwrap();
        let val_envs = rbc_envs(env, checkpoints[..2].to_vec(), 1).unwrap();
        let mut seen = 0;
        let outcome = train(train_envs, val_envs, &config, 9, |_, _| seen += 1).unwrap();
        assert_eq!(seen, 2);
        outcome
    };
    let a = run();
    assert_eq!(a.log.len(), 2);
    assert_eq!(a.validation.iter().map(|v| v.update).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(a.validation.iter().all(|v| v.returns.len() == 2 && v.merged.len() == 2));
    assert!(a.best_validation().mean_return >= a.validation[0].mean_return);
    assert!(a.log.iter().all(|l| l.mean_reward.is_finite() && l.mean_nu_reduction.is_finite()));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    rbc_control::rl::train::write_training_log(&path, &a.log).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("update,mean_reward,mean_nu_reduction,mean_celldist"));

    let b = run();
    assert_eq!(a.log, b.log);
    assert_eq!(a.final_params.flatten(), b.final_params.flatten());
    assert_eq!(a.validation, b.validation);
}

#[test]
fn mismatched_environment_count_is_a_config_error() {
    let (env, checkpoints) = small_rbc_setup();
    let config = smoke_config();
    let train_envs = rbc_envs(env, checkpoints.clone(), 3).unwrap();
    let val_envs = rbc_envs(env, checkpoints, 1).unwrap();
    assert!(matches!(train(train_envs, val_envs, &config, 0, |_, _| {}), Err(RbcError::Config(_))));
}
