//! Rollout collection on parallel environments, PPO updates and
//! validation-based policy selection.

use super::buffer::RolloutBuffer;
use super::policy::PolicyParams;
use super::ppo::{ppo_update, Adam, PpoConfig, UpdateStats};
use crate::diagnostics::persistent_merge_index;
use crate::env::{nusselt_reward, transform_raw_action, EnvConfig, RbcEnv, OBS_DIM};
use crate::error::{RbcError, Result};
use crate::sim::checkpoint::Checkpoint;
use crate::sim::{Operators, N_HEATERS};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;
use std::sync::Arc;

/// Outcome of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The simulation failed; the episode ended early.
    pub failed: bool,
    /// `1 - Nu / Nu_base`, when the environment measures it.
    pub nu_reduction: Option<f64>,
    pub celldist: Option<f64>,
    pub cell_count: Option<usize>,
}

/// Episodic environment with a finite set of initial states, as seen by the
/// trainer.
pub trait RlEnv: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn n_initial_states(&self) -> usize;
    fn initial_state_name(&self, index: usize) -> String;
    fn reset(&mut self, index: usize) -> Result<Vec<f64>>;
    /// `raw_action` entries lie in `[-1, 1]`.
    fn step(&mut self, raw_action: &[f64]) -> Result<EnvStep>;
}

/// [`RbcEnv`] cycling through a fixed list of checkpoints.
pub struct RbcTrainingEnv {
    env: RbcEnv,
    checkpoints: Arc<Vec<(String, Checkpoint)>>,
}

impl RbcTrainingEnv {
    pub fn new(config: EnvConfig, ops: Arc<Operators>, checkpoints: Arc<Vec<(String, Checkpoint)>>) -> Result<Self> {
        if checkpoints.is_empty() {
            return Err(RbcError::Config("no checkpoints for training environment".into()));
        }
        Ok(RbcTrainingEnv {
            env: RbcEnv::with_operators(config, ops)?,
            checkpoints,
        })
    }

    pub fn inner(&self) -> &RbcEnv {
        &self.env
    }
}

impl RlEnv for RbcTrainingEnv {
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn act_dim(&self) -> usize {
        N_HEATERS
    }

    fn n_initial_states(&self) -> usize {
        self.checkpoints.len()
    }

    fn initial_state_name(&self, index: usize) -> String {
        self.checkpoints[index].0.clone()
    }

    fn reset(&mut self, index: usize) -> Result<Vec<f64>> {
        Ok(self.env.reset(&self.checkpoints[index].1)?.probes)
    }

    fn step(&mut self, raw_action: &[f64]) -> Result<EnvStep> {
        let raw: [f64; N_HEATERS] = raw_action
            .try_into()
            .map_err(|_| RbcError::Input(format!("expected {N_HEATERS} action values")))?;
        let t_bottom = self.env.config().sim.t_bottom;
        let action = transform_raw_action(&raw, t_bottom);
        assert!(action.validate(t_bottom).is_ok(), "illegal heater action {action:?}");
        let r = self.env.step(&action)?;
        let measured = !r.failed;
        Ok(EnvStep {
            obs: r.observation.probes,
            reward: r.reward,
            done: r.done,
            failed: r.failed,
            nu_reduction: measured.then(|| nusselt_reward(r.nusselt, self.env.config().nu_base)),
            celldist: measured.then_some(r.celldist),
            cell_count: measured.then_some(r.cell_count),
        })
    }
}

/// Builds `count` RBC training environments sharing solver operators.
pub fn rbc_envs(config: EnvConfig, checkpoints: Vec<(String, Checkpoint)>, count: usize) -> Result<Vec<RbcTrainingEnv>> {
    config.validate()?;
    let ops = Arc::new(Operators::new(config.sim)?);
    let checkpoints = Arc::new(checkpoints);
    (0..count)
        .map(|_| RbcTrainingEnv::new(config, Arc::clone(&ops), Arc::clone(&checkpoints)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateLog {
    pub update: usize,
    pub mean_reward: f64,
    /// Mean of `100 (1 - Nu / Nu_base)` over the rollout.
    pub mean_nu_reduction: f64,
    pub mean_celldist: f64,
    pub stats: UpdateStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationRecord {
    /// Number of completed updates when the policy was evaluated.
    pub update: usize,
    pub mean_return: f64,
    /// Mean per-step reward over all validation steps.
    pub mean_reward: f64,
    pub returns: Vec<f64>,
    /// Per episode: the cell count is 1 from some step through the end.
    pub merged: Vec<bool>,
}

impl ValidationRecord {
    pub fn merged_pct(&self) -> f64 {
        100.0 * self.merged.iter().filter(|&&m| m).count() as f64 / self.merged.len().max(1) as f64
    }
}

pub struct TrainOutcome {
    pub best: PolicyParams,
    pub best_update: usize,
    pub final_params: PolicyParams,
    pub log: Vec<UpdateLog>,
    pub validation: Vec<ValidationRecord>,
}

impl TrainOutcome {
    pub fn best_validation(&self) -> &ValidationRecord {
        self.validation
            .iter()
            .find(|v| v.update == self.best_update)
            .expect("best update was validated")
    }
}

fn nan_mean(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let (sum, n) = values.flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Deterministic episodes from every initial state of the validation
/// environments, spread round-robin over the given instances.
pub fn validate_policy<E: RlEnv>(params: &PolicyParams, envs: &mut [E], update: usize) -> Result<ValidationRecord> {
    let n_states = envs[0].n_initial_states();
    let n_envs = envs.len();
    let mut results: Vec<(usize, f64, bool, usize)> = envs
        .par_iter_mut()
        .enumerate()
        .map(|(j, env)| {
            let mut out = Vec::new();
            for index in (j..n_states).step_by(n_envs) {
                let mut obs = env.reset(index)?;
                let mut ret = 0.0;
                let mut counts = Vec::new();
                let mut unused = ChaCha8Rng::seed_from_u64(0);
                loop {
                    let (action, _) = super::policy::sample_action(params, &obs, &mut unused, true)?;
                    let step = env.step(&action)?;
                    ret += step.reward;
                    counts.push(step.cell_count.unwrap_or(0));
                    obs = step.obs;
                    if step.done {
                        let merged = !step.failed && persistent_merge_index(&counts).is_some();
                        out.push((index, ret, merged, counts.len()));
                        break;
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    results.sort_by_key(|r| r.0);
    let returns: Vec<f64> = results.iter().map(|r| r.1).collect();
    let steps: usize = results.iter().map(|r| r.3).sum();
    Ok(ValidationRecord {
        update,
        mean_return: returns.iter().sum::<f64>() / returns.len() as f64,
        mean_reward: returns.iter().sum::<f64>() / steps.max(1) as f64,
        returns,
        merged: results.iter().map(|r| r.2).collect(),
    })
}

/// Failures tolerated per initial state before training is aborted.
const MAX_FAILURES_PER_STATE: usize = 3;

/// PPO training with validation at update 0, update 1 and every
/// `eval_every` updates. The returned best policy has the highest mean
/// validation return seen.
pub fn train<E: RlEnv>(
    train_envs: Vec<E>,
    val_envs: Vec<E>,
    config: &PpoConfig,
    seed: u64,
    mut on_update: impl FnMut(&UpdateLog, Option<&ValidationRecord>),
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut envs = train_envs;
    let mut val_envs = val_envs;
    if envs.len() != config.n_envs {
        return Err(RbcError::Config(format!(
            "{} training environments given, configuration expects {}",
            envs.len(),
            config.n_envs
        )));
    }
    if val_envs.is_empty() {
        return Err(RbcError::Config("at least one validation environment is required".into()));
    }
    let obs_dim = envs[0].obs_dim();
    let act_dim = envs[0].act_dim();
    let n_states = envs[0].n_initial_states();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut params = PolicyParams::new(obs_dim, act_dim, config, &mut rng);
    let mut optimizer = Adam::new(params.n_params(), config.learning_rate);
    let mut env_rngs: Vec<ChaCha8Rng> = (0..envs.len())
        .map(|e| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(e as u64);
            r
        })
        .collect();
    let mut failures = vec![0usize; n_states];

    let mut current: Vec<usize> = env_rngs.iter_mut().map(|r| r.random_range(0..n_states)).collect();
    let mut obs: Vec<Vec<f64>> = envs
        .iter_mut()
        .zip(&current)
        .map(|(env, &i)| env.reset(i))
        .collect::<Result<_>>()?;

    let first = validate_policy(&params, &mut val_envs, 0)?;
    let mut best = (params.clone(), 0usize, first.mean_return);
    let mut validation = vec![first];
    let mut log = Vec::with_capacity(config.total_updates);

    for update in 1..=config.total_updates {
        let mut buffer = RolloutBuffer::new(config.n_envs, config.n_steps, obs_dim, act_dim);
        let (mut nu_red, mut celldist) = (Vec::new(), Vec::new());
        for _ in 0..config.n_steps {
            let mut batch = DMatrix::zeros(obs_dim, envs.len());
            for (c, o) in obs.iter().enumerate() {
                batch.column_mut(c).copy_from_slice(o);
            }
            params.obs_norm.update(&batch);
            let norm = params.obs_norm.normalize(&batch);
            let out = params.evaluate(&norm);
            let (actions, log_probs) = params.sample(&out.mean, &mut rng);
            let clamped = actions.map(|a| a.clamp(-1.0, 1.0));
            let steps: Vec<EnvStep> = envs
                .par_iter_mut()
                .enumerate()
                .map(|(e, env)| {
                    let a: Vec<f64> = clamped.column(e).iter().copied().collect();
                    env.step(&a)
                })
                .collect::<Result<_>>()?;
            buffer.observations.extend_from_slice(norm.as_slice());
            buffer.actions.extend_from_slice(actions.as_slice());
            buffer.log_probs.extend(log_probs);
            buffer.values.extend(out.values);
            for (e, step) in steps.into_iter().enumerate() {
                buffer.rewards.push(step.reward);
                buffer.dones.push(step.done);
                nu_red.push(step.nu_reduction.map(|v| 100.0 * v));
                celldist.push(step.celldist);
                if step.failed {
                    failures[current[e]] += 1;
                    if failures[current[e]] >= MAX_FAILURES_PER_STATE {
                        return Err(RbcError::TrainingDiverged {
                            initial_state: envs[e].initial_state_name(current[e]),
                        });
                    }
                }
                obs[e] = if step.done {
                    current[e] = env_rngs[e].random_range(0..n_states);
                    envs[e].reset(current[e])?
                } else {
                    step.obs
                };
            }
        }
        let mut last = DMatrix::zeros(obs_dim, envs.len());
        for (c, o) in obs.iter().enumerate() {
            last.column_mut(c).copy_from_slice(o);
        }
        buffer.bootstrap_values = params.evaluate(&params.obs_norm.normalize(&last)).values;
        buffer.compute_gae(config.gamma, config.gae_lambda)?;
        let stats = ppo_update(&mut params, &mut optimizer, &buffer, config, &mut rng)?;

        let entry = UpdateLog {
            update,
            mean_reward: buffer.rewards.iter().sum::<f64>() / buffer.len() as f64,
            mean_nu_reduction: nan_mean(nu_red.into_iter()),
            mean_celldist: nan_mean(celldist.into_iter()),
            stats,
        };
        let validated = if update == 1 || update % config.eval_every == 0 || update == config.total_updates {
            let record = validate_policy(&params, &mut val_envs, update)?;
            if record.mean_return > best.2 {
                best = (params.clone(), update, record.mean_return);
            }
            validation.push(record);
            validation.last()
        } else {
            None
        };
        on_update(&entry, validated);
        log.push(entry);
    }

    Ok(TrainOutcome {
        best: best.0,
        best_update: best.1,
        final_params: params,
        log,
        validation,
    })
}

pub const TRAINING_LOG_HEADER: [&str; 9] = [
    "update",
    "mean_reward",
    "mean_nu_reduction",
    "mean_celldist",
    "policy_loss",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
];

pub fn write_training_log(path: impl AsRef<Path>, log: &[UpdateLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAINING_LOG_HEADER)?;
    for e in log {
        let s = &e.stats;
        w.write_record([
            e.update.to_string(),
            e.mean_reward.to_string(),
            e.mean_nu_reduction.to_string(),
            e.mean_celldist.to_string(),
            s.policy_loss.to_string(),
            s.value_loss.to_string(),
            s.entropy.to_string(),
            s.approx_kl.to_string(),
            s.clip_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_validation_log(path: impl AsRef<Path>, records: &[ValidationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["update", "mean_return", "mean_reward", "merged_pct"])?;
    for r in records {
        w.write_record([
            r.update.to_string(),
            r.mean_return.to_string(),
            r.mean_reward.to_string(),
            r.merged_pct().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
