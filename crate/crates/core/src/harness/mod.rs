//! Experiment pipeline: episode rollouts, evaluation statistics, cross-regime
//! transfer and CSV/SVG outputs.

pub mod layout;
pub mod plot;
mod record;

pub use record::EpisodeRecord;

use crate::controllers::Controller;
use crate::diagnostics::{persistent_merge_index, BaselineTable};
use crate::env::{transform_raw_action, EnvConfig, HeaterAction, Observation, RbcEnv};
use crate::error::{RbcError, Result};
use crate::rl::{sample_action, PolicyParams};
use crate::sim::checkpoint::Checkpoint;
use crate::sim::{Operators, SimConfig, N_HEATERS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;
use std::sync::Arc;

/// Seed of the fixed train/validation/test partition.
pub const SPLIT_SEED: u64 = 0;
/// Number of final actions over which Nusselt fluctuations are measured.
pub const LAST_ACTIONS_WINDOW: usize = 40;

/// Deterministic policy wrapped as a controller.
#[derive(Clone, Debug)]
pub struct PolicyController {
    pub params: PolicyParams,
    pub t_bottom: f64,
    pub name: String,
}

impl PolicyController {
    pub fn new(params: PolicyParams, t_bottom: f64) -> Self {
        PolicyController {
            params,
            t_bottom,
            name: "ppo".into(),
        }
    }
}

impl Controller for PolicyController {
    fn id(&self) -> &str {
        &self.name
    }

    fn reset(&mut self) {}

    fn act(&mut self, obs: &Observation) -> Result<HeaterAction> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let (raw, _) = sample_action(&self.params, &obs.probes, &mut unused, true)?;
        let raw: [f64; N_HEATERS] = raw
            .try_into()
            .map_err(|_| RbcError::Config("policy action size is not 12".into()))?;
        Ok(transform_raw_action(&raw, self.t_bottom))
    }
}

/// Full episode from `checkpoint` under `controller`. Divergence ends the
/// episode early with the `diverged` flag set.
pub fn run_episode(
    controller: &mut dyn Controller,
    env: &mut RbcEnv,
    checkpoint: &Checkpoint,
    checkpoint_id: &str,
) -> Result<EpisodeRecord> {
    controller.reset();
    let mut obs = env.reset(checkpoint)?;
    let config = *env.config();
    let mut record = EpisodeRecord::new(config.sim.ra, config.alpha, controller.id(), checkpoint_id);
    loop {
        let action = controller.act(&obs)?;
        let step = env.step(&action)?;
        if step.failed {
            record.diverged = true;
            break;
        }
        record.push(
            env.episode_time(),
            step.nusselt,
            step.celldist,
            step.reward,
            step.cell_count,
            action.temps,
        );
        obs = step.observation;
        if step.done {
            break;
        }
    }
    Ok(record)
}

/// Runs one episode per checkpoint concurrently, each with its own copy of
/// the controller.
pub fn evaluate<C: Controller + Clone + Send + Sync>(
    controller: &C,
    config: EnvConfig,
    checkpoints: &[(String, Checkpoint)],
) -> Result<Vec<EpisodeRecord>> {
    config.validate()?;
    let ops = Arc::new(Operators::new(config.sim)?);
    checkpoints
        .par_iter()
        .map(|(id, ckpt)| {
            let mut env = RbcEnv::with_operators(config, Arc::clone(&ops))?;
            let mut c = controller.clone();
            run_episode(&mut c, &mut env, ckpt, id)
        })
        .collect()
}

/// Time of the first step from which a single cell persists to the end of
/// the episode.
pub fn detect_merge_event(record: &EpisodeRecord) -> Option<f64> {
    if record.diverged {
        return None;
    }
    persistent_merge_index(&record.cell_count).map(|k| record.time[k])
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub ra: f64,
    pub alpha: f64,
    pub controller: String,
    pub n_episodes: usize,
    /// Mean over episodes of `100 (1 - <Nu> / Nu_base)`.
    pub nu_reduction_mean: f64,
    /// Population standard deviation of the same per-episode quantity.
    pub nu_reduction_std: f64,
    pub merged_pct: f64,
    pub nu_std_last40: f64,
    /// Mean merge time over merged episodes; absent when none merged.
    pub merge_time: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Percentage reduction of the episode-mean Nusselt number.
pub fn nu_reduction_pct(record: &EpisodeRecord, nu_base: f64) -> f64 {
    100.0 * (1.0 - mean(&record.nusselt) / nu_base)
}

/// Standard deviation of the Nusselt number over the final actions.
pub fn nu_std_last(record: &EpisodeRecord, window: usize) -> f64 {
    let n = record.nusselt.len();
    population_std(&record.nusselt[n.saturating_sub(window)..])
}

pub fn summarize(records: &[EpisodeRecord], baseline: &BaselineTable) -> Result<EvalSummary> {
    let first = records
        .first()
        .ok_or_else(|| RbcError::Input("no episode records to summarize".into()))?;
    if let Some(r) = records.iter().find(|r| r.ra != first.ra) {
        return Err(RbcError::Input(format!(
            "records mix Rayleigh numbers {} and {}",
            first.ra, r.ra
        )));
    }
    if let Some(r) = records.iter().find(|r| r.is_empty()) {
        return Err(RbcError::Input(format!("episode {} has no steps", r.checkpoint)));
    }
    let nu_base = baseline.require(first.ra)?;
    let reductions: Vec<f64> = records.iter().map(|r| nu_reduction_pct(r, nu_base)).collect();
    let stds: Vec<f64> = records.iter().map(|r| nu_std_last(r, LAST_ACTIONS_WINDOW)).collect();
    let merges: Vec<f64> = records.iter().filter_map(detect_merge_event).collect();
    Ok(EvalSummary {
        ra: first.ra,
        alpha: first.alpha,
        controller: first.controller.clone(),
        n_episodes: records.len(),
        nu_reduction_mean: mean(&reductions),
        nu_reduction_std: population_std(&reductions),
        merged_pct: 100.0 * merges.len() as f64 / records.len() as f64,
        nu_std_last40: mean(&stds),
        merge_time: (!merges.is_empty()).then(|| mean(&merges)),
    })
}

/// One transfer target: environment settings (with the target's `Nu_base`)
/// and its test checkpoints.
pub struct TransferTarget {
    pub config: EnvConfig,
    pub checkpoints: Vec<(String, Checkpoint)>,
}

/// Evaluates a frozen policy trained on `source` on each target regime.
pub fn experiment_generalize(
    policy: &PolicyParams,
    source: &SimConfig,
    targets: &[TransferTarget],
    baseline: &BaselineTable,
) -> Result<Vec<EvalSummary>> {
    targets
        .iter()
        .map(|target| {
            let sim = &target.config.sim;
            if sim.nx != source.nx || sim.ny != source.ny {
                return Err(RbcError::Config(format!(
                    "target grid {}x{} differs from source grid {}x{}",
                    sim.nx, sim.ny, source.nx, source.ny
                )));
            }
            let controller = PolicyController::new(policy.clone(), sim.t_bottom);
            let records = evaluate(&controller, target.config, &target.checkpoints)?;
            summarize(&records, baseline)
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "ra",
    "alpha",
    "controller",
    "n_episodes",
    "nu_reduction_mean",
    "nu_reduction_std",
    "merged_pct",
    "nu_std_last40",
    "merge_time",
];

fn summary_row(s: &EvalSummary) -> Vec<String> {
    vec![
        s.ra.to_string(),
        s.alpha.to_string(),
        s.controller.clone(),
        s.n_episodes.to_string(),
        s.nu_reduction_mean.to_string(),
        s.nu_reduction_std.to_string(),
        s.merged_pct.to_string(),
        s.nu_std_last40.to_string(),
        s.merge_time.map(|t| t.to_string()).unwrap_or_default(),
    ]
}

pub fn read_summaries(path: impl AsRef<Path>) -> Result<Vec<EvalSummary>> {
    let mut r = csv::Reader::from_path(path)?;
    let parse = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| RbcError::Format(format!("bad number '{s}' in summary")))
    };
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        if row.len() != SUMMARY_HEADER.len() {
            return Err(RbcError::Format("summary row has wrong width".into()));
        }
        out.push(EvalSummary {
            ra: parse(&row[0])?,
            alpha: parse(&row[1])?,
            controller: row[2].to_string(),
            n_episodes: row[3]
                .parse()
                .map_err(|_| RbcError::Format(format!("bad episode count '{}'", &row[3])))?,
            nu_reduction_mean: parse(&row[4])?,
            nu_reduction_std: parse(&row[5])?,
            merged_pct: parse(&row[6])?,
            nu_std_last40: parse(&row[7])?,
            merge_time: if row[8].is_empty() { None } else { Some(parse(&row[8])?) },
        });
    }
    Ok(out)
}

/// Adds or replaces rows keyed by (Ra, alpha, controller).
pub fn upsert_summaries(path: impl AsRef<Path>, new: &[EvalSummary]) -> Result<()> {
    let path = path.as_ref();
    let mut rows = if path.exists() { read_summaries(path)? } else { Vec::new() };
    for s in new {
        rows.retain(|r| !(r.ra == s.ra && r.alpha == s.alpha && r.controller == s.controller));
        rows.push(s.clone());
    }
    rows.sort_by(|a, b| {
        a.ra.total_cmp(&b.ra)
            .then(a.controller.cmp(&b.controller))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in &rows {
        w.write_record(summary_row(r))?;
    }
    w.flush()?;
    Ok(())
}
