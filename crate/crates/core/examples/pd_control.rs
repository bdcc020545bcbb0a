//! Proportional-derivative control of the heaters from the midline
//! velocity, compared with leaving the heaters uniform.

use rbc_control::controllers::{NullController, PdController, DEFAULT_KD, DEFAULT_KP};
use rbc_control::diagnostics::{measure_baseline, BaselineTable};
use rbc_control::env::{generate_checkpoints, EnvConfig};
use rbc_control::harness::{evaluate, summarize};
use rbc_control::sim::checkpoint::Checkpoint;
use rbc_control::sim::SimConfig;

fn main() -> rbc_control::Result<()> {
    let sim = SimConfig::new(1e4, 48, 32);
    let states = generate_checkpoints(&sim, 2, 200.0, 0)?;
    let mut env = EnvConfig::new(sim, 0.0, 1.0);
    env.actions_per_episode = 80;
    let horizon = env.actions_per_episode as f64 * env.action_duration;
    env.nu_base = measure_baseline(&sim, &states, horizon)?;
    let mut baseline = BaselineTable::new();
    baseline.insert(sim.ra, env.nu_base)?;

    let checkpoints: Vec<(String, Checkpoint)> = states
        .into_iter()
        .enumerate()
        .map(|(k, state)| (format!("c{k}"), Checkpoint { ra: sim.ra, pr: sim.pr, state }))
        .collect();
    let null = evaluate(&NullController { t_bottom: sim.t_bottom }, env, &checkpoints)?;
    let pd = PdController::new(DEFAULT_KP, DEFAULT_KD, env.action_duration, sim.t_bottom, sim.nx)?;
    let controlled = evaluate(&pd, env, &checkpoints)?;

    for records in [&null, &controlled] {
        let s = summarize(records, &baseline)?;
        println!(
            "{:>4}: Nu reduction {:6.2} %  merged {:3.0} %  final Nu {:.4}",
            s.controller,
            s.nu_reduction_mean,
            s.merged_pct,
            records[0].nusselt.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
