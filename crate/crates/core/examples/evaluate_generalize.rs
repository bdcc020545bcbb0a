//! Evaluating a frozen policy on held-out initial conditions, transferring
//! it to a different Rayleigh number and writing CSV and SVG outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rbc_control::diagnostics::{measure_baseline, BaselineTable};
use rbc_control::env::{generate_checkpoints, EnvConfig, OBS_DIM};
use rbc_control::harness::{evaluate, experiment_generalize, plot, summarize, upsert_summaries, PolicyController, TransferTarget};
use rbc_control::rl::{PolicyParams, PpoConfig};
use rbc_control::sim::checkpoint::Checkpoint;
use rbc_control::sim::{SimConfig, N_HEATERS};

fn setup(ra: f64, table: &mut BaselineTable) -> rbc_control::Result<(EnvConfig, Vec<(String, Checkpoint)>)> {
    let sim = SimConfig::new(ra, 32, 24);
    let states = generate_checkpoints(&sim, 2, 100.0, 0)?;
    let mut env = EnvConfig::new(sim, 0.25, 1.0);
    env.actions_per_episode = 30;
    env.nu_base = measure_baseline(&sim, &states, env.actions_per_episode as f64 * env.action_duration)?;
    table.insert(ra, env.nu_base)?;
    let named = states
        .into_iter()
        .enumerate()
        .map(|(k, state)| (format!("ra{ra}_c{k}"), Checkpoint { ra, pr: sim.pr, state }))
        .collect();
    Ok((env, named))
}

fn main() -> rbc_control::Result<()> {
    let mut table = BaselineTable::new();
    let (source, source_ckpts) = setup(1e4, &mut table)?;
    let (target, target_ckpts) = setup(1e5, &mut table)?;

    // an untrained policy stands in for one produced by `rbc train`
    let policy = PolicyParams::new(OBS_DIM, N_HEATERS, &PpoConfig::default(), &mut ChaCha8Rng::seed_from_u64(1));
    let records = evaluate(&PolicyController::new(policy.clone(), source.sim.t_bottom), source, &source_ckpts)?;
    let summary = summarize(&records, &table)?;
    println!("{summary:?}");

    let transfer = experiment_generalize(
        &policy,
        &source.sim,
        &[TransferTarget { config: target, checkpoints: target_ckpts }],
        &table,
    )?;
    println!("{:?}", transfer[0]);

    let out = std::env::temp_dir().join("rbc-example-eval");
    std::fs::create_dir_all(&out)?;
    for r in &records {
        r.save(out.join(format!("{}.csv", r.file_stem())))?;
    }
    let mut all = vec![summary];
    all.extend(transfer);
    upsert_summaries(out.join("summary.csv"), &all)?;
    plot::plot_episodes(out.join("nusselt.svg"), "policy at Ra 1e4", &records)?;
    plot::plot_summaries(out.join("summary.svg"), &all)?;
    println!("outputs in {}", out.display());
    Ok(())
}
