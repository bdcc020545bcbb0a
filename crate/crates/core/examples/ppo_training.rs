//! A short PPO run on a coarse grid with the shaped reward, followed by
//! saving and reloading the selected policy.

use rbc_control::diagnostics::measure_baseline;
use rbc_control::env::{generate_checkpoints, EnvConfig};
use rbc_control::rl::{self, load_policy, save_policy, PpoConfig};
use rbc_control::sim::checkpoint::Checkpoint;
use rbc_control::sim::SimConfig;

fn main() -> rbc_control::Result<()> {
    let sim = SimConfig::new(1e4, 32, 24);
    let states = generate_checkpoints(&sim, 6, 150.0, 0)?;
    let nu_base = measure_baseline(&sim, &states, 60.0)?;
    let checkpoints: Vec<(String, Checkpoint)> = states
        .into_iter()
        .enumerate()
        .map(|(k, state)| (format!("c{k}"), Checkpoint { ra: sim.ra, pr: sim.pr, state }))
        .collect();
    let mut env = EnvConfig::new(sim, 0.25, nu_base);
    env.actions_per_episode = 40;

    let config = PpoConfig {
        n_envs: 2,
        n_steps: 40,
        minibatch_size: 40,
        total_updates: 6,
        eval_every: 2,
        hidden: vec![64, 64],
        ..PpoConfig::default()
    };
    let train_envs = rl::rbc_envs(env, checkpoints[..4].to_vec(), config.n_envs)?;
    let val_envs = rl::rbc_envs(env, checkpoints[4..].to_vec(), 1)?;
    let outcome = rl::train(train_envs, val_envs, &config, 0, |log, val| {
        print!("update {}: rollout reward {:+.4}, Nu reduction {:+.2} %", log.update, log.mean_reward, log.mean_nu_reduction);
        match val {
            Some(v) => println!(", validation reward {:+.4}, merged {:.0} %", v.mean_reward, v.merged_pct()),
            None => println!(),
        }
    })?;

    let path = std::env::temp_dir().join("rbc-example-policy.bin");
    save_policy(&path, &outcome.best, &config)?;
    let (reloaded, _) = load_policy(&path)?;
    assert_eq!(reloaded.flatten(), outcome.best.flatten());
    println!("policy from update {} saved to {}", outcome.best_update, path.display());
    Ok(())
}
