//! From a raw agent action to the imposed bottom-wall temperature, and the
//! effect of holding one heater pattern on the flow.

use rbc_control::env::{generate_checkpoints, transform_raw_action, EnvConfig, RbcEnv};
use rbc_control::sim::checkpoint::Checkpoint;
use rbc_control::sim::SimConfig;

fn main() -> rbc_control::Result<()> {
    let config = SimConfig::new(1e4, 48, 32);
    let raw = [1.0, 1.0, 1.0, 0.2, -0.5, -1.0, -1.0, -1.0, -0.5, 0.2, 0.6, 0.9];
    let action = transform_raw_action(&raw, config.t_bottom);
    action.validate(config.t_bottom)?;
    println!("raw      {raw:?}");
    println!("heaters  {:?}", action.temps.map(|t| (t * 1000.0).round() / 1000.0));
    println!("mean     {:.15}", action.temps.iter().sum::<f64>() / 12.0);

    let profile = action.to_profile(config.nx);
    println!("bottom wall samples every 8 columns: {:?}", profile.values.iter().step_by(8).collect::<Vec<_>>());

    let state = generate_checkpoints(&config, 1, 150.0, 0)?.remove(0);
    let mut env = RbcEnv::new(EnvConfig::new(config, 0.0, 1.68))?;
    env.reset(&Checkpoint { ra: config.ra, pr: config.pr, state })?;
    for k in 0..20 {
        let r = env.step(&action)?;
        if k % 4 == 3 {
            println!("t = {:4.1}  Nu = {:.4}  reward = {:+.4}  cells = {}", env.episode_time(), r.nusselt, r.reward, r.cell_count);
        }
    }
    Ok(())
}
