//! Generating warmed-up initial conditions, storing them and splitting a
//! full set into training, validation and test groups.

use rbc_control::env::{generate_checkpoints, load_checkpoints, save_checkpoints, split_checkpoints, CHECKPOINTS_PER_RA};
use rbc_control::harness::SPLIT_SEED;
use rbc_control::sim::SimConfig;

fn main() -> rbc_control::Result<()> {
    let config = SimConfig::new(1e4, 32, 24);
    let dir = std::env::temp_dir().join("rbc-checkpoints-example");
    let states = generate_checkpoints(&config, 4, 50.0, 0)?;
    let paths = save_checkpoints(&dir, &config, &states, 0)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    let loaded = load_checkpoints(&dir, config.ra)?;
    for (seed, ckpt) in &loaded {
        println!("seed {seed}: Ra = {}, grid {}x{}, kinetic energy {:.3}", ckpt.ra, ckpt.state.nx, ckpt.state.ny, ckpt.state.kinetic_energy());
    }

    let names: Vec<String> = (0..CHECKPOINTS_PER_RA).map(|k| format!("seed{k}")).collect();
    let split = split_checkpoints(&names, SPLIT_SEED)?;
    println!("test split of {} checkpoints: {:?}", CHECKPOINTS_PER_RA, split.test);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
