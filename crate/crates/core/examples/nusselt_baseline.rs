//! Onset of convection at Ra = 1e4 and the time-averaged Nusselt number of
//! the resulting steady rolls.

use rbc_control::diagnostics::{find_cells, measure_baseline, midline_uy, nusselt};
use rbc_control::env::generate_checkpoints;
use rbc_control::sim::{init_conduction, BottomProfile, SimConfig, Solver};

fn main() -> rbc_control::Result<()> {
    let config = SimConfig::new(1e4, 48, 32);
    let start = init_conduction(&config, 0.02, 1)?;
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mut solver = Solver::new(config, &start)?;
    for _ in 0..12 {
        solver.step(&bottom, config.steps_for(10.0)?)?;
        let state = solver.state();
        let cells = find_cells(&midline_uy(state));
        println!("t = {:5.1}  Nu = {:.4}  cells = {}", state.time, nusselt(state, &config)?, cells.len());
    }

    let checkpoints = generate_checkpoints(&config, 2, 150.0, 0)?;
    let nu_base = measure_baseline(&config, &checkpoints, 100.0)?;
    println!("baseline over 2 warmed-up states and 100 time units: Nu_base = {nu_base:.4}");
    Ok(())
}
