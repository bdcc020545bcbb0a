//! A perturbed layer below the onset of convection relaxes back to pure
//! conduction: kinetic energy decays and the temperature returns to the
//! linear profile.

use rbc_control::sim::{init_conduction, BottomProfile, SimConfig, Solver};

fn main() -> rbc_control::Result<()> {
    let config = SimConfig::new(1e3, 48, 32);
    let start = init_conduction(&config, 0.05, 7)?;
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mut solver = Solver::new(config, &start)?;

    println!("{:>6}  {:>12}  {:>14}", "time", "kinetic", "max |T - T_c|");
    for _ in 0..10 {
        solver.step(&bottom, config.steps_for(20.0)?)?;
        let state = solver.state();
        let deviation = config
            .y_coords()
            .iter()
            .enumerate()
            .flat_map(|(j, &y)| {
                let row = &state.temp[j * config.nx..(j + 1) * config.nx];
                row.iter().map(move |t| (t - config.conduction_temperature(y)).abs())
            })
            .fold(0.0, f64::max);
        println!("{:6.1}  {:12.3e}  {:14.3e}", state.time, state.kinetic_energy(), deviation);
    }
    Ok(())
}
