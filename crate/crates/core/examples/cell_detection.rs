//! Locating convection cells as peaks of the mid-height vertical velocity,
//! and the periodic cell distance used in the shaped reward.

use rbc_control::diagnostics::{cell_distance, find_cells, midline_uy, CellSet};
use rbc_control::env::generate_checkpoints;
use rbc_control::sim::SimConfig;

fn main() -> rbc_control::Result<()> {
    let two = CellSet { positions: vec![0.5, 6.0] };
    println!("cells at 0.5 and 6.0 are {:.4} apart across the periodic boundary", cell_distance(&two));

    for ra in [1e4, 1e5] {
        let config = SimConfig::new(ra, 48, 32);
        let state = generate_checkpoints(&config, 1, 150.0, 2)?.remove(0);
        let midline = midline_uy(&state);
        let cells = find_cells(&midline);
        let peaks: Vec<String> = cells.positions.iter().map(|x| format!("{x:.3}")).collect();
        println!(
            "Ra = {ra:e}: {} cells at x = [{}], celldist = {:.4}",
            cells.len(),
            peaks.join(", "),
            cell_distance(&cells)
        );
    }
    Ok(())
}
