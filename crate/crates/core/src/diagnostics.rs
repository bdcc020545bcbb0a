//! Flow measurements: conduction profile, convective flux, Nusselt number,
//! convection-cell detection on the midline and the cell distance.

use crate::error::{RbcError, Result};
use crate::sim::{chebyshev, BottomProfile, FieldState, SimConfig, Solver, DOMAIN_HEIGHT, DOMAIN_WIDTH};
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

/// Linear conduction profile `T_b - (y / H)(T_b - T_t)` evaluated literally
/// at the collocation coordinate `y` in `[-1, 1]`.
///
/// The formula measures `y` from the heated plate; on the centred grid it is
/// offset from the wall values by half the temperature difference. Use
/// [`SimConfig::conduction_temperature`] for the state the solver relaxes to.
pub fn conduction_profile(config: &SimConfig, y: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&y) {
        return Err(RbcError::Domain(format!("y = {y} outside [-1, 1]")));
    }
    Ok(config.t_bottom - y / DOMAIN_HEIGHT * (config.t_bottom - config.t_top))
}

/// Area-weighted average: uniform in `x`, Clenshaw–Curtis in `y`.
pub fn field_mean(nx: usize, ny: usize, field: &[f64]) -> f64 {
    let w = chebyshev::clenshaw_curtis_weights(ny);
    (0..ny)
        .map(|j| w[j] * field[j * nx..(j + 1) * nx].iter().sum::<f64>() / nx as f64)
        .sum::<f64>()
        / 2.0
}

/// Local vertical convective flux `u_y (T - <T>)`.
pub fn convective_flux(state: &FieldState) -> Vec<f64> {
    let mean = field_mean(state.nx, state.ny, &state.temp);
    state
        .u_y
        .iter()
        .zip(&state.temp)
        .map(|(v, t)| v * (t - mean))
        .collect()
}

/// Convective Nusselt number `<q> / (kappa (T_b - T_t) / H)`; zero for pure
/// conduction.
pub fn nusselt(state: &FieldState, config: &SimConfig) -> Result<f64> {
    let delta = config.t_bottom - config.t_top;
    if delta == 0.0 {
        return Err(RbcError::DivisionByZero(
            "bottom and top temperatures are equal".into(),
        ));
    }
    let q = convective_flux(state);
    let conductive = config.diffusivity() * delta / DOMAIN_HEIGHT;
    Ok(field_mean(state.nx, state.ny, &q) / conductive)
}

/// Vertical velocity along `y = 0`, interpolated with the wall-normal
/// collocation polynomial.
pub fn midline_uy(state: &FieldState) -> Vec<f64> {
    let y = chebyshev::nodes(state.ny);
    let row = chebyshev::interpolation_row(&y, 0.0);
    (0..state.nx)
        .map(|i| {
            row.iter()
                .enumerate()
                .map(|(j, w)| w * state.u_y[j * state.nx + i])
                .sum()
        })
        .collect()
}

/// Horizontal positions of detected convection cells, ascending in `[0, 2pi)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CellSet {
    pub positions: Vec<f64>,
}

impl CellSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Strictly positive local maxima of a periodic signal. A plateau counts once,
/// at its leftmost point.
pub fn find_cells(midline_uy: &[f64]) -> CellSet {
    let n = midline_uy.len();
    let mut positions = Vec::new();
    if n < 3 {
        return CellSet { positions };
    }
    for i in 0..n {
        let v = midline_uy[i];
        if !(v > 0.0) || !(midline_uy[(i + n - 1) % n] < v) {
            continue;
        }
        let mut j = (i + 1) % n;
        while j != i && midline_uy[j] == v {
            j = (j + 1) % n;
        }
        if j != i && midline_uy[j] < v {
            positions.push(DOMAIN_WIDTH * i as f64 / n as f64);
        }
    }
    CellSet { positions }
}

fn periodic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(DOMAIN_WIDTH - d)
}

/// Largest pairwise periodic distance between cells; 0 for fewer than two.
pub fn cell_distance(cells: &CellSet) -> f64 {
    let p = &cells.positions;
    let mut best: f64 = 0.0;
    for i in 0..p.len() {
        for j in (i + 1)..p.len() {
            best = best.max(periodic_distance(p[i], p[j]));
        }
    }
    best.min(PI)
}

/// First index from which the cell count is 1 through the end of the
/// series.
pub fn persistent_merge_index(cell_counts: &[usize]) -> Option<usize> {
    let ones = cell_counts.iter().rev().take_while(|&&c| c == 1).count();
    (ones > 0).then(|| cell_counts.len() - ones)
}

/// Mean uncontrolled Nusselt number per Rayleigh number.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineTable {
    entries: Vec<(f64, f64)>,
}

fn same_ra(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

impl BaselineTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ra: f64, nu_base: f64) -> Result<()> {
        if !(nu_base > 0.0) || !nu_base.is_finite() {
            return Err(RbcError::Input(format!(
                "baseline Nusselt number must be positive, got {nu_base} at Ra = {ra}"
            )));
        }
        match self.entries.iter_mut().find(|(r, _)| same_ra(*r, ra)) {
            Some(entry) => entry.1 = nu_base,
            None => self.entries.push((ra, nu_base)),
        }
        self.entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(())
    }

    pub fn get(&self, ra: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|(r, _)| same_ra(*r, ra))
            .map(|&(_, nu)| nu)
    }

    pub fn require(&self, ra: f64) -> Result<f64> {
        self.get(ra)
            .ok_or_else(|| RbcError::Config(format!("no baseline Nusselt number for Ra = {ra}")))
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// `true` when `Nu_base` never decreases with `Ra`.
    pub fn is_monotone(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    pub fn write(&self, mut out: impl Write) -> Result<()> {
        for (ra, nu) in &self.entries {
            writeln!(out, "{ra} {nu}")?;
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut table = BaselineTable::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.parse().ok()).ok_or_else(|| {
                    RbcError::Format(format!("baseline line {}: expected `Ra Nu_base`", lineno + 1))
                })
            };
            let mut parts = line.split_whitespace();
            let ra = parse(parts.next())?;
            let nu = parse(parts.next())?;
            table.insert(ra, nu)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Spacing of Nusselt samples when time-averaging uncontrolled runs.
pub const BASELINE_SAMPLE_INTERVAL: f64 = 0.5;

/// Time-averaged Nusselt number of one uncontrolled run, sampled at `t = 0`
/// and then every [`BASELINE_SAMPLE_INTERVAL`] up to `horizon`.
pub fn uncontrolled_mean_nusselt(config: &SimConfig, start: &FieldState, horizon: f64) -> Result<f64> {
    let total = config.steps_for_at_least(horizon);
    let mut samples = vec![nusselt(start, config)?];
    if total == 0 {
        return Ok(samples[0]);
    }
    let chunk = ((BASELINE_SAMPLE_INTERVAL / config.dt).round() as usize).max(1);
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    let mut solver = Solver::new(*config, start)?;
    let mut done = 0;
    while done < total {
        let n = chunk.min(total - done);
        solver.step(&bottom, n)?;
        done += n;
        samples.push(nusselt(solver.state(), config)?);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Baseline `Nu_base(Ra)`: uncontrolled runs from every checkpoint, averaged
/// over time and checkpoints.
pub fn measure_baseline(config: &SimConfig, checkpoints: &[FieldState], horizon: f64) -> Result<f64> {
    if checkpoints.is_empty() {
        return Err(RbcError::Input("baseline needs at least one checkpoint".into()));
    }
    use rayon::prelude::*;
    let means: Vec<f64> = checkpoints
        .par_iter()
        .map(|state| uncontrolled_mean_nusselt(config, state, horizon))
        .collect::<Result<_>>()?;
    Ok(means.iter().sum::<f64>() / means.len() as f64)
}
