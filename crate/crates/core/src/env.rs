//! Finite-horizon control environment around the solver: heater actions,
//! probe observations, Nusselt/cell-distance rewards, and checkpoint
//! management.

use crate::diagnostics::{cell_distance, find_cells, midline_uy, nusselt};
use crate::error::{RbcError, Result};
use crate::sim::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::sim::{
    chebyshev, expand_heaters, init_conduction, BottomProfile, FieldState, Operators, SimConfig,
    Solver, DOMAIN_WIDTH, N_HEATERS,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Largest heater deviation from the bottom temperature.
pub const MAX_HEATER_DEVIATION: f64 = 0.75;
pub const PROBE_ROWS: usize = 8;
pub const PROBE_COLS: usize = 48;
pub const PROBE_FIELDS: usize = 3;
pub const OBS_DIM: usize = PROBE_FIELDS * PROBE_ROWS * PROBE_COLS;

/// Heater temperatures with mean `T_b` and every entry within
/// `T_b +- 0.75`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeaterAction {
    pub temps: [f64; N_HEATERS],
}

impl HeaterAction {
    pub fn uniform(t_bottom: f64) -> Self {
        HeaterAction {
            temps: [t_bottom; N_HEATERS],
        }
    }

    /// Checks both action invariants.
    pub fn validate(&self, t_bottom: f64) -> Result<()> {
        let mean = self.temps.iter().sum::<f64>() / N_HEATERS as f64;
        if (mean - t_bottom).abs() > 1e-12 {
            return Err(RbcError::Input(format!(
                "heater mean {mean} differs from bottom temperature {t_bottom}"
            )));
        }
        let (lo, hi) = heater_bounds(t_bottom);
        if let Some(t) = self.temps.iter().find(|t| !(lo..=hi).contains(*t)) {
            return Err(RbcError::Input(format!("heater temperature {t} outside [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn to_profile(&self, nx: usize) -> BottomProfile {
        expand_heaters(&self.temps, nx)
    }
}

pub fn heater_bounds(t_bottom: f64) -> (f64, f64) {
    (t_bottom - MAX_HEATER_DEVIATION, t_bottom + MAX_HEATER_DEVIATION)
}

/// Maps raw actions in `[-1, 1]` to legal heater temperatures: remove the
/// mean, shrink uniformly so the largest deviation is at most 0.75, and
/// offset by `T_b`. Raw values marginally outside `[-1, 1]` are clamped.
pub fn transform_raw_action(raw: &[f64; N_HEATERS], t_bottom: f64) -> HeaterAction {
    let mut clamped = [0.0; N_HEATERS];
    for (c, v) in clamped.iter_mut().zip(raw) {
        *c = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    }
    constrain_heaters(&clamped, t_bottom)
}

/// Zero-mean shift, uniform shrink to the 0.75 deviation limit and offset
/// by `T_b`, applied to an unbounded per-heater signal.
pub fn constrain_heaters(signal: &[f64; N_HEATERS], t_bottom: f64) -> HeaterAction {
    let mean = signal.iter().sum::<f64>() / N_HEATERS as f64;
    let mut dev = [0.0; N_HEATERS];
    for (d, v) in dev.iter_mut().zip(signal) {
        *d = v - mean;
    }
    let max_dev = dev.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let scale = if max_dev > 0.0 {
        (MAX_HEATER_DEVIATION / max_dev).min(1.0)
    } else {
        1.0
    };
    let (lo, hi) = heater_bounds(t_bottom);
    let mut temps = [t_bottom; N_HEATERS];
    for (t, d) in temps.iter_mut().zip(&dev) {
        *t = (t_bottom + scale * d).clamp(lo, hi);
    }
    HeaterAction { temps }
}

/// Agent observation: probe grid values plus the dense midline trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// `field * 384 + row * 48 + col`, fields ordered temperature, `u_x`,
    /// `u_y`.
    pub probes: Vec<f64>,
    pub midline_uy: Vec<f64>,
}

/// Flat index of probe `(row, col)` of `field` in [`Observation::probes`].
pub fn probe_index(field: usize, row: usize, col: usize) -> usize {
    field * PROBE_ROWS * PROBE_COLS + row * PROBE_COLS + col
}

/// Inverse of [`probe_index`].
pub fn probe_position(index: usize) -> (usize, usize, usize) {
    let per_field = PROBE_ROWS * PROBE_COLS;
    (index / per_field, (index % per_field) / PROBE_COLS, index % PROBE_COLS)
}

/// Physical coordinates of the probes: 8 interior levels excluding the
/// walls and 48 columns starting at `x = 0`.
pub fn probe_coordinates() -> (Vec<f64>, Vec<f64>) {
    let xs = (0..PROBE_COLS)
        .map(|c| DOMAIN_WIDTH * c as f64 / PROBE_COLS as f64)
        .collect();
    let ys = (0..PROBE_ROWS)
        .map(|r| -1.0 + 2.0 * (r + 1) as f64 / (PROBE_ROWS + 1) as f64)
        .collect();
    (xs, ys)
}

#[derive(Clone, Debug)]
struct Bracket {
    lo: usize,
    hi: usize,
    w_hi: f64,
}

/// Bilinear interpolation stencil from the collocation grid to the probes.
#[derive(Clone, Debug)]
pub struct ProbeGrid {
    nx: usize,
    cols: Vec<Bracket>,
    rows: Vec<Bracket>,
}

impl ProbeGrid {
    pub fn new(config: &SimConfig) -> Self {
        let (xs, ys) = probe_coordinates();
        let dx = DOMAIN_WIDTH / config.nx as f64;
        let cols = xs
            .iter()
            .map(|&x| {
                let s = x / dx;
                let lo = (s.floor() as usize) % config.nx;
                Bracket {
                    lo,
                    hi: (lo + 1) % config.nx,
                    w_hi: s - s.floor(),
                }
            })
            .collect();
        let nodes = chebyshev::nodes(config.ny);
        let rows = ys
            .iter()
            .map(|&y| {
                let hi = nodes.iter().position(|&n| n >= y).unwrap_or(config.ny - 1).max(1);
                let lo = hi - 1;
                Bracket {
                    lo,
                    hi,
                    w_hi: (y - nodes[lo]) / (nodes[hi] - nodes[lo]),
                }
            })
            .collect();
        ProbeGrid {
            nx: config.nx,
            cols,
            rows,
        }
    }

    pub fn sample(&self, state: &FieldState) -> Vec<f64> {
        let mut out = vec![0.0; OBS_DIM];
        let nx = self.nx;
        for (f, field) in [&state.temp, &state.u_x, &state.u_y].into_iter().enumerate() {
            for (r, row) in self.rows.iter().enumerate() {
                for (c, col) in self.cols.iter().enumerate() {
                    let at = |j: usize, i: usize| field[j * nx + i];
                    let lower = (1.0 - col.w_hi) * at(row.lo, col.lo) + col.w_hi * at(row.lo, col.hi);
                    let upper = (1.0 - col.w_hi) * at(row.hi, col.lo) + col.w_hi * at(row.hi, col.hi);
                    out[probe_index(f, r, c)] = (1.0 - row.w_hi) * lower + row.w_hi * upper;
                }
            }
        }
        out
    }

    pub fn observe(&self, state: &FieldState) -> Observation {
        Observation {
            probes: self.sample(state),
            midline_uy: midline_uy(state),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub sim: SimConfig,
    /// Weight of the cell-merging reward term.
    pub alpha: f64,
    /// Mean uncontrolled Nusselt number used to normalize the reward.
    pub nu_base: f64,
    pub actions_per_episode: usize,
    /// Time each action is held, in free-fall units.
    pub action_duration: f64,
}

impl EnvConfig {
    pub const DEFAULT_ACTIONS_PER_EPISODE: usize = 200;
    pub const DEFAULT_ACTION_DURATION: f64 = 1.5;

    pub fn new(sim: SimConfig, alpha: f64, nu_base: f64) -> Self {
        EnvConfig {
            sim,
            alpha,
            nu_base,
            actions_per_episode: Self::DEFAULT_ACTIONS_PER_EPISODE,
            action_duration: Self::DEFAULT_ACTION_DURATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RbcError::Config(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if !(self.nu_base > 0.0) || !self.nu_base.is_finite() {
            return Err(RbcError::Config(format!("nu_base = {} must be positive", self.nu_base)));
        }
        if self.actions_per_episode == 0 {
            return Err(RbcError::Config("actions_per_episode must be positive".into()));
        }
        if !(self.action_duration > 0.0) {
            return Err(RbcError::Config("action_duration must be positive".into()));
        }
        self.sim.steps_for(self.action_duration)?;
        Ok(())
    }

    pub fn steps_per_action(&self) -> Result<usize> {
        self.sim.steps_for(self.action_duration)
    }
}

/// Uninformed reward `1 - Nu / Nu_base`.
pub fn nusselt_reward(nu: f64, nu_base: f64) -> f64 {
    1.0 - nu / nu_base
}

/// Shaped reward `(1 - alpha)(1 - Nu / Nu_base) + alpha (1 - celldist / pi)`.
pub fn shaped_reward(alpha: f64, nu: f64, nu_base: f64, celldist: f64) -> f64 {
    if alpha == 0.0 {
        return nusselt_reward(nu, nu_base);
    }
    (1.0 - alpha) * nusselt_reward(nu, nu_base) + alpha * (1.0 - celldist / PI)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub nusselt: f64,
    pub celldist: f64,
    pub cell_count: usize,
    pub done: bool,
    /// The solver diverged during this step; the episode is over.
    pub failed: bool,
}

/// One control environment. Single-threaded; independent instances can run
/// concurrently.
pub struct RbcEnv {
    config: EnvConfig,
    ops: Arc<Operators>,
    probes: ProbeGrid,
    solver: Option<Solver>,
    steps_per_action: usize,
    counter: usize,
    done: bool,
    last_observation: Option<Observation>,
}

impl RbcEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Self::with_operators(config, Arc::new(Operators::new(config.sim)?))
    }

    /// Reuses precomputed solver operators, which must match `config.sim`.
    pub fn with_operators(config: EnvConfig, ops: Arc<Operators>) -> Result<Self> {
        config.validate()?;
        if *ops.config() != config.sim {
            return Err(RbcError::Config("operators built for a different configuration".into()));
        }
        Ok(RbcEnv {
            steps_per_action: config.steps_per_action()?,
            probes: ProbeGrid::new(&config.sim),
            config,
            ops,
            solver: None,
            counter: 0,
            done: false,
            last_observation: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    pub fn actions_taken(&self) -> usize {
        self.counter
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn state(&self) -> Option<&FieldState> {
        self.solver.as_ref().map(|s| s.state())
    }

    /// Simulation time elapsed since the last reset.
    pub fn episode_time(&self) -> f64 {
        self.counter as f64 * self.config.action_duration
    }

    /// Loads a checkpoint and starts a new episode.
    pub fn reset(&mut self, checkpoint: &Checkpoint) -> Result<Observation> {
        let sim = &self.config.sim;
        if (checkpoint.ra - sim.ra).abs() > 1e-9 * sim.ra {
            return Err(RbcError::Config(format!(
                "checkpoint Ra = {} does not match environment Ra = {}",
                checkpoint.ra, sim.ra
            )));
        }
        checkpoint.state.check_grid(sim)?;
        let solver = Solver::with_operators(Arc::clone(&self.ops), &checkpoint.state)?;
        let obs = self.probes.observe(solver.state());
        self.solver = Some(solver);
        self.counter = 0;
        self.done = false;
        self.last_observation = Some(obs.clone());
        Ok(obs)
    }

    /// Applies `action` for one action duration.
    pub fn step(&mut self, action: &HeaterAction) -> Result<StepResult> {
        let t_bottom = self.config.sim.t_bottom;
        action.validate(t_bottom)?;
        if self.done {
            return Err(RbcError::Input("episode finished; call reset first".into()));
        }
        let solver = self
            .solver
            .as_mut()
            .ok_or_else(|| RbcError::Input("step called before reset".into()))?;
        let profile = action.to_profile(self.config.sim.nx);
        self.counter += 1;
        match solver.step(&profile, self.steps_per_action) {
            Ok(()) => {}
            Err(RbcError::Diverged { .. }) => {
                self.done = true;
                return Ok(StepResult {
                    observation: self.last_observation.clone().unwrap_or_else(|| Observation {
                        probes: vec![0.0; OBS_DIM],
                        midline_uy: vec![0.0; self.config.sim.nx],
                    }),
                    reward: 0.0,
                    nusselt: f64::NAN,
                    celldist: f64::NAN,
                    cell_count: 0,
                    done: true,
                    failed: true,
                });
            }
            Err(e) => return Err(e),
        }
        let state = solver.state();
        let observation = self.probes.observe(state);
        let nu = nusselt(state, &self.config.sim)?;
        let cells = find_cells(&observation.midline_uy);
        let celldist = cell_distance(&cells);
        let reward = shaped_reward(self.config.alpha, nu, self.config.nu_base, celldist);
        self.done = self.counter >= self.config.actions_per_episode;
        self.last_observation = Some(observation.clone());
        Ok(StepResult {
            observation,
            reward,
            nusselt: nu,
            celldist,
            cell_count: cells.len(),
            done: self.done,
            failed: false,
        })
    }
}

/// Perturbation amplitude used for checkpoint generation, relative to the
/// plate temperature difference.
pub const CHECKPOINT_PERTURBATION: f64 = 1e-2;
/// Default uncontrolled warm-up before a state is saved as a checkpoint.
pub const DEFAULT_WARMUP: f64 = 400.0;

/// Perturbed conduction starts (seeds `seed .. seed + count`) run
/// uncontrolled for `warmup` time units.
pub fn generate_checkpoints(
    config: &SimConfig,
    count: usize,
    warmup: f64,
    seed: u64,
) -> Result<Vec<FieldState>> {
    use rayon::prelude::*;
    if count == 0 {
        return Err(RbcError::Input("checkpoint count must be at least 1".into()));
    }
    config.validate()?;
    let ops = Arc::new(Operators::new(*config)?);
    let steps = config.steps_for_at_least(warmup);
    let bottom = BottomProfile::uniform(config.t_bottom, config.nx);
    (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed + k;
            let start = init_conduction(config, CHECKPOINT_PERTURBATION * config.delta_t(), s)?;
            if steps == 0 {
                return Ok(start);
            }
            let mut solver = Solver::with_operators(Arc::clone(&ops), &start)?;
            solver
                .step(&bottom, steps)
                .map_err(|e| RbcError::CheckpointFailed { seed: s, source: Box::new(e) })?;
            let mut state = solver.into_state();
            state.time = 0.0;
            Ok(state)
        })
        .collect()
}

/// `ra{RA}_seed{K}.ckpt`, with integral Rayleigh numbers written without a
/// fractional part.
pub fn checkpoint_file_name(ra: f64, seed: u64) -> String {
    let ra_str = if ra.fract() == 0.0 && ra.abs() < 1e15 {
        format!("{}", ra as i64)
    } else {
        format!("{ra}")
    };
    format!("ra{ra_str}_seed{seed}.ckpt")
}

/// Writes checkpoint `k` as seed `first_seed + k` into `dir`.
pub fn save_checkpoints(
    dir: impl AsRef<Path>,
    config: &SimConfig,
    states: &[FieldState],
    first_seed: u64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.as_ref())?;
    states
        .iter()
        .enumerate()
        .map(|(k, state)| {
            let path = dir.as_ref().join(checkpoint_file_name(config.ra, first_seed + k as u64));
            write_checkpoint(&path, config.ra, config.pr, state)?;
            Ok(path)
        })
        .collect()
}

/// Loads all checkpoints for `ra` from `dir`, ordered by seed.
pub fn load_checkpoints(dir: impl AsRef<Path>, ra: f64) -> Result<Vec<(u64, Checkpoint)>> {
    let prefix = checkpoint_file_name(ra, 0);
    let prefix = &prefix[..prefix.find("_seed").unwrap() + "_seed".len()];
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(rest) = name.strip_prefix(prefix) else { continue };
        let Some(seed) = rest.strip_suffix(".ckpt").and_then(|s| s.parse::<u64>().ok()) else {
            continue;
        };
        found.push((seed, read_checkpoint(&path)?));
    }
    found.sort_by_key(|(seed, _)| *seed);
    if found.is_empty() {
        return Err(RbcError::Config(format!(
            "no checkpoints for Ra = {ra} in {}",
            dir.as_ref().display()
        )));
    }
    Ok(found)
}

pub const TRAIN_COUNT: usize = 20;
pub const VAL_COUNT: usize = 5;
pub const TEST_COUNT: usize = 12;
pub const CHECKPOINTS_PER_RA: usize = TRAIN_COUNT + VAL_COUNT + TEST_COUNT;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointSplit<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded partition of exactly 37 initial conditions into 20/5/12.
pub fn split_checkpoints<T: Clone>(items: &[T], seed: u64) -> Result<CheckpointSplit<T>> {
    if items.len() != CHECKPOINTS_PER_RA {
        return Err(RbcError::Config(format!(
            "expected {CHECKPOINTS_PER_RA} checkpoints to split, got {}",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(CheckpointSplit {
        train: pick(&order[..TRAIN_COUNT]),
        val: pick(&order[TRAIN_COUNT..TRAIN_COUNT + VAL_COUNT]),
        test: pick(&order[TRAIN_COUNT + VAL_COUNT..]),
    })
}

/// Flat key-value run configuration (TOML syntax).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ra: f64,
    pub pr: f64,
    pub nx: usize,
    pub ny: usize,
    /// Solver time step; the Rayleigh-dependent default when absent.
    pub dt: Option<f64>,
    pub alpha: f64,
    /// Reward normalizer; read from the baseline table when absent.
    pub nu_base: Option<f64>,
    pub actions_per_episode: usize,
    pub action_duration: f64,
    pub seed: u64,
    pub kp: f64,
    pub kd: f64,
    /// PPO settings, given as a `[ppo]` table.
    pub ppo: crate::rl::PpoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            ra: 1e4,
            pr: SimConfig::DEFAULT_PR,
            nx: 96,
            ny: 64,
            dt: None,
            alpha: 0.0,
            nu_base: None,
            actions_per_episode: EnvConfig::DEFAULT_ACTIONS_PER_EPISODE,
            action_duration: EnvConfig::DEFAULT_ACTION_DURATION,
            seed: 0,
            kp: crate::controllers::DEFAULT_KP,
            kd: crate::controllers::DEFAULT_KD,
            ppo: crate::rl::PpoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RbcError::Format(format!("run configuration: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat configuration serializes")
    }

    pub fn sim_config(&self) -> SimConfig {
        let mut sim = SimConfig::new(self.ra, self.nx, self.ny);
        sim.pr = self.pr;
        if let Some(dt) = self.dt {
            sim.dt = dt;
        }
        sim
    }

    pub fn env_config(&self, nu_base: f64) -> EnvConfig {
        EnvConfig {
            sim: self.sim_config(),
            alpha: self.alpha,
            nu_base: self.nu_base.unwrap_or(nu_base),
            actions_per_episode: self.actions_per_episode,
            action_duration: self.action_duration,
        }
    }
}
