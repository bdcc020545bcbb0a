//! Non-learning baselines: the midline PD controller and the uncontrolled
//! (uniform heater) controller.

use crate::env::{constrain_heaters, HeaterAction, Observation};
use crate::error::{RbcError, Result};
use crate::sim::{heater_of, N_HEATERS};

pub const DEFAULT_KP: f64 = -970.0;
pub const DEFAULT_KD: f64 = -2000.0;

/// Anything that maps observations to heater settings during an episode.
pub trait Controller {
    /// Short identifier used in output file names and summaries.
    fn id(&self) -> &str;

    /// Clears per-episode memory.
    fn reset(&mut self);

    fn act(&mut self, obs: &Observation) -> Result<HeaterAction>;
}

/// Keeps every heater at `T_b`.
pub fn null_control(t_bottom: f64) -> HeaterAction {
    HeaterAction::uniform(t_bottom)
}

#[derive(Clone, Debug)]
pub struct NullController {
    pub t_bottom: f64,
}

impl Controller for NullController {
    fn id(&self) -> &str {
        "null"
    }

    fn reset(&mut self) {}

    fn act(&mut self, _obs: &Observation) -> Result<HeaterAction> {
        Ok(null_control(self.t_bottom))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdState {
    pub k_p: f64,
    pub k_d: f64,
    /// Midline error from the previous call, absent right after a reset.
    pub prev_error: Option<Vec<f64>>,
    /// Time between two controller calls.
    pub control_dt: f64,
}

impl PdState {
    pub fn new(k_p: f64, k_d: f64, control_dt: f64) -> Result<Self> {
        if !(control_dt > 0.0) {
            return Err(RbcError::Config(format!("control_dt = {control_dt} must be positive")));
        }
        Ok(PdState {
            k_p,
            k_d,
            prev_error: None,
            control_dt,
        })
    }

    pub fn reset(&mut self) {
        self.prev_error = None;
    }
}

/// Averages a grid signal over the points belonging to each heater.
pub fn heater_averages(signal: &[f64]) -> [f64; N_HEATERS] {
    let nx = signal.len();
    let mut sums = [0.0; N_HEATERS];
    let mut counts = [0usize; N_HEATERS];
    for (i, v) in signal.iter().enumerate() {
        let h = heater_of(i, nx);
        sums[h] += v;
        counts[h] += 1;
    }
    for (s, c) in sums.iter_mut().zip(counts) {
        *s /= c.max(1) as f64;
    }
    sums
}

/// One PD step on the midline vertical velocity. The derivative is a
/// backward difference over one control interval and is zero on the first
/// call after a reset.
pub fn pd_control(pd: &PdState, midline_uy: &[f64], t_bottom: f64) -> Result<(HeaterAction, PdState)> {
    if midline_uy.is_empty() {
        return Err(RbcError::Config("empty midline signal".into()));
    }
    if let Some(prev) = &pd.prev_error {
        if prev.len() != midline_uy.len() {
            return Err(RbcError::Config(format!(
                "midline length {} does not match previous error length {}",
                midline_uy.len(),
                prev.len()
            )));
        }
    }
    let raw: Vec<f64> = match &pd.prev_error {
        Some(prev) => midline_uy
            .iter()
            .zip(prev)
            .map(|(e, p)| pd.k_p * e + pd.k_d * (e - p) / pd.control_dt)
            .collect(),
        None => midline_uy.iter().map(|e| pd.k_p * e).collect(),
    };
    let action = constrain_heaters(&heater_averages(&raw), t_bottom);
    let next = PdState {
        prev_error: Some(midline_uy.to_vec()),
        ..pd.clone()
    };
    Ok((action, next))
}

#[derive(Clone, Debug)]
pub struct PdController {
    pub state: PdState,
    pub t_bottom: f64,
    pub nx: usize,
}

impl PdController {
    pub fn new(k_p: f64, k_d: f64, control_dt: f64, t_bottom: f64, nx: usize) -> Result<Self> {
        Ok(PdController {
            state: PdState::new(k_p, k_d, control_dt)?,
            t_bottom,
            nx,
        })
    }
}

impl Controller for PdController {
    fn id(&self) -> &str {
        "pd"
    }

    fn reset(&mut self) {
        self.state.reset();
    }

    fn act(&mut self, obs: &Observation) -> Result<HeaterAction> {
        if obs.midline_uy.len() != self.nx {
            return Err(RbcError::Config(format!(
                "midline length {} does not match nx = {}",
                obs.midline_uy.len(),
                self.nx
            )));
        }
        let (action, next) = pd_control(&self.state, &obs.midline_uy, self.t_bottom)?;
        self.state = next;
        Ok(action)
    }
}
