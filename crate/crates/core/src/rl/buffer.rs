//! Rollout storage and generalized advantage estimation.

use crate::error::{RbcError, Result};

/// Per-step data from `n_envs` environments over `n_steps` steps. Entry
/// `(t, e)` lives at flat index `t * n_envs + e`; vector quantities are
/// stored contiguously per entry.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Normalized observations seen by the policy.
    pub observations: Vec<f64>,
    /// Unclamped action samples.
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// The episode ended with this step; nothing is bootstrapped past it.
    pub dones: Vec<bool>,
    /// Value of the state following the final step of each environment.
    pub bootstrap_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, n_steps: usize, obs_dim: usize, act_dim: usize) -> Self {
        let n = n_envs * n_steps;
        RolloutBuffer {
            n_envs,
            n_steps,
            obs_dim,
            act_dim,
            observations: Vec::with_capacity(n * obs_dim),
            actions: Vec::with_capacity(n * act_dim),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap_values: vec![0.0; n_envs],
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn observation(&self, k: usize) -> &[f64] {
        &self.observations[k * self.obs_dim..(k + 1) * self.obs_dim]
    }

    pub fn action(&self, k: usize) -> &[f64] {
        &self.actions[k * self.act_dim..(k + 1) * self.act_dim]
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.n_envs * self.n_steps;
        let ok = self.rewards.len() == n
            && self.values.len() == n
            && self.dones.len() == n
            && self.log_probs.len() == n
            && self.observations.len() == n * self.obs_dim
            && self.actions.len() == n * self.act_dim
            && self.bootstrap_values.len() == self.n_envs;
        if ok {
            Ok(())
        } else {
            Err(RbcError::Config(format!(
                "rollout buffer arrays do not match {} envs x {} steps",
                self.n_envs, self.n_steps
            )))
        }
    }

    /// Fills `advantages` and `returns = advantages + values`.
    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) -> Result<()> {
        self.check_shapes()?;
        let n_envs = self.n_envs;
        let mut advantages = vec![0.0; self.rewards.len()];
        for e in 0..n_envs {
            let mut next_adv = 0.0;
            let mut next_value = self.bootstrap_values[e];
            for t in (0..self.n_steps).rev() {
                let k = t * n_envs + e;
                let live = if self.dones[k] { 0.0 } else { 1.0 };
                let delta = self.rewards[k] + gamma * next_value * live - self.values[k];
                next_adv = delta + gamma * lambda * live * next_adv;
                advantages[k] = next_adv;
                next_value = self.values[k];
            }
        }
        if advantages.iter().any(|a| !a.is_finite()) {
            return Err(RbcError::Input("non-finite advantage".into()));
        }
        self.returns = advantages.iter().zip(&self.values).map(|(a, v)| a + v).collect();
        self.advantages = advantages;
        Ok(())
    }
}
