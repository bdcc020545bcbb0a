//! Clipped-surrogate PPO loss with analytic gradients, and the update loop.

use super::buffer::RolloutBuffer;
use super::policy::PolicyParams;
use crate::error::{RbcError, Result};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_range: f64,
    pub learning_rate: f64,
    pub n_epochs: usize,
    pub minibatch_size: usize,
    pub n_envs: usize,
    /// Steps collected per environment for each update.
    pub n_steps: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub total_updates: usize,
    /// Validation period in updates.
    pub eval_every: usize,
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub log_std_init: f64,
    /// Normalized observations are clipped to this magnitude.
    pub obs_clip: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_range: 0.2,
            learning_rate: 3e-4,
            n_epochs: 10,
            minibatch_size: 256,
            n_envs: 8,
            n_steps: 256,
            ent_coef: 0.0,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            total_updates: 100,
            eval_every: 5,
            hidden: vec![256, 256],
            log_std_init: 0.0,
            obs_clip: 10.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(RbcError::Config(msg.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_range > 0.0) {
            return bad("clip_range must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.n_epochs == 0 || self.n_envs == 0 || self.n_steps == 0 || self.minibatch_size == 0 {
            return bad("epochs, environments, steps and minibatch size must be positive");
        }
        if !(self.n_envs * self.n_steps).is_multiple_of(self.minibatch_size) {
            return bad("minibatch size must divide n_envs * n_steps");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Training samples for one gradient step; matrices are `dim x batch`.
#[derive(Clone, Debug)]
pub struct Minibatch {
    pub obs: DMatrix<f64>,
    pub actions: DMatrix<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn gather(buffer: &RolloutBuffer, indices: &[usize]) -> Self {
        let b = indices.len();
        let mut obs = DMatrix::zeros(buffer.obs_dim, b);
        let mut actions = DMatrix::zeros(buffer.act_dim, b);
        for (c, &k) in indices.iter().enumerate() {
            obs.column_mut(c).copy_from_slice(buffer.observation(k));
            actions.column_mut(c).copy_from_slice(buffer.action(k));
        }
        Minibatch {
            obs,
            actions,
            old_log_probs: indices.iter().map(|&k| buffer.log_probs[k]).collect(),
            advantages: indices.iter().map(|&k| buffer.advantages[k]).collect(),
            returns: indices.iter().map(|&k| buffer.returns[k]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Advantages standardized within the minibatch (left unchanged for a
/// single sample).
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    if adv.len() < 2 {
        return adv.to_vec();
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1.0);
    adv.iter().map(|a| (a - mean) / (var.sqrt() + 1e-8)).collect()
}

/// Total loss `-surrogate + vf_coef * value_mse - ent_coef * entropy` and
/// its gradient in [`PolicyParams::flatten`] order.
pub fn loss_and_gradient(params: &PolicyParams, mb: &Minibatch, config: &PpoConfig) -> (LossParts, Vec<f64>) {
    let b = mb.len();
    let bf = b as f64;
    let act_dim = params.act_dim();
    let eps = config.clip_range;

    let actor_cache = params.actor.forward_cached(&mb.obs);
    let mean = actor_cache.output().map(|z| z.tanh());
    let sigma: Vec<f64> = params.log_std.iter().map(|ls| ls.exp()).collect();
    let adv = normalize_advantages(&mb.advantages);

    let mut grad_z = DMatrix::zeros(act_dim, b);
    let mut grad_log_std = vec![0.0; act_dim];
    let (mut policy_loss, mut approx_kl, mut clipped) = (0.0, 0.0, 0usize);
    for i in 0..b {
        let m: Vec<f64> = mean.column(i).iter().copied().collect();
        let a: Vec<f64> = mb.actions.column(i).iter().copied().collect();
        let lp = params.log_prob(&m, &a);
        let log_ratio = lp - mb.old_log_probs[i];
        let ratio = log_ratio.exp();
        let unclipped = ratio * adv[i];
        let clipped_term = ratio.clamp(1.0 - eps, 1.0 + eps) * adv[i];
        policy_loss -= unclipped.min(clipped_term) / bf;
        approx_kl += ((ratio - 1.0) - log_ratio) / bf;
        if (ratio - 1.0).abs() > eps {
            clipped += 1;
        }
        // d loss / d log_prob
        let g = if unclipped <= clipped_term { -unclipped / bf } else { 0.0 };
        if g != 0.0 {
            for d in 0..act_dim {
                let diff = a[d] - m[d];
                let s2 = sigma[d] * sigma[d];
                grad_z[(d, i)] = g * diff / s2 * (1.0 - m[d] * m[d]);
                grad_log_std[d] += g * (diff * diff / s2 - 1.0);
            }
        }
    }
    let entropy = params.entropy();
    for g in &mut grad_log_std {
        *g -= config.ent_coef;
    }

    let critic_cache = params.critic.forward_cached(&mb.obs);
    let values = critic_cache.output();
    let mut value_loss = 0.0;
    let mut grad_v = DMatrix::zeros(1, b);
    for i in 0..b {
        let err = values[(0, i)] - mb.returns[i];
        value_loss += err * err / bf;
        grad_v[(0, i)] = config.vf_coef * 2.0 * err / bf;
    }

    let mut grad = params.actor.backward(&actor_cache, &grad_z);
    grad.extend_from_slice(&grad_log_std);
    grad.extend(params.critic.backward(&critic_cache, &grad_v));

    let parts = LossParts {
        total: policy_loss + config.vf_coef * value_loss - config.ent_coef * entropy,
        policy_loss,
        value_loss,
        entropy,
        approx_kl,
        clip_fraction: clipped as f64 / bf,
    };
    (parts, grad)
}

/// Scales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-6);
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Runs `n_epochs` passes of shuffled minibatch gradient steps over a
/// buffer whose advantages are already computed.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    optimizer: &mut Adam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    let n = buffer.len();
    if buffer.advantages.len() != n || buffer.returns.len() != n {
        return Err(RbcError::Config("advantages have not been computed".into()));
    }
    if n == 0 || !n.is_multiple_of(config.minibatch_size) {
        return Err(RbcError::Config(format!(
            "minibatch size {} does not divide buffer size {n}",
            config.minibatch_size
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut flat = params.flatten();
    let mut sums = UpdateStats::default();
    let mut count = 0.0;
    for epoch in 0..config.n_epochs {
        indices.shuffle(rng);
        for (batch_no, chunk) in indices.chunks(config.minibatch_size).enumerate() {
            let mb = Minibatch::gather(buffer, chunk);
            let (parts, mut grad) = loss_and_gradient(params, &mb, config);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(RbcError::NonFiniteLoss(format!(
                    "epoch {epoch}, minibatch {batch_no}: policy loss {}, value loss {}, entropy {}",
                    parts.policy_loss, parts.value_loss, parts.entropy
                )));
            }
            clip_grad_norm(&mut grad, config.max_grad_norm);
            optimizer.step(&mut flat, &grad);
            params.read_flat(&flat);
            sums.policy_loss += parts.policy_loss;
            sums.value_loss += parts.value_loss;
            sums.entropy += parts.entropy;
            sums.approx_kl += parts.approx_kl;
            sums.clip_fraction += parts.clip_fraction;
            count += 1.0;
        }
    }
    Ok(UpdateStats {
        policy_loss: sums.policy_loss / count,
        value_loss: sums.value_loss / count,
        entropy: sums.entropy / count,
        approx_kl: sums.approx_kl / count,
        clip_fraction: sums.clip_fraction / count,
    })
}
