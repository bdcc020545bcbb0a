//! Gaussian actor-critic policy, observation normalization and the policy
//! file format.

use super::mlp::Mlp;
use super::PpoConfig;
use crate::error::{RbcError, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// Running mean and variance of observation vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsNormalizer {
    pub mean: DVector<f64>,
    pub var: DVector<f64>,
    pub count: f64,
    /// Normalized values are clipped to `+-clip`.
    pub clip: f64,
}

impl ObsNormalizer {
    pub fn new(dim: usize, clip: f64) -> Self {
        ObsNormalizer {
            mean: DVector::zeros(dim),
            var: DVector::from_element(dim, 1.0),
            count: 1e-4,
            clip,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges the statistics of a `dim x batch` matrix of observations.
    pub fn update(&mut self, batch: &DMatrix<f64>) {
        let n = batch.ncols() as f64;
        if n == 0.0 {
            return;
        }
        let batch_mean = batch.column_mean();
        let mut batch_var = DVector::zeros(self.dim());
        for col in batch.column_iter() {
            batch_var.zip_apply(&(col - &batch_mean), |v, d| *v += d * d);
        }
        batch_var /= n;
        let total = self.count + n;
        let delta = &batch_mean - &self.mean;
        self.mean += &delta * (n / total);
        let m2 = &self.var * self.count + batch_var * n + delta.map(|d| d * d) * (self.count * n / total);
        self.var = m2 / total;
        self.count = total;
    }

    pub fn normalize(&self, batch: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = batch.clone();
        let std = self.var.map(|v| (v + 1e-8).sqrt());
        for mut col in out.column_iter_mut() {
            for k in 0..col.len() {
                col[k] = ((col[k] - self.mean[k]) / std[k]).clamp(-self.clip, self.clip);
            }
        }
        out
    }
}

/// Actor and critic networks, state-independent log standard deviations and
/// the frozen observation statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: DVector<f64>,
    pub critic: Mlp,
    pub obs_norm: ObsNormalizer,
}

/// Policy outputs for a batch of normalized observations.
pub struct PolicyOutput {
    /// tanh-squashed action means, `act_dim x batch`
    pub mean: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, act_dim: usize, config: &PpoConfig, rng: &mut R) -> Self {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&config.hidden);
        let mut critic_sizes = actor_sizes.clone();
        actor_sizes.push(act_dim);
        critic_sizes.push(1);
        PolicyParams {
            actor: Mlp::new(&actor_sizes, sqrt2, 0.01, rng),
            log_std: DVector::from_element(act_dim, config.log_std_init),
            critic: Mlp::new(&critic_sizes, sqrt2, 1.0, rng),
            obs_norm: ObsNormalizer::new(obs_dim, config.obs_clip),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    /// Number of trainable values: actor, log std, critic.
    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.log_std.len() + self.critic.n_params()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        self.actor.write_flat(&mut flat);
        flat.extend_from_slice(self.log_std.as_slice());
        self.critic.write_flat(&mut flat);
        flat
    }

    pub fn read_flat(&mut self, flat: &[f64]) {
        let mut at = self.actor.read_flat(flat);
        let n = self.log_std.len();
        self.log_std.as_mut_slice().copy_from_slice(&flat[at..at + n]);
        at += n;
        at += self.critic.read_flat(&flat[at..]);
        debug_assert_eq!(at, flat.len());
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    /// Evaluates both networks on already normalized observations.
    pub fn evaluate(&self, norm_obs: &DMatrix<f64>) -> PolicyOutput {
        let mut mean = self.actor.forward(norm_obs);
        mean.apply(|v| *v = v.tanh());
        let values = self.critic.forward(norm_obs).row(0).iter().copied().collect();
        PolicyOutput { mean, values }
    }

    /// Diagonal Gaussian log density of `action` around `mean`.
    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(self.log_std.iter())
            .map(|((m, a), ls)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - HALF_LOG_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 + HALF_LOG_2PI).sum()
    }

    /// Draws an action for each column of `mean`. Returns the unclamped
    /// samples and their log densities.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &DMatrix<f64>, rng: &mut R) -> (DMatrix<f64>, Vec<f64>) {
        let mut actions = mean.clone();
        for mut col in actions.column_iter_mut() {
            for (d, a) in col.iter_mut().enumerate() {
                let eps: f64 = rng.sample(StandardNormal);
                *a += self.log_std[d].exp() * eps;
            }
        }
        let log_probs = (0..mean.ncols())
            .map(|c| {
                let m: Vec<f64> = mean.column(c).iter().copied().collect();
                let a: Vec<f64> = actions.column(c).iter().copied().collect();
                self.log_prob(&m, &a)
            })
            .collect();
        (actions, log_probs)
    }

    pub fn normalize_single(&self, obs: &[f64]) -> Result<DMatrix<f64>> {
        if obs.len() != self.obs_dim() {
            return Err(RbcError::Input(format!(
                "observation has {} entries, policy expects {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(RbcError::Input("non-finite observation".into()));
        }
        Ok(self.obs_norm.normalize(&DMatrix::from_column_slice(obs.len(), 1, obs)))
    }

    /// Critic estimate for a raw observation.
    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        let x = self.normalize_single(obs)?;
        Ok(self.critic.forward(&x)[(0, 0)])
    }
}

/// Samples a raw action in `[-1, 1]` for one observation; in deterministic
/// mode the action is the policy mean. The log density refers to the
/// sample before clamping.
pub fn sample_action<R: Rng + ?Sized>(
    params: &PolicyParams,
    obs: &[f64],
    rng: &mut R,
    deterministic: bool,
) -> Result<(Vec<f64>, f64)> {
    let x = params.normalize_single(obs)?;
    let out = params.evaluate(&x);
    let mean: Vec<f64> = out.mean.column(0).iter().copied().collect();
    if deterministic {
        let lp = params.log_prob(&mean, &mean);
        return Ok((mean, lp));
    }
    let (actions, log_probs) = params.sample(&out.mean, rng);
    let raw = actions.column(0).iter().map(|a| a.clamp(-1.0, 1.0)).collect();
    Ok((raw, log_probs[0]))
}

const POLICY_MAGIC: &[u8; 8] = b"RBCPOL1\n";
const POLICY_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PolicyHeader {
    version: u32,
    config: PpoConfig,
    actor_sizes: Vec<usize>,
    critic_sizes: Vec<usize>,
    obs_clip: f64,
    norm_count: f64,
}

/// Writes the policy container: magic, JSON header with the training
/// configuration and layer shapes, then little-endian f64 arrays (actor,
/// log std, critic, normalization mean, normalization variance).
pub fn write_policy(mut out: impl Write, params: &PolicyParams, config: &PpoConfig) -> Result<()> {
    let header = PolicyHeader {
        version: POLICY_VERSION,
        config: config.clone(),
        actor_sizes: params.actor.sizes(),
        critic_sizes: params.critic.sizes(),
        obs_clip: params.obs_norm.clip,
        norm_count: params.obs_norm.count,
    };
    let json = serde_json::to_vec(&header).map_err(|e| RbcError::Format(e.to_string()))?;
    out.write_all(POLICY_MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut values = params.flatten();
    values.extend_from_slice(params.obs_norm.mean.as_slice());
    values.extend_from_slice(params.obs_norm.var.as_slice());
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_policy(mut input: impl Read) -> Result<(PolicyParams, PpoConfig)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != POLICY_MAGIC {
        return Err(RbcError::Format("not a policy file".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(RbcError::Format("policy header too large".into()));
    }
    let mut json = vec![0u8; len];
    input.read_exact(&mut json)?;
    let header: PolicyHeader =
        serde_json::from_slice(&json).map_err(|e| RbcError::Format(format!("policy header: {e}")))?;
    if header.version != POLICY_VERSION {
        return Err(RbcError::Format(format!("unsupported policy version {}", header.version)));
    }
    let (actor_sizes, critic_sizes) = (&header.actor_sizes, &header.critic_sizes);
    if actor_sizes.len() < 2 || critic_sizes.len() < 2 || actor_sizes[0] != critic_sizes[0] {
        return Err(RbcError::Format("inconsistent layer shapes".into()));
    }
    let obs_dim = actor_sizes[0];
    let act_dim = *actor_sizes.last().unwrap();
    let mut params = PolicyParams {
        actor: Mlp::zeros(actor_sizes),
        log_std: DVector::zeros(act_dim),
        critic: Mlp::zeros(critic_sizes),
        obs_norm: ObsNormalizer::new(obs_dim, header.obs_clip),
    };
    let n_trainable = params.n_params();
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if rest.len() != (n_trainable + 2 * obs_dim) * 8 {
        return Err(RbcError::Format(format!(
            "policy payload has {} bytes, expected {}",
            rest.len(),
            (n_trainable + 2 * obs_dim) * 8
        )));
    }
    let values: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    params.read_flat(&values[..n_trainable]);
    params.obs_norm.mean = DVector::from_column_slice(&values[n_trainable..n_trainable + obs_dim]);
    params.obs_norm.var = DVector::from_column_slice(&values[n_trainable + obs_dim..]);
    params.obs_norm.count = header.norm_count;
    if !params.is_finite() {
        return Err(RbcError::Format("policy contains non-finite parameters".into()));
    }
    Ok((params, header.config))
}

pub fn save_policy(path: impl AsRef<Path>, params: &PolicyParams, config: &PpoConfig) -> Result<()> {
    if let Some(dir) = path.as_ref().parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_policy(&mut out, params, config)?;
    out.flush()?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<(PolicyParams, PpoConfig)> {
    read_policy(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> (PolicyParams, PpoConfig) {
        let config = PpoConfig {
            hidden: vec![6],
            ..PpoConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (PolicyParams::new(4, 2, &config, &mut rng), config)
    }

    #[test]
    fn normalizer_matches_batch_statistics() {
        let mut norm = ObsNormalizer::new(2, 10.0);
        norm.count = 0.0;
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 10.0, 10.0, 40.0]);
        let b = DMatrix::from_row_slice(2, 2, &[4.0, 5.0, -20.0, 0.0]);
        norm.update(&a);
        norm.update(&b);
        let all = [1.0, 2.0, 3.0, 4.0, 5.0];
        let mean = all.iter().sum::<f64>() / 5.0;
        let var = all.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((norm.mean[0] - mean).abs() < 1e-12);
        assert!((norm.var[0] - var).abs() < 1e-12);
        assert!((norm.mean[1] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_seeded_sampling() {
        let (params, _) = tiny();
        let obs = [0.1, -0.3, 0.5, 2.0];
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(
            sample_action(&params, &obs, &mut r1, false).unwrap(),
            sample_action(&params, &obs, &mut r2, false).unwrap()
        );
        let mut tight = params.clone();
        tight.log_std.fill(-40.0);
        let (a, _) = sample_action(&tight, &obs, &mut r1, false).unwrap();
        let (m, _) = sample_action(&tight, &obs, &mut r1, true).unwrap();
        for (x, y) in a.iter().zip(&m) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(sample_action(&params, &[f64::NAN, 0.0, 0.0, 0.0], &mut r1, false).is_err());
    }

    #[test]
    fn policy_file_round_trip() {
        let (mut params, config) = tiny();
        params.obs_norm.update(&DMatrix::from_fn(4, 3, |i, j| (i * j) as f64));
        let mut bytes = Vec::new();
        write_policy(&mut bytes, &params, &config).unwrap();
        let (back, cfg) = read_policy(&bytes[..]).unwrap();
        assert_eq!(back, params);
        assert_eq!(cfg, config);
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(read_policy(&bytes[..]), Err(RbcError::Format(_))));
        assert!(matches!(read_policy(&b"garbage!garbage"[..]), Err(RbcError::Format(_))));
    }
}
