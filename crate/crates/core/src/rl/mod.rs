//! Proximal policy optimization for the heater-control task.

pub mod buffer;
pub mod mlp;
pub mod policy;
pub mod ppo;
pub mod train;

pub use buffer::RolloutBuffer;
pub use policy::{load_policy, sample_action, save_policy, ObsNormalizer, PolicyParams};
pub use ppo::{loss_and_gradient, ppo_update, Adam, Minibatch, PpoConfig, UpdateStats};
pub use train::{rbc_envs, train, EnvStep, RbcTrainingEnv, RlEnv, TrainOutcome, UpdateLog, ValidationRecord};
