//! File layout of an experiment output directory.

use crate::env::{load_checkpoints, split_checkpoints, CheckpointSplit};
use crate::error::Result;
use crate::sim::checkpoint::Checkpoint;
use std::path::{Path, PathBuf};

pub fn checkpoints_dir(out: &Path) -> PathBuf {
    out.join("checkpoints")
}

pub fn baseline_path(out: &Path) -> PathBuf {
    out.join("baseline.txt")
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.join("summary.csv")
}

pub fn episodes_dir(out: &Path) -> PathBuf {
    out.join("episodes")
}

pub fn figs_dir(out: &Path) -> PathBuf {
    out.join("figs")
}

pub fn policy_dir(out: &Path) -> PathBuf {
    out.join("policy")
}

/// Run name shared by the policy file and the training logs.
pub fn run_name(ra: f64, alpha: f64, seed: u64) -> String {
    format!("ra{ra}_alpha{alpha}_seed{seed}")
}

pub fn policy_path(out: &Path, ra: f64, alpha: f64, seed: u64) -> PathBuf {
    policy_dir(out).join(format!("{}.bin", run_name(ra, alpha, seed)))
}

/// Checkpoints for `ra` with their file stems as identifiers.
pub fn load_named_checkpoints(out: &Path, ra: f64) -> Result<Vec<(String, Checkpoint)>> {
    Ok(load_checkpoints(checkpoints_dir(out), ra)?
        .into_iter()
        .map(|(seed, ckpt)| {
            let name = crate::env::checkpoint_file_name(ra, seed);
            (name.trim_end_matches(".ckpt").to_string(), ckpt)
        })
        .collect())
}

/// The fixed 20/5/12 partition of the stored checkpoints for `ra`.
pub fn load_split(out: &Path, ra: f64) -> Result<CheckpointSplit<(String, Checkpoint)>> {
    split_checkpoints(&load_named_checkpoints(out, ra)?, super::SPLIT_SEED)
}
