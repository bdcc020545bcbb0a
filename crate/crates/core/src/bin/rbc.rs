use clap::{Args, Parser, Subcommand};
use rbc_control::controllers::{NullController, PdController};
use rbc_control::diagnostics::{measure_baseline, BaselineTable};
use rbc_control::env::{generate_checkpoints, save_checkpoints, RunConfig, CHECKPOINTS_PER_RA, DEFAULT_WARMUP};
use rbc_control::harness::{self, layout, plot, EpisodeRecord, EvalSummary, PolicyController, TransferTarget};
use rbc_control::rl::{self, load_policy, save_policy};
use rbc_control::{RbcError, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rbc", about = "Rayleigh-Benard convection control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Rayleigh number
    #[arg(long)]
    ra: Option<f64>,
    /// Weight of the cell-merging reward term
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run configuration file (TOML key-value pairs)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate warmed-up initial conditions
    GenCheckpoints {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = CHECKPOINTS_PER_RA)]
        count: usize,
        /// Uncontrolled warm-up time
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: f64,
    },
    /// Measure the uncontrolled mean Nusselt number on the test checkpoints
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Train a PPO agent
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a controller on the test checkpoints
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// ppo, pd or null
        #[arg(long, default_value = "ppo")]
        controller: String,
        /// Policy file; defaults to the one written by `train`
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Evaluate a policy trained at --ra on other Rayleigh numbers
    Generalize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        targets: Vec<f64>,
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Evaluate the PD controller on the test checkpoints
    PdRun {
        #[command(flatten)]
        common: Common,
    },
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(ra) = common.ra {
        cfg.ra = ra;
    }
    if let Some(alpha) = common.alpha {
        cfg.alpha = alpha;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.sim_config().validate()?;
    Ok(cfg)
}

fn nu_base(cfg: &RunConfig, out: &Path) -> Result<f64> {
    match cfg.nu_base {
        Some(v) => Ok(v),
        None => BaselineTable::load(layout::baseline_path(out))?.require(cfg.ra),
    }
}

fn write_outputs(out: &Path, records: &[EpisodeRecord], summary: &EvalSummary) -> Result<()> {
    let episodes = layout::episodes_dir(out);
    std::fs::create_dir_all(&episodes)?;
    for r in records {
        r.save(episodes.join(format!("{}.csv", r.file_stem())))?;
    }
    harness::upsert_summaries(layout::summary_path(out), std::slice::from_ref(summary))?;
    let figs = layout::figs_dir(out);
    std::fs::create_dir_all(&figs)?;
    let stem = format!("{}_ra{}_alpha{}", summary.controller, summary.ra, summary.alpha);
    plot::plot_episodes(figs.join(format!("{stem}_nusselt.svg")), &stem, records)?;
    plot::plot_summaries(figs.join("summary.svg"), &harness::read_summaries(layout::summary_path(out))?)?;
    println!(
        "{} Ra={} alpha={}: Nu reduction {:.2} +- {:.2} %, merged {:.0} %, Nu std (last 40) {:.4}, merge time {}",
        summary.controller,
        summary.ra,
        summary.alpha,
        summary.nu_reduction_mean,
        summary.nu_reduction_std,
        summary.merged_pct,
        summary.nu_std_last40,
        summary.merge_time.map(|t| format!("{t:.1}")).unwrap_or_else(|| "-".into())
    );
    Ok(())
}

fn evaluate_with(common: &Common, controller: &str, policy: Option<PathBuf>) -> Result<()> {
    let cfg = resolve(common)?;
    let out = &common.out;
    let env = cfg.env_config(nu_base(&cfg, out)?);
    let test = layout::load_split(out, cfg.ra)?.test;
    let records = match controller {
        "null" => harness::evaluate(&NullController { t_bottom: env.sim.t_bottom }, env, &test)?,
        "pd" => {
            let pd = PdController::new(cfg.kp, cfg.kd, env.action_duration, env.sim.t_bottom, env.sim.nx)?;
            harness::evaluate(&pd, env, &test)?
        }
        "ppo" => {
            let path = policy.unwrap_or_else(|| layout::policy_path(out, cfg.ra, cfg.alpha, cfg.seed));
            let (params, _) = load_policy(&path)?;
            harness::evaluate(&PolicyController::new(params, env.sim.t_bottom), env, &test)?
        }
        other => return Err(RbcError::Config(format!("unknown controller '{other}'"))),
    };
    let mut baseline = BaselineTable::new();
    baseline.insert(cfg.ra, env.nu_base)?;
    let summary = harness::summarize(&records, &baseline)?;
    write_outputs(out, &records, &summary)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCheckpoints { common, count, warmup } => {
            let cfg = resolve(&common)?;
            let sim = cfg.sim_config();
            eprintln!("generating {count} checkpoints at Ra={} ({}x{}, warm-up {warmup})", sim.ra, sim.nx, sim.ny);
            let states = generate_checkpoints(&sim, count, warmup, cfg.seed)?;
            let paths = save_checkpoints(layout::checkpoints_dir(&common.out), &sim, &states, cfg.seed)?;
            println!("wrote {} checkpoints to {}", paths.len(), layout::checkpoints_dir(&common.out).display());
        }
        Command::Baseline { common } => {
            let cfg = resolve(&common)?;
            let sim = cfg.sim_config();
            let test = layout::load_split(&common.out, cfg.ra)?.test;
            let states: Vec<_> = test.into_iter().map(|(_, c)| c.state).collect();
            let horizon = cfg.actions_per_episode as f64 * cfg.action_duration;
            let nu = measure_baseline(&sim, &states, horizon)?;
            let path = layout::baseline_path(&common.out);
            let mut table = if path.exists() { BaselineTable::load(&path)? } else { BaselineTable::new() };
            table.insert(cfg.ra, nu)?;
            table.save(&path)?;
            println!("Nu_base(Ra={}) = {nu:.6}", cfg.ra);
        }
        Command::Train { common } => {
            let cfg = resolve(&common)?;
            let out = &common.out;
            let env = cfg.env_config(nu_base(&cfg, out)?);
            let split = layout::load_split(out, cfg.ra)?;
            let ppo = cfg.ppo.clone();
            let n_val = ppo.n_envs.min(split.val.len());
            let train_envs = rl::rbc_envs(env, split.train, ppo.n_envs)?;
            let val_envs = rl::rbc_envs(env, split.val, n_val)?;
            let outcome = rl::train(train_envs, val_envs, &ppo, cfg.seed, |entry, val| {
                eprintln!(
                    "update {:4}  reward {:+.4}  Nu red {:+.2} %  celldist {:.3}  kl {:.4}{}",
                    entry.update,
                    entry.mean_reward,
                    entry.mean_nu_reduction,
                    entry.mean_celldist,
                    entry.stats.approx_kl,
                    val.map(|v| format!("  | val return {:.3}, merged {:.0} %", v.mean_return, v.merged_pct()))
                        .unwrap_or_default()
                );
            })?;
            let name = layout::run_name(cfg.ra, cfg.alpha, cfg.seed);
            let policy = layout::policy_path(out, cfg.ra, cfg.alpha, cfg.seed);
            save_policy(&policy, &outcome.best, &ppo)?;
            rl::train::write_training_log(layout::policy_dir(out).join(format!("{name}_train.csv")), &outcome.log)?;
            rl::train::write_validation_log(layout::policy_dir(out).join(format!("{name}_val.csv")), &outcome.validation)?;
            println!("best policy from update {} written to {}", outcome.best_update, policy.display());
        }
        Command::Evaluate { common, controller, policy } => evaluate_with(&common, &controller, policy)?,
        Command::PdRun { common } => evaluate_with(&common, "pd", None)?,
        Command::Generalize { common, targets, policy } => {
            let cfg = resolve(&common)?;
            let out = &common.out;
            let path = policy.unwrap_or_else(|| layout::policy_path(out, cfg.ra, cfg.alpha, cfg.seed));
            let (params, _) = load_policy(&path)?;
            let table = BaselineTable::load(layout::baseline_path(out))?;
            let source = cfg.sim_config();
            let transfer: Vec<TransferTarget> = targets
                .iter()
                .map(|&ra| {
                    let target_cfg = RunConfig { ra, nu_base: None, dt: None, ..cfg.clone() };
                    Ok(TransferTarget {
                        config: target_cfg.env_config(table.require(ra)?),
                        checkpoints: layout::load_split(out, ra)?.test,
                    })
                })
                .collect::<Result<_>>()?;
            let summaries = harness::experiment_generalize(&params, &source, &transfer, &table)?;
            let summaries: Vec<EvalSummary> = summaries
                .into_iter()
                .map(|mut s| {
                    s.controller = format!("ppo-from-{}", cfg.ra);
                    s.alpha = cfg.alpha;
                    s
                })
                .collect();
            harness::upsert_summaries(layout::summary_path(out), &summaries)?;
            for s in &summaries {
                println!(
                    "transfer Ra={} -> Ra={}: Nu reduction {:.2} +- {:.2} %, merged {:.0} %",
                    cfg.ra, s.ra, s.nu_reduction_mean, s.nu_reduction_std, s.merged_pct
                );
            }
        }
    }
    Ok(())
}

fn exit_code(err: &RbcError) -> u8 {
    match err.category() {
        "config" => 2,
        "input" => 3,
        "io" => 4,
        "divergence" => 5,
        "training" => 6,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error [{}]: {err}", err.category());
            ExitCode::from(exit_code(&err))
        }
    }
}
