//! `atep`: operator entry point for coevolution runs.
//!
//! Subcommands: `run` a configured experiment, `resume` it from a
//! checkpoint, `eval-generalization` across completed runs, `export`
//! plot-ready tables, and `preset` to print a built-in configuration.
//! Run directories are self-describing: the resolved config echo, the
//! ledger, and periodic checkpoints suffice to reproduce or continue a run.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use atep_core::config::{preset, resolve_config, RunConfig, PRESET_NAMES};
use atep_core::engine::{Engine, EngineState};
use atep_core::metrics::{
    anr, check_config_compatible, checkpoint_load, checkpoint_save, fnr, run_generalization,
    MethodRun, RunLedger,
};
use atep_core::phenotype::compile;
use atep_core::sim::{rollout, EvalCounter, ACTION_BINS};
use atep_core::terrain::{synthesize, terrain_table};

/// Environment variable overriding the root for default run directories.
const RUN_ROOT_VAR: &str = "ATEP_RUN_ROOT";

#[derive(Parser)]
#[command(name = "atep", version, about = "Coevolve terrain environments and NEAT agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file and/or preset.
    Run(RunArgs),
    /// Continue a checkpointed run for extra iterations.
    Resume(ResumeArgs),
    /// Cross-evaluate completed runs on each other's solved environments.
    EvalGeneralization(EvalArgs),
    /// Emit plot-ready tables from a run directory.
    Export(ExportArgs),
    /// Print a built-in preset config.
    Preset(PresetArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines; omitted keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base preset applied before the config file.
    #[arg(long, value_parser = PRESET_NAMES.to_vec())]
    preset: Option<String>,
    /// Inline overrides, e.g. --set seed=7 (repeatable; applied last).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Run directory; defaults to $ATEP_RUN_ROOT/run-<kind>-seed<seed>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResumeArgs {
    /// Checkpoint directory (e.g. <run>/checkpoints/iter-000050).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Additional iterations to run.
    #[arg(long)]
    iters: u64,
    /// Replacement config; refused on hash mismatch without --override-config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Accept a config whose hash differs from the checkpointed one.
    #[arg(long)]
    override_config: bool,
    /// Run directory to continue into; defaults to the checkpoint's run dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Completed run directories (one for the self-generalization variant).
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    /// Environments selected per run (the latest solved ones).
    #[arg(long, default_value_t = 20)]
    n_envs: usize,
    /// Rollouts per (agent, environment) pair.
    #[arg(long, default_value_t = 30)]
    n_runs: usize,
    /// Observation noise sigma; zero makes the report deterministic.
    #[arg(long, default_value_t = 0.01)]
    noise_sigma: f64,
    /// Output directory for report.tsv and summary.txt.
    #[arg(long, default_value = "generalization-report")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Series {
    Annecs,
    Fnr,
    Anr,
    Nodes,
    #[value(alias = "func_evals")]
    FuncEvals,
    Terrain,
    Actions,
}

#[derive(Args)]
struct ExportArgs {
    /// Run directory holding ledger.csv and checkpoints/final.
    #[arg(long)]
    run: PathBuf,
    /// Which series to export.
    #[arg(long, value_enum)]
    what: Series,
    /// Output directory; defaults to <run>/export.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name.
    #[arg(value_parser = PRESET_NAMES.to_vec())]
    name: String,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Resume(args) => cmd_resume(args),
        Command::EvalGeneralization(args) => cmd_eval_generalization(args),
        Command::Export(args) => cmd_export(args),
        Command::Preset(args) => cmd_preset(args),
    }
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{s}'"))
        })
        .collect()
}

/// The run-dir config echo, stamped with the code version so a run
/// directory alone identifies what produced it.
fn stamped_echo(cfg: &RunConfig) -> String {
    format!("# atep {}\n{}", env!("CARGO_PKG_VERSION"), cfg.echo())
}

fn default_run_dir(cfg: &RunConfig) -> PathBuf {
    let root = std::env::var(RUN_ROOT_VAR).unwrap_or_else(|_| "runs".to_string());
    let kind = if cfg.fixed_topology.is_some() {
        format!("fixed-{}", cfg.transfer.kind.name())
    } else {
        cfg.transfer.kind.name().to_string()
    };
    Path::new(&root).join(format!("run-{kind}-seed{}", cfg.seed))
}

/// Drives the engine for `iters` iterations, appending ledger rows and
/// saving scheduled checkpoints, then writes the final checkpoint.
fn drive(engine: &mut Engine, run_dir: &Path, iters: u64) -> Result<()> {
    let ledger_path = run_dir.join("ledger.csv");
    let mut ledger_file = fs::OpenOptions::new()
        .append(true)
        .open(&ledger_path)
        .with_context(|| format!("open {}", ledger_path.display()))?;

    for _ in 0..iters {
        engine.step_iteration()?;
        let row = engine
            .state
            .ledger
            .rows
            .last()
            .expect("step appends a row");
        writeln!(ledger_file, "{}", row.to_csv_line())?;
        let iter = engine.iteration();
        if engine.cfg.checkpoint_every_iters > 0 && iter.is_multiple_of(engine.cfg.checkpoint_every_iters)
        {
            let dir = run_dir.join("checkpoints").join(format!("iter-{iter:06}"));
            checkpoint_save(&engine.cfg, &engine.state, &dir)?;
        }
        if iter.is_multiple_of(10) {
            println!(
                "iter {iter}: annecs {} pairs {} evals {}",
                engine.annecs(),
                engine.state.pairs.len(),
                engine.state.ledger_evals
            );
        }
    }
    ledger_file.flush()?;
    checkpoint_save(
        &engine.cfg,
        &engine.state,
        &run_dir.join("checkpoints").join("final"),
    )?;
    fs::write(
        run_dir.join("transfers.csv"),
        engine.state.ledger.transfers_csv(),
    )?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let file_text = match &args.config {
        Some(path) => {
            Some(fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?)
        }
        None => None,
    };
    let overrides = parse_sets(&args.sets)?;
    let cfg = resolve_config(args.preset.as_deref(), file_text.as_deref(), &overrides)?;

    let run_dir = args.out.unwrap_or_else(|| default_run_dir(&cfg));
    fs::create_dir_all(&run_dir)
        .with_context(|| format!("create run dir {}", run_dir.display()))?;
    fs::write(run_dir.join("config.txt"), stamped_echo(&cfg))?;
    fs::write(
        run_dir.join("ledger.csv"),
        format!("{}\n", atep_core::metrics::LEDGER_HEADER),
    )?;

    let iters = cfg.iterations;
    let mut engine = Engine::new(cfg)?;
    drive(&mut engine, &run_dir, iters)?;
    println!(
        "run complete: {} iterations, annecs {}, ledger at {}",
        engine.iteration(),
        engine.annecs(),
        run_dir.join("ledger.csv").display()
    );
    Ok(())
}

/// A checkpoint path like <run>/checkpoints/<name> implies the run dir.
fn infer_run_dir(checkpoint: &Path) -> Option<PathBuf> {
    let parent = checkpoint.parent()?;
    (parent.file_name()? == "checkpoints").then(|| parent.parent().map(PathBuf::from))?
}

fn cmd_resume(args: ResumeArgs) -> Result<()> {
    let (stored_cfg, state) = checkpoint_load(&args.checkpoint)?;
    let cfg = match &args.config {
        Some(path) => {
            let supplied = RunConfig::load(path)?;
            if !args.override_config {
                check_config_compatible(&stored_cfg, &supplied)?;
            }
            supplied
        }
        None => stored_cfg,
    };
    let run_dir = args
        .out
        .or_else(|| infer_run_dir(&args.checkpoint))
        .ok_or_else(|| {
            anyhow!("cannot infer the run directory from the checkpoint path; pass --out")
        })?;
    fs::create_dir_all(&run_dir)?;
    fs::write(run_dir.join("config.txt"), stamped_echo(&cfg))?;

    let mut engine = Engine::from_state(cfg, state);
    // Rebuild the ledger file from checkpointed rows so the resumed file
    // equals an uninterrupted run's.
    fs::write(run_dir.join("ledger.csv"), engine.state.ledger.to_csv())?;
    drive(&mut engine, &run_dir, args.iters)?;
    println!(
        "resumed to iteration {}, annecs {}",
        engine.iteration(),
        engine.annecs()
    );
    Ok(())
}

fn load_final_state(run_dir: &Path) -> Result<(RunConfig, EngineState)> {
    let final_dir = run_dir.join("checkpoints").join("final");
    checkpoint_load(&final_dir)
        .with_context(|| format!("load final checkpoint of {}", run_dir.display()))
}

fn cmd_eval_generalization(args: EvalArgs) -> Result<()> {
    let mut methods = Vec::new();
    for dir in &args.runs {
        let label = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let (cfg, state) = load_final_state(dir)?;
        methods.push(MethodRun { label, cfg, state });
    }
    let report = run_generalization(&methods, args.n_envs, args.n_runs, args.noise_sigma)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("report.tsv"), report.table())?;
    fs::write(args.out.join("summary.txt"), report.summary())?;
    print!("{}", report.summary());
    println!(
        "report written to {} ({} rollouts)",
        args.out.display(),
        report.function_evaluations
    );
    Ok(())
}

fn write_series(
    out_dir: &Path,
    name: &str,
    rows: impl Iterator<Item = (u64, String)>,
) -> Result<PathBuf> {
    let path = out_dir.join(format!("{name}.tsv"));
    let mut body = String::from("iteration\tvalue\n");
    for (iter, value) in rows {
        body.push_str(&format!("{iter}\t{value}\n"));
    }
    fs::write(&path, body)?;
    Ok(path)
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let out_dir = args.out.unwrap_or_else(|| args.run.join("export"));
    fs::create_dir_all(&out_dir)?;
    let ledger_path = args.run.join("ledger.csv");

    let rows = || -> Result<Vec<atep_core::metrics::LedgerRow>> {
        let text = fs::read_to_string(&ledger_path)
            .with_context(|| format!("read {}", ledger_path.display()))?;
        RunLedger::rows_from_csv(&text).map_err(|e| anyhow!(e))
    };

    match args.what {
        Series::Annecs => {
            let p = write_series(
                &out_dir,
                "annecs",
                rows()?.iter().map(|r| (r.iteration, r.annecs.to_string())),
            )?;
            println!("wrote {}", p.display());
        }
        Series::Nodes => {
            let p = write_series(
                &out_dir,
                "nodes",
                rows()?.iter().map(|r| (r.iteration, r.mean_nodes.to_string())),
            )?;
            println!("wrote {}", p.display());
        }
        Series::FuncEvals => {
            let p = write_series(
                &out_dir,
                "func_evals",
                rows()?
                    .iter()
                    .map(|r| (r.iteration, r.cumulative_function_evals.to_string())),
            )?;
            println!("wrote {}", p.display());
        }
        Series::Fnr | Series::Anr => {
            let all = rows()?;
            let name = if args.what == Series::Fnr { "fnr" } else { "anr" };
            let mut skipped = 0usize;
            let series: Vec<(u64, String)> = all
                .iter()
                .filter_map(|r| {
                    let v = if args.what == Series::Fnr { fnr(r) } else { anr(r) };
                    match v {
                        Some(x) => Some((r.iteration, x.to_string())),
                        None => {
                            skipped += 1;
                            None
                        }
                    }
                })
                .collect();
            let p = write_series(&out_dir, name, series.into_iter())?;
            if skipped > 0 {
                eprintln!("{name}: skipped {skipped} rows with zero mean_nodes");
            }
            println!("wrote {}", p.display());
        }
        Series::Terrain => {
            let (cfg, state) = load_final_state(&args.run)?;
            let mut count = 0;
            for env in state
                .pairs
                .iter()
                .map(|p| &p.env)
                .chain(state.archive.retired.iter().map(|r| &r.env))
            {
                let terrain = synthesize(env, &cfg.terrain)
                    .map_err(|e| anyhow!("synthesize env {}: {e}", env.env_id))?;
                let path = out_dir.join(format!("terrain-env{:04}.tsv", env.env_id));
                fs::write(&path, terrain_table(&terrain))?;
                count += 1;
            }
            println!("wrote {count} terrain tables to {}", out_dir.display());
        }
        Series::Actions => {
            let (cfg, state) = load_final_state(&args.run)?;
            let counter = EvalCounter::default();
            let mut count = 0;
            for pair in &state.pairs {
                let Some(champion) = &pair.champion else { continue };
                let net = compile(champion).map_err(|e| anyhow!("compile champion: {e}"))?;
                let terrain = synthesize(&pair.env, &cfg.terrain)
                    .map_err(|e| anyhow!("synthesize env {}: {e}", pair.env.env_id))?;
                let result = rollout(&net, &terrain, &cfg.sim, None, &counter)
                    .map_err(|e| anyhow!("rollout: {e}"))?;
                let mut body = String::from("bin_lo\tbin_hi\tdrive_count\tjump_count\n");
                for b in 0..ACTION_BINS {
                    let lo = -1.0 + 2.0 * b as f64 / ACTION_BINS as f64;
                    let hi = -1.0 + 2.0 * (b + 1) as f64 / ACTION_BINS as f64;
                    body.push_str(&format!(
                        "{lo}\t{hi}\t{}\t{}\n",
                        result.action_histogram[0][b], result.action_histogram[1][b]
                    ));
                }
                let path = out_dir.join(format!(
                    "actions-env{:04}-agent{}.tsv",
                    pair.env.env_id, champion.id
                ));
                fs::write(&path, body)?;
                count += 1;
            }
            println!("wrote {count} action histograms to {}", out_dir.display());
        }
    }
    Ok(())
}

fn cmd_preset(args: PresetArgs) -> Result<()> {
    let cfg = preset(&args.name)?;
    match args.out {
        Some(path) => {
            fs::write(&path, cfg.echo())?;
            println!("wrote {}", path.display());
        }
        None => print!("{}", cfg.echo()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dir_inference() {
        assert_eq!(
            infer_run_dir(Path::new("runs/a/checkpoints/final")),
            Some(PathBuf::from("runs/a"))
        );
        assert_eq!(infer_run_dir(Path::new("somewhere/final")), None);
    }

    #[test]
    fn set_parsing() {
        let pairs = parse_sets(&["seed=5".into(), "transfer.kind = nt".into()]).unwrap();
        assert_eq!(pairs[0], ("seed".into(), "5".into()));
        assert_eq!(pairs[1], ("transfer.kind".into(), "nt".into()));
        assert!(parse_sets(&["oops".into()]).is_err());
    }
}
