mod output;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use active_irl::active_loop::{run_active_learning, run_suite, RunRecord};
use active_irl::config::{ExperimentConfig, Method};
use active_irl::scaling::{run_scaling, ScaleConfig};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "active-irl", version, about = "Active Bayesian IRL experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single experiment.
    Run(RunArgs),
    /// Run every (method, seed) pair of a configuration.
    Suite(RunArgs),
    /// Time acquisition and posterior sampling on growing worlds.
    Scale(ScaleArgs),
    /// Start the demonstration service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: structured-paper or random-paper.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed, or comma-separated seeds for `suite`.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Method, or comma-separated methods for `suite`.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    /// Runs in flight at once.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Override the number of active steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Also write the acquisition scores of this step for every state.
    #[arg(long)]
    heatmap_step: Option<usize>,
    /// Write zero wall times so reruns give identical files.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ScaleArgs {
    /// Scaling configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the BO timing rows.
    #[arg(long)]
    no_bo: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory of session event logs.
    #[arg(long, default_value = "sessions")]
    data: PathBuf,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)
            .with_context(|| format!("cannot load {}", path.display()))?,
        (None, Some(p)) => ExperimentConfig::preset(p)?,
        (None, None) => ExperimentConfig::structured_paper(),
    };
    if let Some(n) = args.steps {
        cfg.steps = n;
    }
    if args.no_timing {
        cfg.record_timing = false;
    }
    Ok(cfg)
}

fn finish(out: &Path, records: &[RunRecord]) -> Result<ExitCode> {
    output::write_index(out, records)?;
    let incomplete = records.iter().filter(|r| !r.complete).count();
    if incomplete > 0 {
        log::error!("{incomplete} of {} runs did not complete", records.len());
        return Ok(ExitCode::FAILURE);
    }
    log::info!("wrote {} runs to {}", records.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = load_config(&args)?;
    match args.method.as_slice() {
        [] => {}
        [m] => cfg.method = *m,
        _ => bail!("run takes one method; use suite for several"),
    }
    match args.seed.as_slice() {
        [] => {}
        [s] => cfg.seed = *s,
        _ => bail!("run takes one seed; use suite for several"),
    }
    let cfg = cfg.resolve()?;
    output::write_manifest(&args.out, &cfg)?;
    log::info!("{} seed {}", cfg.method, cfg.seed);
    let rec = run_active_learning(&cfg)?;
    output::write_run(&args.out, &cfg, &rec, args.heatmap_step)?;
    finish(&args.out, &[rec])
}

fn cmd_suite(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = load_config(&args)?;
    if !args.method.is_empty() {
        cfg.suite.methods = args.method.clone();
    }
    if !args.seed.is_empty() {
        cfg.suite.seeds = args.seed.clone();
    }
    let cfg = cfg.resolve()?;
    output::write_manifest(&args.out, &cfg)?;
    log::info!(
        "{} methods x {} seeds, {} jobs",
        cfg.suite.methods.len(),
        cfg.suite.seeds.len(),
        args.jobs
    );
    let res = run_suite(&cfg, &cfg.suite.methods, &cfg.suite.seeds, args.jobs)?;
    for rec in &res.records {
        output::write_run(&args.out, &cfg, rec, args.heatmap_step)?;
    }
    output::write_summary(&args.out, &res.records)?;
    for m in &cfg.suite.methods {
        if let (Some(h), Some(r)) = (res.median_final_entropy(*m), res.median_final_regret(*m)) {
            println!("{m:<16} median final entropy {h:10.3}  regret {r:8.3}");
        }
    }
    finish(&args.out, &res.records)
}

fn cmd_scale(args: ScaleArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => toml::from_str(
            &std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?,
        )?,
        None => ScaleConfig::default(),
    };
    if !args.sizes.is_empty() {
        cfg.sizes = args.sizes.clone();
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.no_bo {
        cfg.with_bo = false;
    }
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("scale.toml"), toml::to_string(&cfg)?)?;
    let res = run_scaling(&cfg)?;
    res.write_csv(std::fs::File::create(args.out.join("timing.csv"))?)?;
    for row in res.rows.iter().chain(&res.bo_rows) {
        println!(
            "n={:<3} {:<10} median {:.4}s, mean {:.4}s +- {:.4}s",
            row.size, row.phase, row.median_s, row.mean_s, row.std_s
        );
    }
    let mut phases: Vec<&str> = res
        .rows
        .iter()
        .chain(&res.bo_rows)
        .map(|r| r.phase.as_str())
        .collect();
    phases.dedup();
    for phase in phases {
        if let Some(p) = res.exponent(phase) {
            println!("{phase}: time ~ n^{p:.2}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(args: ServeArgs) -> Result<ExitCode> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(irl_service::serve(
        args.addr,
        irl_service::ServiceOptions::new(args.data),
    ))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IRL_LOG", "info")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Suite(a) => cmd_suite(a),
        Cmd::Scale(a) => cmd_scale(a),
        Cmd::Serve(a) => cmd_serve(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
