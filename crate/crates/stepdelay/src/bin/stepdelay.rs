//! Experiment harness CLI. Thin wrapper over the library drivers: single
//! training runs, delay-step sweeps, and timing studies.

use clap::Parser;
use stepdelay::config::{load_config, ExperimentConfig};
use stepdelay::data::DatasetKind;
use stepdelay::error::ConfigError;
use stepdelay::experiment::{
    run_experiment, run_k_sweep, run_timing_study, sweep_table, timing_table,
};
use stepdelay::model::ModelKind;
use stepdelay::pipeline::TimingProfile;
use stepdelay::runtime::{LocalOptimizer, Strategy};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "stepdelay",
    about = "Delayed-pull distributed SGD experiments and pipeline timing studies"
)]
struct Cli {
    /// Config file; flags override its values field by field.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Training strategy.
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,

    /// Delay steps between pulls.
    #[arg(long)]
    k: Option<u64>,

    /// Warm-up iterations run as synchronous SGD.
    #[arg(long)]
    warmup: Option<u64>,

    #[arg(long)]
    workers: Option<u16>,

    #[arg(long)]
    servers: Option<u16>,

    /// Local optimizer used between pulls.
    #[arg(long = "optimizer-local", value_parser = parse_local_opt)]
    optimizer_local: Option<LocalOptimizer>,

    /// Local-gradient coefficient of the GLU rule.
    #[arg(long)]
    alpha: Option<f64>,

    /// Global-gradient coefficient of the GLU rule.
    #[arg(long)]
    beta: Option<f64>,

    /// Local learning rate.
    #[arg(long = "loc-lr")]
    loc_lr: Option<f64>,

    /// Global learning rate in the servers.
    #[arg(long)]
    lr: Option<f64>,

    #[arg(long)]
    momentum: Option<f64>,

    /// Weight decay.
    #[arg(long)]
    wd: Option<f64>,

    #[arg(long = "batch-size")]
    batch_size: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Logical-clock scheduling for byte-identical reruns.
    #[arg(long)]
    deterministic: bool,

    /// Timing profile; attaches simulated time to training runs and feeds
    /// timing studies.
    #[arg(long)]
    profile: Option<PathBuf>,

    /// Output directory for CSV metrics.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Sweep delay steps over an inclusive range, e.g. 1..5.
    #[arg(long = "sweep-k", value_parser = parse_range)]
    sweep_k: Option<(u64, u64)>,

    /// Run the analytic-vs-simulated timing study instead of training
    /// (requires --profile).
    #[arg(long = "timing-study")]
    timing_study: bool,

    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,

    /// Hidden units of the two-layer MLP.
    #[arg(long)]
    hidden: Option<usize>,

    #[arg(long)]
    iterations: Option<u64>,

    /// Dataset size.
    #[arg(long)]
    samples: Option<usize>,

    /// Feature dimension.
    #[arg(long)]
    dim: Option<usize>,

    /// Label noise rate in [0, 1].
    #[arg(long)]
    noise: Option<f64>,

    #[arg(long = "eval-every")]
    eval_every: Option<u64>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| format!("unknown strategy `{s}` (ssgd|asgd|ssd-sgd)"))
}

fn parse_local_opt(s: &str) -> Result<LocalOptimizer, String> {
    LocalOptimizer::parse(s).ok_or_else(|| format!("unknown local optimizer `{s}` (sgd|glu)"))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        format!("unknown model `{s}` (linear-regression|logistic-regression|mlp-2layer)")
    })
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("range `{s}` must look like a..b"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: u64 = b.trim_start_matches('=').trim().parse().map_err(|e| format!("range end: {e}"))?;
    if a == 0 || b < a {
        return Err(format!("range `{s}` must satisfy 1 <= a <= b"));
    }
    Ok((a, b))
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = cli.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = cli.k {
        cfg.hp.k = v;
    }
    if let Some(v) = cli.warmup {
        cfg.hp.wp = v;
    }
    if let Some(v) = cli.workers {
        cfg.hp.workers = v;
    }
    if let Some(v) = cli.servers {
        cfg.servers = v;
    }
    if let Some(v) = cli.optimizer_local {
        cfg.local_optimizer = v;
    }
    if let Some(v) = cli.alpha {
        cfg.hp.alpha = v;
    }
    if let Some(v) = cli.beta {
        cfg.hp.beta = v;
    }
    if let Some(v) = cli.loc_lr {
        cfg.hp.loc_lr = v;
    }
    if let Some(v) = cli.lr {
        cfg.hp.lr = v;
    }
    if let Some(v) = cli.momentum {
        cfg.hp.momentum = v;
    }
    if let Some(v) = cli.wd {
        cfg.hp.wd = v;
    }
    if let Some(v) = cli.batch_size {
        cfg.hp.batch_size = v;
    }
    if let Some(v) = cli.seed {
        cfg.seed = v;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    if let Some(v) = &cli.profile {
        cfg.profile = Some(v.clone());
    }
    if let Some(v) = &cli.out {
        cfg.out_dir = Some(v.clone());
    }
    if let Some(v) = cli.model {
        cfg.model = v;
        // keep the dataset consistent with the model unless set explicitly
        cfg.dataset_kind = if v.is_classifier() {
            DatasetKind::TwoClass
        } else {
            DatasetKind::Regression
        };
    }
    if let Some(v) = cli.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = cli.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = cli.samples {
        cfg.samples = v;
    }
    if let Some(v) = cli.dim {
        cfg.dim = v;
    }
    if let Some(v) = cli.noise {
        cfg.noise = v;
    }
    if let Some(v) = cli.eval_every {
        cfg.eval_interval = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), u8> {
    if cli.timing_study {
        let Some(path) = &cli.profile else {
            eprintln!("error: --timing-study requires --profile <path>");
            return Err(EXIT_CONFIG);
        };
        let profile = TimingProfile::load(path).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_CONFIG
        })?;
        let (a, b) = cli.sweep_k.unwrap_or((1, 5));
        let rows = run_timing_study(&profile, a..=b).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        })?;
        print!("{}", timing_table(&rows));
        return Ok(());
    }

    let cfg = build_config(&cli).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;

    if let Some((a, b)) = cli.sweep_k {
        let rows = run_k_sweep(&cfg, a..=b).map_err(|e| {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        })?;
        print!("{}", sweep_table(&rows));
        for row in rows.iter().filter_map(|r| r.csv.as_ref()) {
            println!("wrote {}", row.display());
        }
        return Ok(());
    }

    let (output, csv) = run_experiment(&cfg).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_RUNTIME
    })?;
    println!("{}", output.summary_line());
    if let Some(path) = csv {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
