use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scrapflow::pipeline::{run, CoefficientSource, PipelineConfig, Stage, StageStatus};
use scrapflow::regression::{Covariance, Regressor};
use scrapflow::trade::TimeWindow;
use scrapflow::Error;

/// Scrap-steel trade, firm and capacity pipeline.
#[derive(Parser)]
#[command(name = "scrapflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse trade data and build windowed networks.
    Ingest,
    /// Extract disparity-filter backbones (runs ingest first).
    Backbone,
    /// Match scrap firms in the registry and summarise them.
    Firms,
    /// Fit topic models to matched firm descriptions (runs firms first).
    Topics,
    /// Fit the capacity regression.
    Regress,
    /// Extrapolate additional firms from planned capacity.
    Extrapolate,
    /// Run every stage whose inputs are configured.
    Run,
}

impl Command {
    fn targets(self) -> Vec<Stage> {
        match self {
            Command::Ingest => vec![Stage::Ingest],
            Command::Backbone => vec![Stage::Backbone],
            Command::Firms => vec![Stage::Firms],
            Command::Topics => vec![Stage::Topics],
            Command::Regress => vec![Stage::Regress],
            Command::Extrapolate => vec![Stage::Extrapolate],
            Command::Run => Stage::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table formats (csv, json).
    #[arg(long, global = true, value_delimiter = ',')]
    formats: Option<Vec<String>>,
    /// Trade flow file.
    #[arg(long, global = true)]
    trade: Option<PathBuf>,
    /// Firm registry file.
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Installed capacity per country.
    #[arg(long, global = true)]
    capacity: Option<PathBuf>,
    /// Planned EAF capacity per country.
    #[arg(long, global = true)]
    plan: Option<PathBuf>,
    /// Ready-made regression observations.
    #[arg(long, global = true)]
    observations: Option<PathBuf>,
    /// Commodity code prefix.
    #[arg(long, global = true)]
    prefix: Option<String>,
    /// Time windows (YYYY-YYYY), repeatable or comma-separated.
    #[arg(long = "window", global = true, value_delimiter = ',')]
    windows: Option<Vec<TimeWindow>>,
    /// Backbone significance level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Registry matching keyword.
    #[arg(long, global = true)]
    keyword: Option<String>,
    /// Candidate topic counts, comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    /// Gibbs sweeps per topic model.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Regressors, comma-separated.
    #[arg(long, global = true, value_delimiter = ',')]
    regressors: Option<Vec<Regressor>>,
    /// Heteroskedasticity-robust (HC1) standard errors.
    #[arg(long, global = true)]
    robust: bool,
    /// Fixed firm coefficient (kt/yr per firm) instead of the fitted one.
    #[arg(long, global = true, requires = "coefficient_sd")]
    coefficient: Option<f64>,
    /// Standard deviation of the fixed firm coefficient.
    #[arg(long, global = true, requires = "coefficient")]
    coefficient_sd: Option<f64>,
    /// Use the published firm coefficient.
    #[arg(long, global = true, conflicts_with = "coefficient")]
    published_coefficient: bool,
    /// Coefficient draws for the company-count interval.
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// Population resampling iterations.
    #[arg(long, global = true)]
    population_iterations: Option<usize>,
}

impl Overrides {
    fn apply(self, cfg: &mut PipelineConfig) {
        fn set<T>(slot: &mut T, value: Option<T>) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        set(&mut cfg.output_dir, self.out);
        set(&mut cfg.formats, self.formats);
        let i = &mut cfg.inputs;
        for (slot, v) in [
            (&mut i.trade, self.trade),
            (&mut i.registry, self.registry),
            (&mut i.capacity, self.capacity),
            (&mut i.plan, self.plan),
            (&mut i.observations, self.observations),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
        set(&mut cfg.trade.commodity_prefix, self.prefix);
        set(&mut cfg.trade.windows, self.windows);
        set(&mut cfg.backbone.alpha, self.alpha);
        set(&mut cfg.firms.keyword, self.keyword);
        set(&mut cfg.topics.grid, self.grid);
        set(&mut cfg.topics.iterations, self.iterations);
        set(&mut cfg.regression.regressors, self.regressors);
        if self.robust {
            cfg.regression.covariance = Covariance::Robust;
        }
        let x = &mut cfg.extrapolation;
        if self.published_coefficient {
            x.coefficient_source = CoefficientSource::Published;
        }
        if let (Some(estimate), Some(sd)) = (self.coefficient, self.coefficient_sd) {
            x.coefficient_source = CoefficientSource::Explicit;
            x.coefficient_estimate = Some(estimate);
            x.coefficient_sd = Some(sd);
        }
        set(&mut x.coefficient_draws, self.draws);
        set(&mut x.population_iterations, self.population_iterations);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let mut cfg = match &cli.opts.config {
        Some(path) => match PipelineConfig::load(path) {
            Ok(c) => c,
            Err(e) => return config_error(&e),
        },
        None => PipelineConfig::default(),
    };
    cli.opts.apply(&mut cfg);

    let report = match run(&cfg, &cli.command.targets()) {
        Ok(r) => r,
        Err(e) => return config_error(&e),
    };
    for s in &report.manifest.stages {
        let status = match s.status {
            StageStatus::Completed => "completed",
            StageStatus::NotRun => "not run",
            StageStatus::Failed => "FAILED",
        };
        println!("{:<12} {:<10} {}", s.stage.name(), status, s.detail);
    }
    println!(
        "{} artifacts in {}",
        report.manifest.artifacts.len(),
        cfg.output_dir.display()
    );
    if report.succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn config_error(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}
