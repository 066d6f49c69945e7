use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rbmlab::{RbmError, RbmModel, Result, Scheme, SeedSpec};
use rbmlab_cli::commands;
use rbmlab_cli::config::{ExperimentConfig, InitMode, MetricsSection};

#[derive(Parser)]
#[command(name = "rbmlab", version, about = "Train, sample and diagnose binary RBMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// TOML experiment file; explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Training data; synthetic modes are used when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[arg(long, value_parser = ["csv01", "packed", "idx"])]
    format: Option<String>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    minibatch_size: Option<usize>,
    #[arg(long)]
    n_updates: Option<u64>,
    #[arg(long)]
    n_hidden: Option<usize>,
    #[arg(long)]
    n_checkpoints: Option<usize>,
    #[arg(long)]
    centered: Option<bool>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    n_chains: Option<usize>,
    #[arg(long)]
    ais_temperatures: Option<usize>,
    #[arg(long)]
    ais_runners: Option<usize>,
    #[arg(long)]
    discard: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($flag:expr, $slot:expr) => {
                if let Some(v) = $flag.clone() {
                    $slot = v;
                }
            };
        }
        set!(self.seed, c.seed);
        set!(self.output, c.output);
        if self.data.is_some() {
            c.dataset.path = self.data.clone();
        }
        if self.test_data.is_some() {
            c.dataset.test_path = self.test_data.clone();
        }
        if let Some(f) = &self.format {
            c.dataset.format = toml::Value::String(f.clone())
                .try_into()
                .map_err(|e| RbmError::Input(format!("format: {e}")))?;
        }
        set!(self.scheme, c.train.scheme);
        set!(self.k, c.train.k);
        set!(self.learning_rate, c.train.learning_rate);
        set!(self.minibatch_size, c.train.minibatch_size);
        set!(self.n_updates, c.train.n_updates);
        set!(self.n_hidden, c.train.n_hidden);
        set!(self.n_checkpoints, c.train.n_checkpoints);
        set!(self.centered, c.train.centered);
        set!(self.horizon, c.generate.horizon);
        set!(self.n_points, c.generate.n_points);
        set!(self.n_chains, c.generate.n_chains);
        set!(self.ais_temperatures, c.ais.n_temperatures);
        set!(self.ais_runners, c.ais.n_runners);
        if self.discard.is_some() {
            c.analyze.discard = self.discard;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write log-spaced checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the checkpoints already on disk.
        #[arg(long)]
        resume: bool,
    },
    /// Sample from a checkpoint along a log-spaced grid of Gibbs steps.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "random")]
        init: InitMode,
        #[arg(long)]
        out: PathBuf,
        /// Also record the equilibrium autocorrelation.
        #[arg(long)]
        rho: bool,
    },
    /// Compute metrics of an archive against the reference data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of e2,e3,psd,aai,entropy,energy,ll.
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Summarize metric curves: best t_G, thermalization and mixing times.
    Analyze {
        #[arg(long = "curve", required_unless_present = "rho")]
        curves: Vec<PathBuf>,
        #[arg(long)]
        rho: Vec<PathBuf>,
        #[arg(long, default_value = "e2")]
        metric: String,
        #[arg(long, default_value_t = rbmlab::dynamics::DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Gibbs steps per update used in training, for the regime verdict.
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact partition function and moments next to the AIS estimate.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Random model size when no checkpoint is given.
        #[arg(long, default_value_t = 10)]
        n_visible: usize,
        #[arg(long, default_value_t = 8)]
        n_hidden_units: usize,
        #[arg(long, default_value_t = 0.3)]
        weight_scale: f64,
    },
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, resume } => {
            let cfg = common.resolve()?;
            let m = commands::cmd_train(&cfg, resume)?;
            print_json(&m);
        }
        Command::Generate {
            common,
            checkpoint,
            init,
            out,
            rho,
        } => {
            let cfg = common.resolve()?;
            let index = commands::cmd_generate(&cfg, &checkpoint, init, &out, rho)?;
            print_json(&index);
        }
        Command::Evaluate {
            common,
            archive,
            checkpoint,
            out,
            metrics,
        } => {
            let cfg = common.resolve()?;
            let selection = match metrics {
                Some(list) => MetricsSection {
                    n_sites: cfg.metrics.n_sites,
                    ..MetricsSection::only(&list)?
                },
                None => cfg.metrics.clone(),
            };
            let curve = commands::cmd_evaluate(&cfg, &archive, &checkpoint, &out, &selection)?;
            eprintln!("{} records in {}", curve.records().len(), out.display());
        }
        Command::Analyze {
            curves,
            rho,
            metric,
            tolerance,
            k,
            out,
        } => {
            let a = commands::cmd_analyze(&curves, &rho, &metric, tolerance, k, &out)?;
            print_json(&a);
        }
        Command::Oracle {
            common,
            checkpoint,
            n_visible,
            n_hidden_units,
            weight_scale,
        } => {
            let cfg = common.resolve()?;
            let model = match checkpoint {
                Some(p) => commands::load_model(&p)?.model,
                None => {
                    if n_visible == 0 || n_hidden_units == 0 || !(weight_scale >= 0.0) {
                        return Err(RbmError::Input("invalid random model size".into()));
                    }
                    RbmModel::random_full(n_visible, n_hidden_units, weight_scale, SeedSpec::new(cfg.seed, 0))
                }
            };
            print_json(&commands::cmd_oracle(&cfg, &model)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("RBMLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
