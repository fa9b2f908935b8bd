use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gvm_cli::commands::{self, Overrides};
use gvm_cli::config::{DataSpec, ExperimentConfig};
use gvm_cli::{exit, CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "gvm",
    version,
    about = "Train and evaluate general vector machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'n', long)]
    replicas: Option<usize>,
    /// Directory for result files.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Base directory for relative dataset paths.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Proposal budget per replica.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(short = 'j', long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a function dataset, growing N until training succeeds.
    Fit(Common),
    /// Sweep one control parameter and tabulate risks and scores.
    Sweep(Common),
    /// Train and score replicas on MNIST.
    Recognize(Common),
    /// Train and score replicas on any classification dataset.
    Classify(Common),
    /// Rank training samples by their margin to find suspicious labels.
    Wash {
        #[command(flatten)]
        common: Common,
        /// Number of samples to report.
        #[arg(short, long, default_value_t = 20)]
        k: usize,
    },
    /// Evaluate saved models singly and jointly.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        models: Vec<PathBuf>,
    },
}

fn prepare(common: &Common) -> CliResult<ExperimentConfig> {
    if let Some(t) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let overrides = Overrides {
        seed: common.seed,
        replicas: common.replicas,
        out_dir: common.out.clone(),
        data_dir: common.data_dir.clone(),
        max_steps: common.max_steps,
    };
    overrides.apply(ExperimentConfig::load(&common.config)?)
}

fn print_json(value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(c) => {
            let cfg = prepare(&c)?;
            let r = commands::fit(&cfg, c.data_dir.as_deref())?;
            println!(
                "N = {}  fitting error {:e}  joint error {:e}  design risk {}",
                r.n_hidden,
                r.summary.avg_fitting_error.unwrap_or(f64::NAN),
                r.joint_error,
                r.summary
                    .design_risk
                    .map_or("n/a".into(), |e| format!("{e:e}"))
            );
        }
        Command::Sweep(c) => {
            let cfg = prepare(&c)?;
            let r = commands::sweep(&cfg, c.data_dir.as_deref())?;
            println!("{}", gvm_core::io::SWEEP_HEADER);
            for row in &r.rows {
                println!("{row:?}");
            }
            let at = |k: Option<usize>| k.map_or("none".to_string(), |k| r.values[k].to_string());
            println!("argmin E[Pi]: {} = {}", r.axis, at(r.argmin_design_risk));
            println!("best mean score: {} = {}", r.axis, at(r.best_mean_score));
        }
        Command::Recognize(c) => {
            let cfg = prepare(&c)?;
            if !matches!(cfg.data, DataSpec::Mnist { .. }) {
                return Err(CliError::Config(
                    "recognize needs an MNIST dataset; use classify".into(),
                ));
            }
            print_json(&commands::classify(&cfg, c.data_dir.as_deref())?)?;
        }
        Command::Classify(c) => {
            let cfg = prepare(&c)?;
            print_json(&commands::classify(&cfg, c.data_dir.as_deref())?)?;
        }
        Command::Wash { common, k } => {
            let cfg = prepare(&common)?;
            for e in commands::wash(&cfg, common.data_dir.as_deref(), k)? {
                println!("{}\t{}\t{:e}", e.index, e.label, e.score);
            }
        }
        Command::Eval { common, models } => {
            let cfg = prepare(&common)?;
            print_json(&commands::eval(&cfg, common.data_dir.as_deref(), &models)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
