//! `suda`: batch command line for the support-based adaptation workflow.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "suda", version, about = "Support-based domain adaptation for two-channel stretch sensors")]
pub struct Cli {
    /// Root seed. Every random consumer derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// TOML benchmark config. Keys left out take the compact benchmark defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Built-in settings used when no config file is given.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-size network and the published optimizer settings.
    Full,
    /// Narrow network used by the desk-scale benchmark.
    Compact,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Support,
    Registration,
    Evidence,
    Prediction,
    Loss,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the source/target pair of one benchmark seed.
    Simulate {
        /// Source frames; overrides the config.
        #[arg(long)]
        frames: Option<usize>,
        /// Target frames before the adaptation/test split; overrides the config.
        #[arg(long)]
        target_frames: Option<usize>,
    },
    /// Interior angle at a joint triple for every frame of a BVH file.
    BvhAngle {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        parent: String,
        #[arg(long)]
        vertex: String,
        #[arg(long)]
        child: String,
    },
    /// Fit and serialize the support curve of a sensor CSV.
    FitSupport {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        proxies: Option<usize>,
    },
    /// Map every labeled source frame onto the target support (pseudo-labeled CSV).
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        proxies: Option<usize>,
    },
    /// Register the source onto the target support and train on the pseudo labels.
    Adapt {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        proxies: Option<usize>,
    },
    /// Supervised training on a labeled CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Distribution-based baseline trained on labeled source and unlabeled target.
    Baseline {
        #[arg(long)]
        method: String,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        transfer_weight: Option<f64>,
    },
    /// Test MAE of a model; with --method also writes a result row.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        method: Option<String>,
    },
    /// SuDA MAE over truncated source sizes.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [1000usize, 5000, 10000, 30000])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Mean label per curve-parameter bin for two labeled datasets.
    Evidence {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        proxies: Option<usize>,
    },
    /// Render one SVG figure.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Loss trace CSVs; may be repeated.
        #[arg(long)]
        trace: Vec<PathBuf>,
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Collect `*.result.csv` files into results.csv and report.md.
    Report {
        #[arg(long)]
        results: PathBuf,
    },
    /// Every method over every seed, with artifacts and report.
    Benchmark {
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.downcast_ref::<suda_core::Error>().map_or("internal", |e| e.kind());
            eprintln!("error: kind={kind} {e:#}");
            ExitCode::from(1)
        }
    }
}
