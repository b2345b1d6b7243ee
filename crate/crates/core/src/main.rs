use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wildfire_rnn::cli;
use wildfire_rnn::config::RunConfig;
use wildfire_rnn::ingest::ParseMode;
use wildfire_rnn::nn::ModelKind;
use wildfire_rnn::sequence::Task;
use wildfire_rnn::Result;

/// Reconstruct wildfires from active-fire detections and evaluate LR, LSTM
/// and GRU spread classifiers.
#[derive(Parser, Debug)]
#[command(name = "wildfire-rnn", version)]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory for intermediate files (defaults to the output directory).
    #[arg(long, global = true)]
    work: Option<PathBuf>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read, filter and encode a detection file.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        /// `lat,lon,elevation` lookup for rows without elevation.
        #[arg(long)]
        elevation: Option<PathBuf>,
        /// Skip malformed rows instead of aborting.
        #[arg(long)]
        skip_bad_rows: bool,
    },
    /// Group encoded points into wildfires.
    BuildFires {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        spatial_radius_m: Option<f64>,
        #[arg(long)]
        temporal_radius_s: Option<i64>,
    },
    /// Summarize wildfire lengths.
    Stats,
    /// Write supervised samples for each sequence length.
    MakeDataset(TaskArgs),
    /// Train one model and save a checkpoint.
    Train {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, default_value = "gru")]
        model: ModelKind,
        #[arg(long)]
        lw: usize,
    },
    /// Run the full evaluation protocol.
    Evaluate(EvalArgs),
    /// Re-render tables and plot data from a saved report.
    Report {
        #[arg(long)]
        task: Option<Task>,
    },
    /// Generate synthetic detections.
    SynthGen {
        #[arg(long)]
        fires: Option<usize>,
        #[arg(long)]
        length_min: Option<usize>,
        #[arg(long)]
        length_max: Option<usize>,
        #[arg(long)]
        p_stay: Option<f64>,
        #[arg(long)]
        step_max_m: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct TaskArgs {
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    lw_min: Option<usize>,
    #[arg(long)]
    lw_max: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Comma-separated model kinds, e.g. `lr,gru`.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long)]
    repeats: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl TaskArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.task, self.task);
        set(&mut c.lw_min, self.lw_min);
        set(&mut c.lw_max, self.lw_max);
    }
}

fn run(cli: Cli) -> (&'static str, Result<String>) {
    let mut config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => return ("config", Err(e)),
        },
        None => RunConfig::default(),
    };
    set(&mut config.seed, cli.seed);
    set(&mut config.out_dir, cli.out);
    if cli.work.is_some() {
        config.work_dir = cli.work;
    }
    match cli.command {
        Command::Ingest {
            input,
            elevation,
            skip_bad_rows,
        } => {
            if input.is_some() {
                config.input = input;
            }
            if elevation.is_some() {
                config.elevation = elevation;
            }
            if skip_bad_rows {
                config.parse_mode = ParseMode::Skip;
            }
            ("ingest", cli::cmd_ingest(&config))
        }
        Command::BuildFires {
            k,
            spatial_radius_m,
            temporal_radius_s,
        } => {
            set(&mut config.k, k);
            set(&mut config.spatial_radius_m, spatial_radius_m);
            set(&mut config.temporal_radius_s, temporal_radius_s);
            ("build-fires", cli::cmd_build_fires(&config))
        }
        Command::Stats => ("stats", cli::cmd_stats(&config)),
        Command::MakeDataset(task) => {
            task.apply(&mut config);
            ("make-dataset", cli::cmd_make_dataset(&config))
        }
        Command::Train { task, model, lw } => {
            task.apply(&mut config);
            ("train", cli::cmd_train(&config, model, lw))
        }
        Command::Evaluate(args) => {
            args.task.apply(&mut config);
            set(&mut config.models, args.models);
            set(&mut config.repeats, args.repeats);
            ("evaluate", cli::cmd_evaluate(&config))
        }
        Command::Report { task } => {
            set(&mut config.task, task);
            ("report", cli::cmd_report(&config))
        }
        Command::SynthGen {
            fires,
            length_min,
            length_max,
            p_stay,
            step_max_m,
        } => {
            set(&mut config.synth_fires, fires);
            set(&mut config.synth_length_min, length_min);
            set(&mut config.synth_length_max, length_max);
            set(&mut config.synth_p_stay, p_stay);
            set(&mut config.synth_step_max_m, step_max_m);
            ("synth-gen", cli::cmd_synth_gen(&config))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        (_, Ok(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        (stage, Err(e)) => {
            eprintln!("error in {stage}: {e}");
            ExitCode::FAILURE
        }
    }
}
