//! `bwft`: experiment driver for salient-unit fine-tuning searches.
//!
//! Exit codes: 0 on success, 1 when an experiment run fails, 2 for
//! configuration errors (bad flags, plan files, or names).

mod gendata;
mod plan;
mod profile;
mod render;
mod run;
mod summarize;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bwft::error::Error;
use bwft::model::ZooEntry;
use bwft::report::VarianceConvention;
use plan::ExperimentPlan;

#[derive(Parser)]
#[command(name = "bwft", version, about = "Block-wise fine-tuning experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan: pretrain models, search, and emit CSVs.
    Run(RunArgs),
    /// Print per-layer parameter counts of a zoo model as CSV.
    ParamProfile {
        /// Zoo model name (e.g. mini-vgg).
        #[arg(long)]
        model: String,
        /// Classifier output width.
        #[arg(long, default_value_t = 5)]
        classes: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate runs CSVs from a results directory into a summary table.
    Summarize {
        /// Directory containing runs_<model>_<strategy>.csv files.
        #[arg(long)]
        dir: PathBuf,
        /// Divide variances by n instead of n-1.
        #[arg(long)]
        population_variance: bool,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset file from a key=value task spec.
    GenData {
        /// Task spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render curve and summary CSVs in a results directory to SVG charts.
    Render {
        /// Directory containing CSVs from `run`.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Plan file (key=value lines); flags override its values.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Zoo model to run (repeatable); default is the whole zoo.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Strategy to run (repeatable); default is all of them.
    #[arg(long = "strategy")]
    strategies: Vec<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Fine-tuning learning rate.
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use the 50-epoch reference recipe instead of the desk-scale default.
    #[arg(long)]
    paper_protocol: bool,
    /// Treat batch-norm layers as block delimiters.
    #[arg(long)]
    delimit_batchnorm: bool,
    /// Divide summary variances by n instead of n-1.
    #[arg(long)]
    population_variance: bool,
    #[arg(long)]
    samples_per_class: Option<usize>,
    /// Planted domain shift for the target task
    /// (none | color-shift | frequency-shift | spatial-scale-shift).
    #[arg(long)]
    shift: Option<String>,
    #[arg(long)]
    shift_magnitude: Option<f32>,
    /// Output directory for CSVs and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_plan(args: &RunArgs) -> Result<ExperimentPlan, Error> {
    let mut plan = ExperimentPlan::default();
    if let Some(path) = &args.plan {
        plan.apply_file(&std::fs::read_to_string(path)?)?;
    }
    let mut explicit_models = false;
    let mut explicit_strategies = false;
    for m in &args.models {
        plan.apply("model", m, &mut explicit_models, &mut explicit_strategies)?;
    }
    for s in &args.strategies {
        plan.apply("strategy", s, &mut explicit_models, &mut explicit_strategies)?;
    }
    if let Some(v) = args.repeats {
        plan.repeats = v;
    }
    if let Some(v) = args.seed {
        plan.seed = v;
    }
    if let Some(v) = args.epochs {
        plan.epochs = v;
    }
    if let Some(v) = args.lr {
        plan.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        plan.batch_size = v;
    }
    if args.paper_protocol {
        plan.paper_protocol = true;
    }
    if args.delimit_batchnorm {
        plan.delimit_batchnorm = true;
    }
    if args.population_variance {
        plan.variance = VarianceConvention::Population;
    }
    if let Some(v) = args.samples_per_class {
        plan.samples_per_class = v;
    }
    if let Some(s) = &args.shift {
        plan.shift = bwft::dataset::ShiftKind::from_name(s)?;
    }
    if let Some(v) = args.shift_magnitude {
        plan.shift_magnitude = v;
    }
    if let Some(p) = &args.out {
        plan.out_dir = p.clone();
    }
    plan.validate()?;
    Ok(plan)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let plan = build_plan(&args)?;
            run::cmd_run(&plan)
        }
        Command::ParamProfile { model, classes, out } => {
            let entry = ZooEntry::from_name(&model)?;
            profile::cmd_param_profile(entry, classes, out.as_deref())
        }
        Command::Summarize { dir, population_variance, out } => {
            let convention = if population_variance {
                VarianceConvention::Population
            } else {
                VarianceConvention::Sample
            };
            summarize::cmd_summarize(&dir, convention, out.as_deref())
        }
        Command::GenData { spec, out } => gendata::cmd_gen_data(&spec, &out),
        Command::Render { dir } => render::cmd_render(&dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // Configuration problems exit 2; failures during a run exit 1.
                Error::Config(_) | Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
