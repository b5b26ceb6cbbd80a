use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poolcv::dataset::{self, SynthConfig};
use poolcv::experiment::{self, ExperimentConfig};
use poolcv::report;
use poolcv::svm::TrainConfig;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Compare fold-first and pooled K-fold cross-validation model selection.
#[derive(Debug, Parser)]
#[command(name = "poolcv", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic labeled dataset as CSV.
    Synth(SynthArgs),
    /// Run the repeated classic-versus-pooled comparison on a CSV dataset.
    Run(RunArgs),
    /// Re-render CSV and markdown tables from an existing report.json.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 31)]
    n_right: usize,
    #[arg(long, default_value_t = 25)]
    n_left: usize,
    #[arg(long, default_value_t = 16)]
    features: usize,
    /// Planted features as `index:delta,...`; empty for none.
    #[arg(long, default_value = dataset::DEFAULT_PLANTED)]
    planted: String,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    /// Master seed for every random split.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0.3)]
    test_fraction: f64,
    #[arg(long, default_value_t = 2)]
    max_subset: usize,
    #[arg(long, default_value_t = 1.0)]
    box_constraint: f64,
    #[arg(long, default_value_t = 1e-3)]
    kkt_tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: usize,
    /// Train on raw features instead of z-scored ones.
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, default_value_t = 0.8)]
    relevance_cutoff: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Worker threads; 0 picks automatically. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Fail with exit code 3 if any solver run hit its iteration cap or any
    /// training partition held a single class.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Path to report.json.
    input: PathBuf,
    /// Output directory for the re-rendered tables.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<poolcv::Error> for Failure {
    fn from(e: poolcv::Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }
}

fn refuse_overwrite(paths: &[PathBuf], force: bool) -> Result<(), Failure> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(Failure::usage(format!(
            "{} already exists; pass --force to overwrite",
            p.display()
        ))),
        None => Ok(()),
    }
}

fn output_paths(dir: &Path) -> Vec<PathBuf> {
    report::output_file_names()
        .iter()
        .map(|n| dir.join(n))
        .collect()
}

fn synth(args: SynthArgs) -> Result<(), Failure> {
    let planted =
        dataset::parse_planted(&args.planted).map_err(|e| Failure::usage(e.to_string()))?;
    let cfg = SynthConfig {
        n_right: args.n_right,
        n_left: args.n_left,
        n_features: args.features,
        planted,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    refuse_overwrite(std::slice::from_ref(&args.out), args.force)?;
    let ds = dataset::synthesize_dataset(&cfg)?;
    ds.save_csv(&args.out)?;
    eprintln!(
        "wrote {} samples x {} features to {}",
        ds.n_samples(),
        ds.n_features(),
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = ExperimentConfig {
        iterations: args.iterations,
        folds: args.folds,
        test_fraction: args.test_fraction,
        max_subset_size: args.max_subset,
        train: TrainConfig {
            box_constraint: args.box_constraint,
            kkt_tolerance: args.kkt_tolerance,
            max_sweeps: args.max_sweeps,
        },
        standardize: !args.no_standardize,
        master_seed: args.seed,
        relevance_cutoff: args.relevance_cutoff,
        alpha: args.alpha,
    };
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    refuse_overwrite(&output_paths(&args.out), args.force)?;
    if args.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot configure threads: {e}")))?;
    }

    let ds = dataset::load_csv(&args.data)?;
    if cfg.max_subset_size > ds.n_features() {
        return Err(Failure::usage(format!(
            "--max-subset {} exceeds the {} features in {}",
            cfg.max_subset_size,
            ds.n_features(),
            args.data.display()
        )));
    }
    let result = experiment::run_experiment(&ds, &cfg)?;
    let flagged = result.flags.not_converged_cells + result.flags.degenerate_cells;
    if args.strict && flagged > 0 {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!(
                "{} cells hit the iteration cap and {} were degenerate",
                result.flags.not_converged_cells, result.flags.degenerate_cells
            ),
        });
    }
    report::emit_report(&result, &args.out)?;
    if flagged > 0 {
        eprintln!("warning: {flagged} loss-table cells flagged; see report.json");
    }
    eprintln!(
        "median test loss: classic {:.3}, pooled {:.3} (Mann-Whitney p = {:.3}); unique subsets: classic {}, pooled {}",
        result.summary.classic.median,
        result.summary.pooled.median,
        result.utest.p_two_sided,
        result.unique_subset_counts.classic,
        result.unique_subset_counts.pooled
    );
    Ok(())
}

fn rerender(args: ReportArgs) -> Result<(), Failure> {
    let targets: Vec<PathBuf> = output_paths(&args.out)
        .into_iter()
        .filter(|p| !p.ends_with(report::REPORT_JSON))
        .collect();
    refuse_overwrite(&targets, args.force)?;
    let parsed = report::load_report(&args.input)?;
    report::render_tables(&parsed, &args.out)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Report(a) => rerender(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
