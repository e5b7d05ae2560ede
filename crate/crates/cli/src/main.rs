use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use fractaldim::io::{builtin_manifest, load_checkpoint, Arch, ShapeManifest};
use fractaldim::laws::{run_suite, LawReport, Suite};
use fractaldim::report::{
    analyze_checkpoint, analyze_manifest, emit_plot, format_table, plot_series, segment_summary,
    segment_to_file, write_dimensions_csv, write_report, DEFAULT_LAMBDAS,
};
use fractaldim::{Error, Result, ScheduleKind};

#[derive(Parser)]
#[command(
    name = "fractaldim",
    version,
    about = "Box-counting dimension of weight tensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate per-layer dimensions for a checkpoint, manifest or builtin architecture.
    Analyze(AnalyzeArgs),
    /// Run seeded law suites.
    Verify(VerifyArgs),
    /// Write per-block statistics of one layer as CSV.
    Segment(SegmentArgs),
    /// Print the builtin shape manifest of an architecture.
    Shapes(ShapesArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["checkpoint", "arch", "manifest"])))]
struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated dilation factors.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAMBDAS)]
    lambdas: Vec<u32>,
    #[arg(long, default_value = "geometric")]
    schedule: ScheduleKind,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    /// Also write an SVG per layer into the plot directory.
    #[arg(long, requires = "plot_dir")]
    svg: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    layer: String,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShapesArgs {
    #[arg(long)]
    arch: String,
}

fn analyze(args: AnalyzeArgs) -> Result<u8> {
    let report = if let Some(path) = &args.checkpoint {
        analyze_checkpoint(path, &args.lambdas, args.schedule)?
    } else {
        let manifest = match (&args.arch, &args.manifest) {
            (Some(arch), _) => builtin_manifest(arch.parse::<Arch>()?),
            (None, Some(path)) => ShapeManifest::load(path)?,
            (None, None) => unreachable!("clap enforces a source"),
        };
        analyze_manifest(&manifest, &args.lambdas, args.schedule)?
    };
    let report = report.with_timestamp();

    // Writes happen one after another once every layer has been analyzed.
    if let Some(path) = &args.out {
        write_report(&report, path)?;
    }
    if let Some(path) = &args.csv {
        write_dimensions_csv(&report, path)?;
    }
    if let Some(dir) = &args.plot_dir {
        emit_plot(&plot_series(&report), dir, args.svg)?;
    }
    print!("{}", format_table(&report));
    Ok(0)
}

fn print_law(report: &LawReport) {
    let status = if report.passed() { "pass" } else { "FAIL" };
    println!(
        "{status:<4}  {:<34}  trials={:<6} failures={}",
        report.law_name, report.trials, report.failures
    );
    if let Some(w) = &report.witness {
        println!("      witness: {w}");
    }
}

fn verify(args: VerifyArgs) -> Result<u8> {
    let suites = Suite::select(&args.suite)?;
    let mut failed = false;
    for suite in suites {
        for report in run_suite(suite, args.seed, args.trials)? {
            failed |= !report.passed();
            print_law(&report);
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn segment(args: SegmentArgs) -> Result<u8> {
    let records = load_checkpoint(&args.checkpoint)?;
    let record = records
        .iter()
        .find(|r| r.name == args.layer)
        .ok_or_else(|| Error::UnknownLayer(args.layer.clone()))?;
    let summary = segment_summary(record, args.r)?;
    segment_to_file(&summary, &args.out)?;
    println!(
        "{}: {} blocks at r={}, {} trimmed cells",
        summary.layer,
        summary.blocks.len(),
        summary.r,
        summary.trimmed_cells
    );
    Ok(0)
}

fn shapes(args: ShapesArgs) -> Result<u8> {
    let manifest = builtin_manifest(args.arch.parse::<Arch>()?);
    println!("{}", manifest.to_json()?);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Verify(a) => verify(a),
        Command::Segment(a) => segment(a),
        Command::Shapes(a) => shapes(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
