use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use noisy_teleport::sweep::{emit_figure_data, run_sweep_with_progress, FigureId, SweepConfig};
use noisy_teleport::Error;

/// Sweeps the noisy teleportation protocols over (alpha, gamma) and writes CSV data.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// TOML sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Also write the data panels of one figure.
    #[arg(long, value_parser = parse_figure)]
    figure: Option<FigureId>,
    /// Directory for figure panels.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Keep completed rows of an existing output file.
    #[arg(long)]
    resume: bool,
}

fn parse_figure(s: &str) -> Result<FigureId, String> {
    s.parse()
}

fn init_threads() -> Result<(), Error> {
    let Ok(value) = std::env::var("SIM_THREADS") else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config { location: "SIM_THREADS".into(), message: format!("'{value}' is not a positive integer") })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config { location: "SIM_THREADS".into(), message: e.to_string() })
}

fn run(args: &Args) -> Result<(), Error> {
    init_threads()?;
    let mut cfg = SweepConfig::from_file(&args.config)?;
    cfg.resume |= args.resume;
    let records = run_sweep_with_progress(&cfg, |done, total| {
        eprintln!("progress {done}/{total}");
    })?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("warning: {failed} grid points failed; see the error column of {}", cfg.output_path.display());
    }
    if let Some(figure) = args.figure {
        for path in emit_figure_data(&records, figure, &args.out, &cfg.provenance_header())? {
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: code={} message={:?}", e.code(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
