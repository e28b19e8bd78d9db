#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use almost_fatou::lab::Row;
use clap::{Parser, Subcommand};

use commands::{CliError, Report};
use config::Config;

/// Experiments with pseudoholomorphic discs and admissible boundary limits.
#[derive(Parser)]
#[command(name = "almost-fatou", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and ∂̄-inverse checks of the Cauchy-Green transform (`N`, `tol`).
    CgSelftest(Args),
    /// Solve a J-holomorphic disc from the affine seed `point + radius·ζ·direction`.
    SolveDisc(Args),
    /// Classify `samples` random points against cones and admissible regions at `point`.
    Regions(Args),
    /// Curve limit, admissible limits over `alpha × eps`, and the filling-disc ladder.
    Lindelof(Args),
    /// Compare `F` along two tangent curves through a transverse disc family.
    Tangent(Args),
    /// Admissible limits at `samples` points of a totally real boundary patch.
    FatouSurvey(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory receiving `report.csv` and `plots/`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn write_csv(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let out = |e: csv::Error| CliError::Output(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(out)?;
    w.write_record(Row::HEADER).map_err(out)?;
    for row in rows {
        w.write_record(row.fields()).map_err(out)?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}

fn write_report(dir: &Path, report: &Report) -> Result<(), CliError> {
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots).map_err(|e| CliError::Output(format!("{}: {e}", plots.display())))?;
    write_csv(&dir.join("report.csv"), &report.rows)?;
    for p in &report.plots {
        plot::write_svg(p, &plots).map_err(|e| CliError::Output(format!("plot {}: {e}", p.name)))?;
    }
    Ok(())
}

fn run(name: &str, args: &Args, f: fn(&Config) -> Result<Report, CliError>) -> Result<Report, CliError> {
    let cfg = Config::load(args.config.as_deref(), &args.set)?;
    match f(&cfg) {
        Ok(report) => {
            write_report(&args.out, &report)?;
            Ok(report)
        }
        Err(err) if err.exit_code() == 1 => {
            let row = Row::new("error", name, 0, f64::NAN, f64::NAN, num_complex::Complex64::new(0.0, 0.0), &err.to_string());
            write_report(&args.out, &Report { rows: vec![row], ..Report::default() })?;
            Err(err)
        }
        Err(err) => Err(err),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, f): (&str, &Args, fn(&Config) -> Result<Report, CliError>) = match &cli.command {
        Command::CgSelftest(a) => ("cg-selftest", a, commands::cg_selftest),
        Command::SolveDisc(a) => ("solve-disc", a, commands::solve_disc_cmd),
        Command::Regions(a) => ("regions", a, commands::regions),
        Command::Lindelof(a) => ("lindelof", a, commands::lindelof),
        Command::Tangent(a) => ("tangent", a, commands::tangent),
        Command::FatouSurvey(a) => ("fatou-survey", a, commands::fatou_survey_cmd),
    };
    match run(name, args, f) {
        Ok(report) => {
            for line in &report.summary {
                println!("{name}: {line}");
            }
            if report.findings.is_empty() {
                println!("{name}: pass");
                ExitCode::SUCCESS
            } else {
                for finding in &report.findings {
                    println!("{name}: finding: {finding}");
                }
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("{name}: error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
