//! Command-line front end. [`cli_main`] returns the process exit code:
//! 0 on success, 1 for bad configuration or input, 2 for runtime failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::harness::{
    run_calibration_study_with, run_density_study, run_triads_study_with, CalibrationRecord, Execution, TriadRecord,
};
use crate::io::config::{defaults_json, SEED_ENV_VAR};
use crate::io::csv::{
    aggregate_replicates, read_replicates_csv, write_density_csvs, write_replicates_csv, write_summary_csv, Replicates,
};
use crate::io::figure::{emit_figure, FigureInput, FigureKind};
use crate::io::{file_err, parse_config, ConfigFlags, IoError, Study, StudyGrid};

#[derive(Debug, Parser)]
#[command(
    name = "dietcalib",
    version,
    about = "Measurement-error simulation studies for dietary assessment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation study and write replicate and summary tables.
    Run {
        #[arg(long, value_enum)]
        study: Option<Study>,
        /// JSON file overriding default parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG figures (each with a companion CSV).
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Recompute the summary table from a replicate file.
    Summarize {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to summary.csv next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw figures from a replicate file.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the default configuration of a study as JSON.
    ShowDefaults {
        #[arg(long, value_enum)]
        study: Study,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dietcalib: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), IoError> {
    match command {
        Command::Run {
            study,
            config,
            seed,
            out,
            svg,
            replicates,
            threads,
        } => {
            let text = match &config {
                Some(path) => Some(
                    std::fs::read_to_string(path)
                        .map_err(|e| IoError::config("--config", format!("{}: {e}", path.display())))?,
                ),
                None => None,
            };
            let flags = ConfigFlags {
                study,
                master_seed: seed,
                output_dir: out,
                emit_svg: svg,
                replicates,
                threads,
                env_seed: std::env::var(SEED_ENV_VAR).ok(),
            };
            run(parse_config(text.as_deref(), &flags)?)
        }
        Command::Summarize { input, out } => {
            let records = read_replicates_csv(&input)?;
            let out = out.unwrap_or_else(|| sibling(&input, "summary.csv"));
            write_summary_csv(&aggregate_replicates(&records)?, records.study(), &out)
        }
        Command::Plot { input, out } => {
            let records = read_replicates_csv(&input)?;
            let dir = out.unwrap_or_else(|| sibling(&input, ""));
            plot_replicates(&records, &dir).map(|_| ())
        }
        Command::ShowDefaults { study } => {
            let text = serde_json::to_string_pretty(&defaults_json(study)).expect("defaults serialize");
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(file_err(Path::new("<stdout>")))
        }
    }
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or_else(|| Path::new("")).join(name)
}

fn run(config: crate::io::RunConfig) -> Result<(), IoError> {
    let exec = Execution::Parallel {
        threads: config.threads,
    };
    let dir = &config.output_dir;
    let seed = config.master_seed;
    let records = match &config.grid {
        StudyGrid::Calibration(grid) => Replicates::Calibration(run_calibration_study_with(grid, seed, exec)?),
        StudyGrid::Triads(grid) => Replicates::Triads(run_triads_study_with(grid, seed, exec)?),
        StudyGrid::Density(study) => {
            let curves = run_density_study(study, seed)?;
            write_density_csvs(
                &curves,
                &dir.join("density_curves.csv"),
                &dir.join("density_summary.csv"),
            )?;
            if config.emit_svg {
                for (id, c) in &curves {
                    let name = format!("{}.svg", file_stem(id));
                    emit_figure(FigureInput::Density(c), FigureKind::Density, &dir.join(name))?;
                }
            }
            return Ok(());
        }
    };
    write_replicates_csv(&records, &dir.join("replicates.csv"))?;
    write_summary_csv(&aggregate_replicates(&records)?, config.study, &dir.join("summary.csv"))?;
    if config.emit_svg {
        plot_replicates(&records, dir)?;
    }
    Ok(())
}

/// `calib/a0.5/l0.1/r0` -> `calib_a0.5_l0.1_r0`
fn file_stem(id: &str) -> String {
    id.replace('/', "_")
}

/// Writes every figure the replicate table supports; returns the SVG paths.
pub fn plot_replicates(records: &Replicates, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    let mut written = Vec::new();
    match records {
        Replicates::Calibration(r) => {
            for rho in distinct(r.iter().map(|c: &CalibrationRecord| c.rho_mw)) {
                for kind in [FigureKind::RatioBox { rho_mw: rho }, FigureKind::MaeBox { rho_mw: rho }] {
                    let path = dir.join(format!("{}_r{rho}.svg", kind.name()));
                    emit_figure(FigureInput::Calibration(r), kind, &path)?;
                    written.push(path);
                }
            }
        }
        Replicates::Triads(r) => {
            let mut pairs: Vec<(f64, f64)> = r.iter().map(|t: &TriadRecord| (t.lambda_rx, t.lambda_wx)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            pairs.dedup();
            for (lambda_rx, lambda_wx) in pairs {
                let kind = FigureKind::VcStrip { lambda_rx, lambda_wx };
                let path = dir.join(format!("vc_strip_l{lambda_rx}-{lambda_wx}.svg"));
                emit_figure(FigureInput::Triads(r), kind, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
