//! Command-line front end.
//!
//! ```text
//! msms run (--scenario FILE | --preset NAME) [--out DIR] [--override KEY=VALUE]... [--plots]
//! msms convergence [--scenario FILE | --preset NAME] [--out DIR] [--override KEY=VALUE]... [--plots]
//! msms show (--scenario FILE | --preset NAME) [--override KEY=VALUE]...
//! msms presets
//! ```
//!
//! Exit codes: 0 success, 1 other failures, 2 invalid scenario or arguments,
//! 3 inner iteration did not converge.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::output;
use crate::scenario::{self, ScenarioFile};
use crate::study;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "msms",
    version,
    about = "Maxwell-Stefan electrolyte mixtures in one space dimension"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write solution.csv and diagnostics.csv.
    Run(RunArgs),
    /// Spatial convergence study; writes convergence.csv.
    Convergence(RunArgs),
    /// Print the effective scenario as JSON.
    Show(Source),
    /// List the built-in presets.
    Presets,
}

#[derive(Debug, Args)]
struct Source {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Dotted-path override such as `time.T=0`; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory (defaults to `outputs.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
}

impl Source {
    fn load(&self, default_preset: Option<&str>) -> Result<ScenarioFile> {
        let base = match (&self.scenario, &self.preset) {
            (Some(path), _) => ScenarioFile::load(path)?,
            (None, Some(name)) => scenario::preset(name)?,
            (None, None) => match default_preset {
                Some(name) => scenario::preset(name)?,
                None => {
                    return Err(Error::InvalidScenario(
                        "give either --scenario FILE or --preset NAME".into(),
                    ))
                }
            },
        };
        base.with_overrides(&self.overrides)
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidScenario(_)
        | Error::InvalidParameter(_)
        | Error::DimensionMismatch(_)
        | Error::Json(_) => EXIT_INVALID,
        Error::NotConverged { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_FAILURE,
    }
}

fn out_dir(args: &RunArgs, file: &ScenarioFile) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&file.outputs.dir))
}

fn run(args: &RunArgs) -> Result<()> {
    let file = args.source.load(None)?;
    let scenario = file.to_scenario()?;
    let dir = out_dir(args, &file);
    let outcome = study::run(&file)?;
    let traj = &outcome.trajectory;
    output::write_file(&dir.join("scenario.json"), &file.to_json())?;
    output::write_file(
        &dir.join("solution.csv"),
        &output::solution_csv(&scenario.grid, &traj.frames),
    )?;
    output::write_file(
        &dir.join("diagnostics.csv"),
        &output::diagnostics_csv(&traj.reports),
    )?;
    let last = traj
        .reports
        .last()
        .expect("reports start with the initial state");
    let worst = traj
        .reports
        .iter()
        .map(|r| r.entropy_residual)
        .fold(f64::NEG_INFINITY, f64::max);
    println!(
        "t = {}: {} steps, H = {:.10}, max entropy residual {:.3e}",
        last.t,
        traj.reports.len() - 1,
        last.entropy,
        worst
    );
    if let Some(fit) = outcome.decay {
        let [a, b] = file.outputs.fit_window;
        println!(
            "relative entropy decay on [{a}, {b}]: rate {:.6}, R^2 {:.6}",
            -fit.slope, fit.r_squared
        );
    }
    if args.plots || file.outputs.plots {
        let mut plots = output::history_plots(&traj.reports);
        if let Some(frame) = traj.frames.last() {
            plots.extend(output::profile_plots(&scenario.grid, frame));
        }
        output::emit_plots(&dir, &plots);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn convergence(args: &RunArgs) -> Result<()> {
    let file = args.source.load(Some("convergence"))?;
    let dir = out_dir(args, &file);
    let result = study::convergence_study(&file)?;
    output::write_file(&dir.join("scenario.json"), &file.to_json())?;
    output::write_file(
        &dir.join("convergence.csv"),
        &output::convergence_csv(&result),
    )?;
    for (i, r) in result.species_rates.iter().enumerate() {
        println!("rho_{}: fitted order {:.4}", i + 1, r.fitted);
    }
    println!("Phi: fitted order {:.4}", result.phi_rate.fitted);
    if args.plots || file.outputs.plots {
        output::emit_plots(
            &dir,
            &[("convergence.svg".into(), output::convergence_plot(&result))],
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(&args),
        Command::Convergence(args) => convergence(&args),
        Command::Show(source) => {
            println!("{}", source.load(None)?.to_json());
            Ok(())
        }
        Command::Presets => {
            for name in scenario::PRESETS {
                println!("{name}");
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Reads a CSV written by this crate into its header and numeric rows; empty
/// cells become `NaN`.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| {
                    if c.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        c.parse::<f64>()
                    }
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}
