//! Builds a scenario file by hand, applies overrides, runs it and writes the
//! CSV tables and plots into a directory (default `scenario_out`).
//!
//!     cargo run --release --example scenario_file -- out_dir

use std::path::PathBuf;

use msms::scenario::preset;
use msms::{output, study};

fn main() -> msms::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "scenario_out".into()),
    );
    // four species, one of them negatively charged
    let base = preset("example3")?;
    let file = base.with_overrides(&[
        "species={\"n\":4,\"M\":[1,2,1,3],\"z\":[1,-1,1,0],\"Dms\":[[0,0.8,0.5,0.3],[0.8,0,0.4,0.6],[0.5,0.4,0,0.2],[0.3,0.6,0.2,0]]}",
        "initial={\"rho\":[[0.1],[0.1],[0.2],[0.6]]}",
        "bc.phi_left=2",
        "time.T=0.5",
        "time.output_every=50",
    ])?;
    println!("{}", file.to_json());
    let scenario = file.to_scenario()?;
    let outcome = study::run(&file)?;
    let traj = &outcome.trajectory;
    output::write_file(
        &dir.join("solution.csv"),
        &output::solution_csv(&scenario.grid, &traj.frames),
    )?;
    output::write_file(
        &dir.join("diagnostics.csv"),
        &output::diagnostics_csv(&traj.reports),
    )?;
    let mut plots = output::history_plots(&traj.reports);
    plots.extend(output::profile_plots(
        &scenario.grid,
        traj.frames.last().expect("final frame"),
    ));
    let written = output::emit_plots(&dir, &plots);
    println!(
        "wrote {} frames, {} plots to {}",
        traj.frames.len(),
        written.len(),
        dir.display()
    );
    Ok(())
}
