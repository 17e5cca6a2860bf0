//! Three ions with equal molar masses and zero boundary potential relax to a
//! symmetric equilibrium. Pass a horizon to shorten the run (default 17).
//!
//!     cargo run --release --example equilibrium -- 17

use msms::scenario::preset;
use msms::Stepper;

fn main() -> msms::Result<()> {
    let horizon: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(17.0);
    let mut scenario = preset("example1")?.to_scenario()?;
    scenario.horizon = horizon;
    let stepper = Stepper::new(scenario)?;

    let mut worst_residual = f64::NEG_INFINITY;
    let traj = stepper.run_with(None, |_, _, r| {
        worst_residual = worst_residual.max(r.entropy_residual)
    })?;
    let last = traj.frames.last().expect("final frame");
    let report = traj.reports.last().expect("final report");

    let n = last.n_nodes();
    let asymmetry = (0..last.n_species())
        .flat_map(|i| {
            let rho = last.rho(i);
            (0..n).map(move |j| (rho[j] - rho[n - 1 - j]).abs())
        })
        .fold(0.0, f64::max);
    println!(
        "t = {}: H = {:.10}, masses {:?}",
        report.t, report.entropy, report.masses
    );
    println!(
        "max entropy residual {worst_residual:.2e}, stationarity {:.2e}, asymmetry {asymmetry:.2e}",
        report.stationarity
    );
    for j in (0..n).step_by(10) {
        let c = &last.comps[j];
        println!(
            "y = {:.2}  rho = ({:.5}, {:.5}, {:.5})  Phi = {:.5}",
            stepper.grid().node(j),
            c.rho[0],
            c.rho[1],
            c.rho[2],
            last.phi[j]
        );
    }
    Ok(())
}
