//! Non-equilibrium boundary potential Φ(0) = 10, Φ(1) = 0 for several molar
//! masses of species 1 (first) and species 2 (second group).
//!
//!     cargo run --release --example field_driven -- 8

use msms::scenario::preset;
use msms::Stepper;

fn main() -> msms::Result<()> {
    let horizon: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(8.0);
    for name in [
        "example3",
        "example3-m4",
        "example3-m6",
        "example4",
        "example4-m4",
        "example4-m6",
    ] {
        let file = preset(name)?;
        let mut scenario = file.to_scenario()?;
        scenario.horizon = horizon;
        let stepper = Stepper::new(scenario)?;
        let traj = stepper.run()?;
        let last = traj.frames.last().expect("final frame");
        let iterations: usize = traj.reports.iter().map(|r| r.iterations).sum();
        print!("{name:12} M = {:?}: ", file.species.molar_masses);
        for j in [0, 25, 50, 75, 100] {
            let c = &last.comps[j];
            print!("({:.3} {:.3} {:.3}) ", c.rho[0], c.rho[1], c.rho[2]);
        }
        println!("[{iterations} inner iterations]");
    }
    Ok(())
}
