//! Without electric field the steady state is the constant state with the
//! initial masses; the decay rates of the relative entropy are similar for
//! different molar masses.
//!
//!     cargo run --release --example no_field

use msms::scenario::preset;
use msms::study;

fn main() -> msms::Result<()> {
    for name in ["example5", "example5-m2", "example5-m6"] {
        let file = preset(name)?;
        let outcome = study::run(&file)?;
        let last = outcome.trajectory.frames.last().expect("final frame");
        let steady = outcome
            .steady
            .as_ref()
            .expect("relative entropy is tracked");
        let spread = (0..3)
            .map(|i| {
                let r = last.rho(i);
                r.iter().cloned().fold(f64::MIN, f64::max)
                    - r.iter().cloned().fold(f64::MAX, f64::min)
            })
            .fold(0.0, f64::max);
        let rate = outcome.decay.map_or(f64::NAN, |f| -f.slope);
        println!(
            "M_1 = {}: steady rho = {:?}, final spread {spread:.2e}, decay rate {rate:.4}",
            file.species.molar_masses[0], steady.comps[0].rho
        );
    }
    Ok(())
}
