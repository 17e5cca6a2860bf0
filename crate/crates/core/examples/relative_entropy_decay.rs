//! A heavy first species (M_1 = 6): the relative entropy with respect to the
//! steady state decays exponentially.
//!
//!     cargo run --release --example relative_entropy_decay

use msms::scenario::preset;
use msms::study;

fn main() -> msms::Result<()> {
    let file = preset("example2")?;
    let outcome = study::run(&file)?;
    let steady = outcome
        .steady
        .as_ref()
        .expect("relative entropy is tracked");
    println!("steady state found at t = {:.2}", steady.t);
    for r in outcome.trajectory.reports.iter().step_by(250) {
        println!(
            "t = {:5.2}  H* = {:.6e}",
            r.t,
            r.relative_entropy.unwrap_or(f64::NAN)
        );
    }
    if let Some(fit) = outcome.decay {
        println!(
            "fit on [1, 4]: H* ~ exp({:.4} t), R^2 = {:.6}",
            fit.slope, fit.r_squared
        );
    }
    Ok(())
}
