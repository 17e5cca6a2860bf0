//! Entropy variables to densities and back, including a case where the
//! exponentials over- and underflow.
//!
//!     cargo run --release --example inversion

use msms::statemap::{self, EntropyVars, FixedPointProblem};
use msms::MixtureSpec;

fn main() -> msms::Result<()> {
    let spec = MixtureSpec::from_pairs(
        vec![6.0, 1.0, 1.0],
        vec![1.0, 1.0, 0.0],
        &[0.833, 0.680, 0.168],
        1.0,
    )?;
    for (w, phi) in [
        (vec![0.0, 0.0], 0.0),
        (vec![1.5, -2.0], 3.0),
        (vec![-40.0, 60.0], -1.0),
    ] {
        let ev = EntropyVars::new(w, phi);
        let fp = FixedPointProblem::new(&ev, &spec)?;
        let root = statemap::solve_s0(&fp, 1e-14)?;
        let comp = statemap::invert(&ev, &spec)?;
        let back = statemap::w_from_x(&comp.x, phi, &spec)?;
        println!(
            "w = {:?}, phi = {phi}: s0 = {:.6e} after {} Newton steps, rho = {:?}, w again = {:?}",
            ev.w, root.s0, root.iterations, comp.rho, back
        );
    }

    let jac = statemap::jacobian_rho(&EntropyVars::new(vec![0.2, -0.4], 1.0), &spec)?;
    println!("d rho' / d(w, phi) = {jac}");
    Ok(())
}
