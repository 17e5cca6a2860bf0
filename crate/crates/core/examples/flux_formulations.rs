//! Maxwell–Stefan matrices at one composition and the agreement between the
//! driving-force and entropy-variable forms of the fluxes.
//!
//!     cargo run --release --example flux_formulations

use msms::mixture::rescaled_k;
use msms::msalgebra::{self, FluxOperators};
use msms::{statemap, MixtureSpec};

fn main() -> msms::Result<()> {
    let spec = MixtureSpec::from_pairs(
        vec![2.0, 1.0, 1.0],
        vec![1.0, -1.0, 0.0],
        &[0.833, 0.680, 0.168],
        1.0,
    )?;
    let comp = statemap::rho_from_x(&[0.2, 0.3, 0.5], &spec)?;
    println!("rho = {:?}, c_tot = {}", comp.rho, comp.c_tot);

    let ops = FluxOperators::new(&comp, &spec)?;
    println!("A = {}", ops.a);
    println!("column sums of A: {:?}", msalgebra::column_sums(&ops.a));
    println!("A0 = {}", ops.a0);
    println!("B (mobility) = {}", ops.b);

    let k = rescaled_k(&spec, comp.c_tot)?;
    let grad_w = [0.7, -1.3];
    let grad_phi = 2.5;
    let mismatch = msalgebra::flux_equivalence_check(&comp, &k, &grad_w, grad_phi, &spec)?;
    println!("|A0^-1 D' - B grad w| / max(1, |B grad w|) = {mismatch:.2e}");
    Ok(())
}
