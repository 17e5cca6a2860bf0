//! Spatial convergence at t = 0.01 on nested grids against a fine reference.
//! `--quick` uses a 6400-element reference instead of 25600.
//!
//!     cargo run --release --example convergence_study -- --quick

use msms::scenario::preset;
use msms::study;

fn main() -> msms::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    let mut file = preset("convergence")?;
    if quick {
        file = file.with_overrides(&["convergence.reference_n_p=6400"])?;
    }
    let result = study::convergence_study(&file)?;
    println!("reference: {} elements", result.reference_n_p);
    for level in &result.levels {
        let errs: Vec<String> = level.err_rho.iter().map(|e| format!("{e:.3e}")).collect();
        println!(
            "h = {:<8} err_rho = [{}] err_Phi = {:.3e}",
            level.h,
            errs.join(", "),
            level.err_phi
        );
    }
    for (i, r) in result.species_rates.iter().enumerate() {
        println!(
            "rho_{}: orders {:.3?}, fitted {:.3}",
            i + 1,
            r.slopes,
            r.fitted
        );
    }
    println!(
        "Phi:   orders {:.3?}, fitted {:.3}",
        result.phi_rate.slopes, result.phi_rate.fitted
    );
    Ok(())
}
