//! Maxwell–Stefan matrices and the equivalent formulations of the diffusion fluxes.
//!
//! For a composition `rho` and rescaled diffusivities `k`, the Maxwell–Stefan
//! relations read `D = -A J`. Eliminating the last species gives `D' = -A0 J'`;
//! in entropy variables the same fluxes are `J' = -B grad w` with the mobility
//! matrix `B = A0^{-1} R / c_tot`, `R_ij = rho_i delta_ij - rho_i rho_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mixture::{driving_force, rescaled_k, Composition, MixtureSpec};
use crate::statemap;

/// All pointwise operators for one composition.
#[derive(Debug, Clone)]
pub struct FluxOperators {
    pub a: DMatrix<f64>,
    pub a0: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl FluxOperators {
    /// Builds `A`, `A0`, `C`, `B` and `R` at an interior composition.
    pub fn new(comp: &Composition, spec: &MixtureSpec) -> Result<Self> {
        let k = rescaled_k(spec, comp.c_tot)?;
        Ok(FluxOperators {
            a: build_a(&comp.rho, &k)?,
            a0: build_a0(&comp.rho, &k)?,
            c: build_c(&comp.rho, &k)?,
            b: build_b(&comp.rho, comp.c_tot, &k)?,
            r: projection(&comp.rho),
        })
    }
}

fn check_dims(rho: &[f64], k: &DMatrix<f64>) -> Result<usize> {
    let n = rho.len();
    if n < 2 || k.nrows() != n || k.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "composition of length {n} with a {}x{} diffusivity matrix",
            k.nrows(),
            k.ncols()
        )));
    }
    Ok(n)
}

/// `A_ii = sum_{l != i} k_il rho_l`, `A_ij = -k_ij rho_i`.
pub fn build_a(rho: &[f64], k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_dims(rho, k)?;
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for l in 0..n {
            if l != i {
                diag += k[(i, l)] * rho[l];
                a[(i, l)] = -k[(i, l)] * rho[i];
            }
        }
        a[(i, i)] = diag;
    }
    Ok(a)
}

/// Column sums of `A`, accumulated off-diagonal first. Vanish identically for
/// matrices from [`build_a`] with a symmetric `k`.
pub fn column_sums(a: &DMatrix<f64>) -> Vec<f64> {
    (0..a.ncols())
        .map(|j| {
            let off: f64 = (0..a.nrows()).filter(|&i| i != j).map(|i| a[(i, j)]).sum();
            off + a[(j, j)]
        })
        .collect()
}

/// Reduced `(n-1)x(n-1)` matrix with `D' = -A0 J'`.
pub fn build_a0(rho: &[f64], k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_dims(rho, k)?;
    let last = n - 1;
    let mut a0 = DMatrix::zeros(n - 1, n - 1);
    for i in 0..last {
        let mut diag = k[(i, last)];
        for l in 0..last {
            if l != i {
                diag += (k[(i, l)] - k[(i, last)]) * rho[l];
                a0[(i, l)] = -(k[(i, l)] - k[(i, last)]) * rho[i];
            }
        }
        a0[(i, i)] = diag;
    }
    Ok(a0)
}

/// `C_ij = A_ij/rho_i - A_in/rho_i - A_nj/rho_n + A_nn/rho_n`; requires every `rho_i > 0`.
pub fn build_c(rho: &[f64], k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = check_dims(rho, k)?;
    if let Some(i) = rho.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::SingularComposition(format!(
            "C needs a strictly positive composition, rho[{i}] = {}",
            rho[i]
        )));
    }
    let a = build_a(rho, k)?;
    let last = n - 1;
    let mut c = DMatrix::zeros(n - 1, n - 1);
    for i in 0..last {
        for j in 0..last {
            c[(i, j)] =
                (a[(i, j)] - a[(i, last)]) / rho[i] + (a[(last, last)] - a[(last, j)]) / rho[last];
        }
    }
    Ok(c)
}

/// `R_ij = rho_i delta_ij - rho_i rho_j` over the first `n-1` species.
pub fn projection(rho: &[f64]) -> DMatrix<f64> {
    let m = rho.len() - 1;
    DMatrix::from_fn(m, m, |i, j| {
        let d = if i == j { rho[i] } else { 0.0 };
        d - rho[i] * rho[j]
    })
}

/// Mobility matrix `B = A0^{-1} R / c_tot`, so that `B grad w = A0^{-1} D'`.
pub fn build_b(rho: &[f64], c_tot: f64, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dims(rho, k)?;
    let a0 = build_a0(rho, k)?;
    let r = projection(rho);
    let lu = a0.lu();
    let mut b = lu
        .solve(&r)
        .ok_or_else(|| Error::SingularComposition(format!("A0 is singular at rho = {rho:?}")))?;
    b /= c_tot;
    Ok(b)
}

/// `c_tot C^{-1}`, the alternative scaling of the mobility; equals `c_tot^2 B`.
pub fn c_scaled_inverse(rho: &[f64], c_tot: f64, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = build_c(rho, k)?;
    let inv = c
        .try_inverse()
        .ok_or_else(|| Error::SingularComposition(format!("C is singular at rho = {rho:?}")))?;
    Ok(inv * c_tot)
}

/// `J' = -A0^{-1} D'`.
pub fn flux_from_driving(rho: &[f64], k: &DMatrix<f64>, d_prime: &[f64]) -> Result<Vec<f64>> {
    let n = check_dims(rho, k)?;
    if d_prime.len() != n - 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} reduced driving forces for {n} species",
            d_prime.len()
        )));
    }
    let a0 = build_a0(rho, k)?;
    let j = a0
        .lu()
        .solve(&DVector::from_column_slice(d_prime))
        .ok_or_else(|| Error::SingularComposition(format!("A0 is singular at rho = {rho:?}")))?;
    Ok(j.iter().map(|v| -v).collect())
}

/// Appends `J_n = -sum J_i`.
pub fn complete_flux(j_prime: &[f64]) -> Vec<f64> {
    let mut j = j_prime.to_vec();
    j.push(-j_prime.iter().sum::<f64>());
    j
}

/// Relative mismatch `|A0^{-1} D' - B grad w| / max(1, |B grad w|)` between the
/// driving-force and entropy-variable forms of the flux. The molar-fraction
/// gradients in `D'` are reconstructed from `grad w` and `grad phi` by the chain rule.
pub fn flux_equivalence_check(
    comp: &Composition,
    k: &DMatrix<f64>,
    grad_w: &[f64],
    grad_phi: f64,
    spec: &MixtureSpec,
) -> Result<f64> {
    let n = spec.n();
    if grad_w.len() != n - 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} entropy-variable gradients for {n} species",
            grad_w.len()
        )));
    }
    let mut grad_x = statemap::fraction_differential(&comp.x, grad_w, grad_phi, spec)?;
    grad_x.push(-grad_x.iter().sum::<f64>());
    let d = driving_force(comp, &grad_x, grad_phi, spec)?;
    let a0 = build_a0(&comp.rho, k)?;
    let lhs = a0
        .lu()
        .solve(&DVector::from_column_slice(&d[..n - 1]))
        .ok_or_else(|| Error::SingularComposition("A0 is singular".into()))?;
    let b = build_b(&comp.rho, comp.c_tot, k)?;
    let rhs = b * DVector::from_column_slice(grad_w);
    Ok((lhs - &rhs).norm() / rhs.norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k2(k12: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, k12, k12, 0.0])
    }

    fn k3(k12: f64, k13: f64, k23: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[0.0, k12, k13, k12, 0.0, k23, k13, k23, 0.0])
    }

    #[test]
    fn a_two_species() {
        let a = build_a(&[0.25, 0.75], &k2(2.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, -0.5, -1.5, 0.5]);
        assert_eq!(a, expected);
        assert_eq!(column_sums(&a), vec![0.0, 0.0]);
    }

    #[test]
    fn a_at_vertex() {
        let a = build_a(&[1.0, 0.0], &k2(3.0)).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 0.0, 3.0]));
    }

    #[test]
    fn a_dimension_mismatch() {
        assert!(matches!(
            build_a(&[0.5, 0.5], &k3(1.0, 1.0, 1.0)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn a0_cases() {
        let a0 = build_a0(&[0.3, 0.7], &k2(4.5)).unwrap();
        assert_eq!(a0, DMatrix::from_element(1, 1, 4.5));
        let third = 1.0 / 3.0;
        let a0 = build_a0(&[third, third, third], &k3(3.0, 6.0, 9.0)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 2.0, 7.0]);
        assert!((a0 - expected).amax() < 1e-14);
        let a0 = build_a0(&[0.2, 0.5, 0.3], &k3(2.5, 2.5, 2.5)).unwrap();
        assert!((a0 - DMatrix::identity(2, 2) * 2.5).amax() < 1e-15);
    }

    #[test]
    fn c_two_species() {
        let (r1, r2) = (0.3, 0.7);
        let c = build_c(&[r1, r2], &k2(1.7)).unwrap();
        assert_relative_eq!(c[(0, 0)], 1.7 / (r1 * r2), max_relative = 1e-14);
        let c = build_c(&[0.5, 0.5], &k2(2.0)).unwrap();
        assert_relative_eq!(c[(0, 0)], 8.0, max_relative = 1e-15);
        assert!(matches!(
            build_c(&[1.0, 0.0], &k2(2.0)),
            Err(Error::SingularComposition(_))
        ));
    }

    #[test]
    fn b_two_species_closed_form() {
        let b = build_b(&[0.25, 0.75], 1.0, &k2(2.0)).unwrap();
        assert_relative_eq!(b[(0, 0)], 0.09375, max_relative = 1e-15);
        let b = build_b(&[1.0 - 1e-12, 1e-12], 1.0, &k2(2.0)).unwrap();
        assert!(b[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn b_matches_inverse_of_c() {
        let rho = [0.2, 0.5, 0.3];
        let k = k3(1.2, 0.7, 3.1);
        let c_tot = 0.8;
        let b = build_b(&rho, c_tot, &k).unwrap();
        let alt = c_scaled_inverse(&rho, c_tot, &k).unwrap();
        assert!((alt - &b * (c_tot * c_tot)).amax() < 1e-13);
    }

    #[test]
    fn flux_cases() {
        let j = flux_from_driving(&[0.4, 0.6], &k2(4.0), &[2.0]).unwrap();
        assert_relative_eq!(j[0], -0.5, max_relative = 1e-15);
        let j = flux_from_driving(&[0.2, 0.5, 0.3], &k3(1.0, 2.0, 3.0), &[0.0, 0.0]).unwrap();
        assert_eq!(j, vec![0.0, 0.0]);
        let third = 1.0 / 3.0;
        let j =
            flux_from_driving(&[third, third, third], &k3(3.0, 6.0, 9.0), &[33.0, 0.0]).unwrap();
        assert_relative_eq!(j[0], -7.0, max_relative = 1e-13);
        assert_relative_eq!(j[1], 2.0, max_relative = 1e-13);
        let full = complete_flux(&j);
        assert_relative_eq!(full[2], 5.0, max_relative = 1e-13);
    }

    #[test]
    fn flux_equivalence_trivial_and_two_species() {
        let spec = MixtureSpec::from_pairs(vec![1.0, 1.0], vec![1.0, 0.0], &[0.5], 1.0).unwrap();
        let comp = Composition::from_rho(vec![0.35, 0.65], &spec).unwrap();
        let k = rescaled_k(&spec, comp.c_tot).unwrap();
        assert_eq!(
            flux_equivalence_check(&comp, &k, &[0.0], 0.0, &spec).unwrap(),
            0.0
        );
        let res = flux_equivalence_check(&comp, &k, &[0.8], -1.3, &spec).unwrap();
        assert!(res <= 1e-14, "residual {res:e}");
    }

    #[test]
    fn operators_bundle() {
        let spec = MixtureSpec::from_pairs(
            vec![6.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
            &[0.833, 0.68, 0.168],
            1.0,
        )
        .unwrap();
        let comp = Composition::from_rho(vec![0.3, 0.2, 0.5], &spec).unwrap();
        let ops = FluxOperators::new(&comp, &spec).unwrap();
        assert!((ops.c.clone() - ops.c.transpose()).amax() < 1e-12 * ops.c.amax());
        let sym = (ops.b.clone() - ops.b.transpose()).norm() / ops.b.norm();
        assert!(sym < 1e-12);
        assert!(ops
            .b
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .all(|l| *l > 0.0));
        assert_eq!(ops.r.nrows(), 2);
        assert_eq!(ops.a.nrows(), 3);
    }
}
