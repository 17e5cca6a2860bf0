//! Conversions between entropy variables `(w, Φ)`, molar fractions and densities.
//!
//! `w_i = log(x_i)/M_i - log(x_n)/M_n + (z_i/M_i - z_n/M_n) Φ` for `i < n`. The map
//! is inverted through the scalar equation `f(s) = s` with
//! `f(s) = sum_i a_i (1 - s)^{p_i}`, `a_i = exp(M_i w_i - M_i ζ_i Φ)`, `p_i = M_i/M_n`;
//! then `x_n = 1 - s` and `x_i = a_i x_n^{p_i}`.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mixture::{check_simplex, Composition, MixtureSpec};

/// Exponents `M_i w_i - M_i ζ_i Φ` are clamped to this magnitude before use.
pub const EXPONENT_CLAMP: f64 = 700.0;

/// Pointwise entropy variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyVars {
    pub w: Vec<f64>,
    pub phi: f64,
}

impl EntropyVars {
    pub fn new(w: Vec<f64>, phi: f64) -> Self {
        EntropyVars { w, phi }
    }
}

/// The scalar fixed-point problem `f(s) = s` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointProblem {
    /// `ln a_i`.
    log_coefficients: Vec<f64>,
    exponents: Vec<f64>,
    clamped: bool,
}

/// Solution of [`FixedPointProblem`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub s0: f64,
    /// `1 - s0`, carried separately to keep full relative precision when `s0 ≈ 1`.
    pub complement: f64,
    /// `ln(1 - s0)`.
    pub log_complement: f64,
    /// `|f(s0) - s0|`.
    pub residual: f64,
    pub iterations: usize,
}

impl FixedPointProblem {
    /// Builds `a_i`, `p_i` from entropy variables.
    pub fn new(ev: &EntropyVars, spec: &MixtureSpec) -> Result<Self> {
        let n = spec.n();
        if ev.w.len() != n - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} entropy variables for {n} species",
                ev.w.len()
            )));
        }
        if !ev.phi.is_finite() || ev.w.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entropy variables {ev:?}"
            )));
        }
        let m = spec.molar_masses();
        let offsets = spec.charge_offsets();
        let mut clamped = false;
        let log_coefficients = (0..n - 1)
            .map(|i| {
                let e = m[i] * ev.w[i] - m[i] * offsets[i] * ev.phi;
                if e.abs() > EXPONENT_CLAMP {
                    clamped = true;
                    e.clamp(-EXPONENT_CLAMP, EXPONENT_CLAMP)
                } else {
                    e
                }
            })
            .collect();
        if clamped {
            warn!("entropy variables {ev:?} outside the representable range; exponents clamped");
        }
        let exponents = (0..n - 1).map(|i| m[i] / m[n - 1]).collect();
        Ok(FixedPointProblem {
            log_coefficients,
            exponents,
            clamped,
        })
    }

    /// Direct construction from positive coefficients `a_i` and exponents `p_i`.
    pub fn from_coefficients(coefficients: &[f64], exponents: &[f64]) -> Result<Self> {
        if coefficients.len() != exponents.len() || coefficients.is_empty() {
            return Err(Error::DimensionMismatch(
                "coefficients and exponents must be non-empty and of equal length".into(),
            ));
        }
        if coefficients
            .iter()
            .chain(exponents)
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::InvalidParameter(
                "coefficients and exponents must be positive".into(),
            ));
        }
        Ok(FixedPointProblem {
            log_coefficients: coefficients.iter().map(|a| a.ln()).collect(),
            exponents: exponents.to_vec(),
            clamped: false,
        })
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.log_coefficients.iter().map(|l| l.exp()).collect()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// Whether any exponent hit [`EXPONENT_CLAMP`].
    pub fn clamped(&self) -> bool {
        self.clamped
    }

    /// `f(s)`.
    pub fn eval(&self, s: f64) -> f64 {
        let t = 1.0 - s;
        if t <= 0.0 {
            return 0.0;
        }
        self.terms(t.ln()).sum()
    }

    fn terms(&self, log_t: f64) -> impl Iterator<Item = f64> + '_ {
        self.log_coefficients
            .iter()
            .zip(&self.exponents)
            .map(move |(la, p)| (la + p * log_t).exp())
    }

    /// `F(l) = ln(sum_i a_i e^{p_i l} + e^l)` and `F'(l)`, with `l = ln(1 - s)`.
    /// `F` is convex and strictly increasing; its root is the fixed point.
    fn log_equation(&self, l: f64) -> (f64, f64) {
        let mut top = l;
        for (la, p) in self.log_coefficients.iter().zip(&self.exponents) {
            top = top.max(la + p * l);
        }
        let mut sum = (l - top).exp();
        let mut slope = sum;
        for (la, p) in self.log_coefficients.iter().zip(&self.exponents) {
            let e = (la + p * l - top).exp();
            sum += e;
            slope += p * e;
        }
        (top + sum.ln(), slope / sum)
    }
}

const MAX_ROOT_ITERATIONS: usize = 200;

/// Unique root `s0 ∈ (0, 1)` of `f(s) = s`.
///
/// Newton iteration on `F(l) = ln(f(1 - e^l) + e^l)` in `l = ln(1 - s)`, started at
/// `l = 0` where `F > 0`. Convexity of `F` makes the iterates decrease monotonically
/// to the root, so the loop needs no bracketing and reaches deep underflow ranges
/// of `1 - s0` in a handful of steps. Both `s0` and `1 - s0` are returned with full
/// relative precision.
pub fn solve_s0(fp: &FixedPointProblem, tol: f64) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let mut l = 0.0_f64;
    let mut iterations = 0;
    while iterations < MAX_ROOT_ITERATIONS {
        iterations += 1;
        let (value, slope) = fp.log_equation(l);
        if value <= 0.0 {
            break;
        }
        let step = value / slope;
        l -= step;
        if step <= 4.0 * f64::EPSILON * l.abs().max(1.0) {
            break;
        }
    }
    let complement = l.exp();
    if !(complement > 0.0) {
        return Err(Error::Domain(format!(
            "molar fraction of the last species underflows (ln x_n = {l})"
        )));
    }
    let s0: f64 = fp.terms(l).sum();
    let residual = (s0 + complement - 1.0).abs();
    if residual > tol {
        warn!("fixed-point solve: {iterations} iterations, residual {residual:e}");
        if residual > tol.max(1e-8) {
            return Err(Error::Domain(format!(
                "fixed-point iteration failed: residual {residual:e} after {iterations} iterations"
            )));
        }
    }
    Ok(FixedPoint {
        s0,
        complement,
        log_complement: l,
        residual,
        iterations,
    })
}

/// Molar fractions from entropy variables; strictly inside the simplex.
pub fn x_from_w(ev: &EntropyVars, spec: &MixtureSpec) -> Result<Vec<f64>> {
    let fp = FixedPointProblem::new(ev, spec)?;
    let root = solve_s0(&fp, 1e-13)?;
    let mut x: Vec<f64> = fp.terms(root.log_complement).collect();
    x.push(root.complement);
    if let Some(i) = x.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "molar fraction x[{i}] underflows at {ev:?}"
        )));
    }
    Ok(x)
}

/// Densities from molar fractions: `c_tot = 1/sum M_j x_j`, `rho_i = c_tot M_i x_i`.
pub fn rho_from_x(x: &[f64], spec: &MixtureSpec) -> Result<Composition> {
    check_simplex(x, spec.n(), "molar fraction")?;
    let m = spec.molar_masses();
    let mean_mass: f64 = x.iter().zip(m).map(|(x, m)| x * m).sum();
    let c_tot = 1.0 / mean_mass;
    let rho = x.iter().zip(m).map(|(x, m)| c_tot * m * x).collect();
    Ok(Composition {
        rho,
        x: x.to_vec(),
        c_tot,
    })
}

/// Full inversion `(w, Φ) -> Composition`.
pub fn invert(ev: &EntropyVars, spec: &MixtureSpec) -> Result<Composition> {
    let x = x_from_w(ev, spec)?;
    rho_from_x(&x, spec)
}

/// Entropy variables `w` of a composition at potential `phi`.
pub fn w_from_x(x: &[f64], phi: f64, spec: &MixtureSpec) -> Result<Vec<f64>> {
    let n = spec.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} molar fractions for {n} species",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "entropy variables need x > 0, x[{i}] = {}",
            x[i]
        )));
    }
    let m = spec.molar_masses();
    let offsets = spec.charge_offsets();
    let last = x[n - 1].ln() / m[n - 1];
    Ok((0..n - 1)
        .map(|i| x[i].ln() / m[i] - last + offsets[i] * phi)
        .collect())
}

/// Shifted entropy variables `u = w - w_D`, `w_D,i = (z_i/M_i - z_n/M_n) Φ_D`.
pub fn w_from_rho(
    comp: &Composition,
    phi: f64,
    phi_d: f64,
    spec: &MixtureSpec,
) -> Result<Vec<f64>> {
    let offsets = spec.charge_offsets();
    let w = w_from_x(&comp.x, phi, spec)?;
    Ok(w.iter().zip(&offsets).map(|(w, o)| w - o * phi_d).collect())
}

/// Solves `G dx' = dw - ζ dphi` with `G_ij = δ_ij/(M_i x_i) + 1/(M_n x_n)`.
///
/// `G` is diagonal plus rank one; the solve uses the Sherman–Morrison form, which
/// stays well scaled when some `x_i` are tiny.
pub fn fraction_differential(
    x: &[f64],
    dw: &[f64],
    dphi: f64,
    spec: &MixtureSpec,
) -> Result<Vec<f64>> {
    let n = spec.n();
    if x.len() != n || dw.len() != n - 1 {
        return Err(Error::DimensionMismatch(format!(
            "fraction differential: {} fractions and {} increments for {n} species",
            x.len(),
            dw.len()
        )));
    }
    let m = spec.molar_masses();
    let offsets = spec.charge_offsets();
    // D^{-1} = diag(M_i x_i)
    let dinv: Vec<f64> = (0..n - 1).map(|i| m[i] * x[i]).collect();
    let sigma = m[n - 1] * x[n - 1];
    let rhs: Vec<f64> = (0..n - 1).map(|i| dw[i] - offsets[i] * dphi).collect();
    let y: Vec<f64> = rhs.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let denom = sigma + dinv.iter().sum::<f64>();
    let proj = y.iter().sum::<f64>() / denom;
    Ok(dinv.iter().zip(&y).map(|(d, y)| y - d * proj).collect())
}

/// `∂rho'/∂(w, Φ)` at a composition, shape `(n-1) x n`; the last column is the `Φ` derivative.
pub fn jacobian_from_composition(comp: &Composition, spec: &MixtureSpec) -> Result<DMatrix<f64>> {
    let n = spec.n();
    let m = spec.molar_masses();
    let offsets = spec.charge_offsets();
    let c = comp.c_tot;
    // ∂x'/∂w = G^{-1}; columns via unit increments
    let mut dxdw = DMatrix::zeros(n - 1, n - 1);
    let mut unit = vec![0.0; n - 1];
    for k in 0..n - 1 {
        unit[k] = 1.0;
        let col = fraction_differential(&comp.x, &unit, 0.0, spec)?;
        unit[k] = 0.0;
        for i in 0..n - 1 {
            dxdw[(i, k)] = col[i];
        }
    }
    // ∂rho_i/∂x_k = M_i (c δ_ik + x_i ∂c/∂x_k), ∂c/∂x_k = -c^2 (M_k - M_n)
    let drho_dx = DMatrix::from_fn(n - 1, n - 1, |i, k| {
        let delta = if i == k { c } else { 0.0 };
        m[i] * (delta - comp.x[i] * c * c * (m[k] - m[n - 1]))
    });
    let dw = &drho_dx * &dxdw;
    let mut jac = DMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        let mut dphi = 0.0;
        for k in 0..n - 1 {
            jac[(i, k)] = dw[(i, k)];
            dphi -= dw[(i, k)] * offsets[k];
        }
        jac[(i, n - 1)] = dphi;
    }
    Ok(jac)
}

/// `∂rho'/∂(w, Φ)` at entropy variables.
pub fn jacobian_rho(ev: &EntropyVars, spec: &MixtureSpec) -> Result<DMatrix<f64>> {
    let comp = invert(ev, spec)?;
    jacobian_from_composition(&comp, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(m: &[f64], z: &[f64]) -> MixtureSpec {
        let n = m.len();
        MixtureSpec::from_pairs(m.to_vec(), z.to_vec(), &vec![1.0; n * (n - 1) / 2], 1.0).unwrap()
    }

    fn sigmoid(v: f64) -> f64 {
        1.0 / (1.0 + (-v).exp())
    }

    #[test]
    fn s0_linear_case() {
        let fp = FixedPointProblem::from_coefficients(&[1.0], &[1.0]).unwrap();
        let root = solve_s0(&fp, 1e-14).unwrap();
        assert_relative_eq!(root.s0, 0.5, epsilon = 1e-15);
        assert!(root.residual <= 1e-14);
    }

    #[test]
    fn s0_quadratic_case() {
        let fp = FixedPointProblem::from_coefficients(&[1.0], &[2.0]).unwrap();
        let root = solve_s0(&fp, 1e-14).unwrap();
        assert_relative_eq!(root.s0, (3.0 - 5f64.sqrt()) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(root.s0, 0.381_966_011_3, epsilon = 1e-10);
        assert!((fp.eval(root.s0) - root.s0).abs() <= 1e-14);
    }

    #[test]
    fn s0_vanishing_coefficients() {
        let fp = FixedPointProblem::from_coefficients(&[1e-200, 1e-250], &[0.5, 3.0]).unwrap();
        let root = solve_s0(&fp, 1e-14).unwrap();
        assert!(root.s0 < 1e-199);
        assert_relative_eq!(root.s0, 1e-200, max_relative = 1e-12);
    }

    #[test]
    fn s0_large_coefficients() {
        let fp = FixedPointProblem::from_coefficients(&[1e200], &[1.0]).unwrap();
        let root = solve_s0(&fp, 1e-14).unwrap();
        assert_relative_eq!(root.complement, 1.0 / (1.0 + 1e200), max_relative = 1e-12);
    }

    #[test]
    fn s0_rejects_bad_tolerance() {
        let fp = FixedPointProblem::from_coefficients(&[1.0], &[1.0]).unwrap();
        assert!(solve_s0(&fp, 0.0).is_err());
    }

    #[test]
    fn x_symmetric_equilibrium() {
        let s = spec(&[2.0; 4], &[1.0, -1.0, 2.0, 0.0]);
        let x = x_from_w(&EntropyVars::new(vec![0.0; 3], 0.0), &s).unwrap();
        for xi in x {
            assert_relative_eq!(xi, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn x_equal_mass_closed_form() {
        let s = spec(&[1.0, 1.0], &[1.0, 0.0]);
        let x = x_from_w(&EntropyVars::new(vec![1.0], 1.0), &s).unwrap();
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn x_unequal_masses() {
        let s = spec(&[2.0, 1.0], &[0.0, 0.0]);
        let x = x_from_w(&EntropyVars::new(vec![0.0], 0.0), &s).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(x[0], 1.0 - golden, epsilon = 1e-15);
        assert_relative_eq!(x[1], golden, epsilon = 1e-15);
        assert_relative_eq!(x[0], 0.381_966, epsilon = 1e-6);
    }

    #[test]
    fn x_clamps_extreme_exponents() {
        let s = spec(&[1.0, 1.0], &[0.0, 0.0]);
        let fp = FixedPointProblem::new(&EntropyVars::new(vec![1e4], 0.0), &s).unwrap();
        assert!(fp.clamped());
        let x = x_from_w(&EntropyVars::new(vec![1e4], 0.0), &s).unwrap();
        assert!(x[1] > 0.0 && x[1] < 1e-300);
        assert!(FixedPointProblem::new(&EntropyVars::new(vec![f64::NAN], 0.0), &s).is_err());
    }

    #[test]
    fn rho_from_x_cases() {
        let s = spec(&[3.0; 3], &[0.0; 3]);
        let comp = rho_from_x(&[0.2, 0.3, 0.5], &s).unwrap();
        assert_relative_eq!(comp.c_tot, 1.0 / 3.0, epsilon = 1e-15);
        for (r, x) in comp.rho.iter().zip([0.2, 0.3, 0.5]) {
            assert_relative_eq!(*r, x, epsilon = 1e-15);
        }
        let s = spec(&[2.0, 1.0], &[0.0; 2]);
        let comp = rho_from_x(&[0.5, 0.5], &s).unwrap();
        assert_relative_eq!(comp.c_tot, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(comp.rho[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(comp.rho[1], 1.0 / 3.0, epsilon = 1e-15);
        for i in 0..2 {
            assert_relative_eq!(
                comp.rho[i] / (comp.c_tot * s.molar_masses()[i]),
                comp.x[i],
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn w_from_rho_cases() {
        let s = spec(&[1.5; 3], &[1.0, -2.0, 0.5]);
        let comp = rho_from_x(&[1.0 / 3.0; 3], &s).unwrap();
        let u = w_from_rho(&comp, 0.7, 0.7, &s).unwrap();
        assert!(u.iter().all(|v| v.abs() < 1e-15));

        let s = spec(&[1.0, 1.0], &[1.0, 0.0]);
        let comp = rho_from_x(&[0.25, 0.75], &s).unwrap();
        let u = w_from_rho(&comp, 2.0, 0.0, &s).unwrap();
        assert_relative_eq!(u[0], (1.0f64 / 3.0).ln() + 2.0, epsilon = 1e-15);
        assert_relative_eq!(u[0], 0.90139, epsilon = 1e-5);

        let bad = Composition {
            rho: vec![1.0, 0.0],
            x: vec![1.0, 0.0],
            c_tot: 1.0,
        };
        assert!(matches!(
            w_from_rho(&bad, 0.0, 0.0, &s),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn jacobian_sigmoid() {
        let s = spec(&[1.0, 1.0], &[1.0, 0.0]);
        let jac = jacobian_rho(&EntropyVars::new(vec![0.0], 0.0), &s).unwrap();
        assert_relative_eq!(jac[(0, 0)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(jac[(0, 1)], -0.25, epsilon = 1e-15);
        let (w, phi) = (0.7, -0.4);
        let jac = jacobian_rho(&EntropyVars::new(vec![w], phi), &s).unwrap();
        let r = sigmoid(w - phi);
        assert_relative_eq!(jac[(0, 0)], r * (1.0 - r), epsilon = 1e-15);
    }

    #[test]
    fn g_is_positive_definite() {
        let s = spec(&[1.0, 3.0, 0.5, 2.0], &[0.0; 4]);
        let x = [0.1, 0.2, 0.3, 0.4];
        // dx' = G^{-1} dw, so dw . dx' is the quadratic form of G^{-1}
        for dw in [[1.0, 0.0, 0.0], [0.3, -1.0, 2.0], [-1.0, -1.0, -1.0]] {
            let dx = fraction_differential(&x, &dw, 0.0, &s).unwrap();
            let q: f64 = dw.iter().zip(&dx).map(|(a, b)| a * b).sum();
            assert!(q > 0.0);
        }
    }
}
