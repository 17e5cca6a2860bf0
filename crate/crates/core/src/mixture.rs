//! Species parameters of the mixture and the pointwise constitutive relations.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Reaction-rate hook `x -> r(x)`. Rates must sum to zero.
pub type ReactionFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Fixed background charge `f(y)` entering the Poisson equation.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BackgroundCharge {
    #[default]
    Zero,
    /// Nodal values on the computational grid (`n_p + 1` entries).
    Nodal(Vec<f64>),
}

impl BackgroundCharge {
    pub fn nodal_values(&self, n_nodes: usize) -> Result<Vec<f64>> {
        match self {
            BackgroundCharge::Zero => Ok(vec![0.0; n_nodes]),
            BackgroundCharge::Nodal(values) => {
                if values.len() != n_nodes {
                    return Err(Error::DimensionMismatch(format!(
                        "background charge has {} nodal values, grid has {n_nodes} nodes",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Parameters of an `n`-species mixture (all quantities dimensionless).
#[derive(Clone)]
pub struct MixtureSpec {
    molar_masses: Vec<f64>,
    charges: Vec<f64>,
    diffusivities: DMatrix<f64>,
    lambda: f64,
    background: BackgroundCharge,
    reactions: Option<Arc<ReactionFn>>,
}

impl fmt::Debug for MixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixtureSpec")
            .field("molar_masses", &self.molar_masses)
            .field("charges", &self.charges)
            .field("diffusivities", &self.diffusivities)
            .field("lambda", &self.lambda)
            .field("background", &self.background)
            .field("reactions", &self.reactions.as_ref().map(|_| "<hook>"))
            .finish()
    }
}

impl MixtureSpec {
    /// Validates and builds a mixture. `diffusivities` is the symmetric matrix of
    /// Maxwell–Stefan diffusivities; its diagonal is ignored.
    pub fn new(
        molar_masses: Vec<f64>,
        charges: Vec<f64>,
        diffusivities: DMatrix<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = molar_masses.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "a mixture needs at least 2 species, got {n}"
            )));
        }
        if charges.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} charges for {n} species",
                charges.len()
            )));
        }
        if diffusivities.nrows() != n || diffusivities.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "diffusivity matrix is {}x{}, expected {n}x{n}",
                diffusivities.nrows(),
                diffusivities.ncols()
            )));
        }
        if let Some(m) = molar_masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "molar masses must be positive, got {m}"
            )));
        }
        if charges.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("charges must be finite".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = diffusivities[(i, j)];
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "diffusivity D[{i}][{j}] = {d} must be positive"
                    )));
                }
                if d != diffusivities[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "diffusivity matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "permittivity lambda must be positive, got {lambda}"
            )));
        }
        Ok(MixtureSpec {
            molar_masses,
            charges,
            diffusivities,
            lambda,
            background: BackgroundCharge::Zero,
            reactions: None,
        })
    }

    /// Builds a mixture from the upper-triangular list of pair diffusivities
    /// `D_12, D_13, ..., D_1n, D_23, ...`.
    pub fn from_pairs(
        molar_masses: Vec<f64>,
        charges: Vec<f64>,
        pairs: &[f64],
        lambda: f64,
    ) -> Result<Self> {
        let n = molar_masses.len();
        if pairs.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::DimensionMismatch(format!(
                "{} pair diffusivities for {n} species",
                pairs.len()
            )));
        }
        let mut d = DMatrix::zeros(n, n);
        let mut it = pairs.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = *it.next().expect("length checked");
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        Self::new(molar_masses, charges, d, lambda)
    }

    pub fn with_background(mut self, background: BackgroundCharge) -> Self {
        self.background = background;
        self
    }

    pub fn with_reactions(mut self, reactions: Arc<ReactionFn>) -> Self {
        self.reactions = Some(reactions);
        self
    }

    pub fn n(&self) -> usize {
        self.molar_masses.len()
    }

    pub fn molar_masses(&self) -> &[f64] {
        &self.molar_masses
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn diffusivities(&self) -> &DMatrix<f64> {
        &self.diffusivities
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn background(&self) -> &BackgroundCharge {
        &self.background
    }

    pub fn has_reactions(&self) -> bool {
        self.reactions.is_some()
    }

    /// `z_i/M_i - z_n/M_n` for `i < n`: the coefficient of `Φ` in `w_i`.
    pub fn charge_offsets(&self) -> Vec<f64> {
        let n = self.n();
        let last = self.charges[n - 1] / self.molar_masses[n - 1];
        (0..n - 1)
            .map(|i| self.charges[i] / self.molar_masses[i] - last)
            .collect()
    }

    /// Charge density `sum_i z_i rho_i / M_i`.
    pub fn charge_density(&self, rho: &[f64]) -> f64 {
        rho.iter()
            .zip(&self.charges)
            .zip(&self.molar_masses)
            .map(|((r, z), m)| z * r / m)
            .sum()
    }

    /// Reaction rates at molar fractions `x`; zero when no hook is set.
    pub fn reaction_rates(&self, x: &[f64]) -> Result<Vec<f64>> {
        let Some(hook) = &self.reactions else {
            return Ok(vec![0.0; self.n()]);
        };
        let r = hook(x);
        if r.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "reaction hook returned {} rates for {} species",
                r.len(),
                self.n()
            )));
        }
        let sum: f64 = r.iter().sum();
        let scale = r.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        if sum.abs() > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!(
                "reaction rates must sum to zero, sum = {sum:e}"
            )));
        }
        Ok(r)
    }

    /// Bounds `1/max M <= c_tot <= 1/min M` valid for every density vector on the simplex.
    pub fn c_tot_bounds(&self) -> (f64, f64) {
        let max = self.molar_masses.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.molar_masses.iter().cloned().fold(f64::MAX, f64::min);
        (1.0 / max, 1.0 / min)
    }
}

/// Pointwise composition: mass densities, molar fractions and total concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub rho: Vec<f64>,
    pub x: Vec<f64>,
    pub c_tot: f64,
}

impl Composition {
    /// From mass densities on the simplex: `c_tot = sum rho_i/M_i`, `x_i = rho_i/(c_tot M_i)`.
    pub fn from_rho(rho: Vec<f64>, spec: &MixtureSpec) -> Result<Self> {
        check_simplex(&rho, spec.n(), "density")?;
        let masses = spec.molar_masses();
        let c_tot: f64 = rho.iter().zip(masses).map(|(r, m)| r / m).sum();
        let x = rho
            .iter()
            .zip(masses)
            .map(|(r, m)| r / (c_tot * m))
            .collect();
        Ok(Composition { rho, x, c_tot })
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    /// True when every component is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.rho.iter().all(|r| *r > 0.0) && self.x.iter().all(|x| *x > 0.0)
    }
}

pub(crate) fn check_simplex(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{what} vector has {} entries, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Domain(format!(
            "{what} vector {v:?} has negative or non-finite entries"
        )));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "{what} vector sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Rescaled reciprocal diffusivities `k_ij = 1/(c_tot^3 M_i M_j D_ij)`; zero diagonal.
pub fn rescaled_k(spec: &MixtureSpec, c_tot: f64) -> Result<DMatrix<f64>> {
    if !(c_tot.is_finite() && c_tot > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "total concentration must be positive, got {c_tot}"
        )));
    }
    let n = spec.n();
    let m = spec.molar_masses();
    let c3 = c_tot * c_tot * c_tot;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 1.0 / (c3 * m[i] * m[j] * spec.diffusivities[(i, j)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Driving forces `D_i = dx_i + (z_i x_i - (z.x) rho_i) dPhi`.
pub fn driving_force(
    comp: &Composition,
    grad_x: &[f64],
    grad_phi: f64,
    spec: &MixtureSpec,
) -> Result<Vec<f64>> {
    let n = spec.n();
    if grad_x.len() != n || comp.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "driving force needs {n} species, got gradient of length {} and composition of length {}",
            grad_x.len(),
            comp.n()
        )));
    }
    let z = spec.charges();
    let zx: f64 = z.iter().zip(&comp.x).map(|(z, x)| z * x).sum();
    Ok((0..n)
        .map(|i| grad_x[i] + (z[i] * comp.x[i] - zx * comp.rho[i]) * grad_phi)
        .collect())
}
