//! Entropy, relative entropy, masses, the discrete entropy-production residual
//! and convergence-rate fits. All integrals use the trapezoidal rule; gradients
//! are per-element difference quotients.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem1d::Grid1D;
use crate::mixture::{Composition, MixtureSpec};
use crate::stepper::{Lift, SolverParams, State};

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub entropy: f64,
    pub relative_entropy: Option<f64>,
    pub masses: Vec<f64>,
    /// Signed residual of the discrete entropy inequality; nonpositive up to roundoff.
    pub entropy_residual: f64,
    pub iterations: usize,
    pub zeta_inf: f64,
    /// `max |rho^k - rho^{k-1}| / tau`.
    pub stationarity: f64,
}

/// `c_tot sum_i x_i log x_i`, with `0 log 0 = 0`.
pub fn mixing_density(comp: &Composition) -> f64 {
    comp.c_tot
        * comp
            .x
            .iter()
            .filter(|x| **x > 0.0)
            .map(|x| x * x.ln())
            .sum::<f64>()
}

/// `λ/2 ∫ |(a - b)'|^2` with piecewise-constant gradients.
pub fn field_energy(grid: &Grid1D, lambda: f64, a: &[f64], b: &[f64]) -> f64 {
    let h = grid.h();
    let mut sum = 0.0;
    for e in 0..grid.n_elements() {
        let g = ((a[e + 1] - b[e + 1]) - (a[e] - b[e])) / h;
        sum += h * g * g;
    }
    0.5 * lambda * sum
}

/// Mixing entropy plus field energy of `Φ - Φ_D`.
pub fn entropy(grid: &Grid1D, spec: &MixtureSpec, lift: &Lift, state: &State) -> f64 {
    let mixing: Vec<f64> = state.comps.iter().map(mixing_density).collect();
    grid.integrate(&mixing) + field_energy(grid, spec.lambda(), &state.phi, &lift.phi_d)
}

/// `∫ c_tot sum_i x_i log(x_i / x_i^∞) + λ/2 |(Φ - Φ^∞)'|^2`.
pub fn relative_entropy(grid: &Grid1D, spec: &MixtureSpec, state: &State, steady: &State) -> f64 {
    let density: Vec<f64> = state
        .comps
        .iter()
        .zip(&steady.comps)
        .map(|(c, s)| {
            c.c_tot
                * c.x
                    .iter()
                    .zip(&s.x)
                    .filter(|(x, _)| **x > 0.0)
                    .map(|(x, xs)| x * (x / xs).ln())
                    .sum::<f64>()
        })
        .collect();
    grid.integrate(&density) + field_energy(grid, spec.lambda(), &state.phi, &steady.phi)
}

/// Trapezoidal `L¹` norms of the densities.
pub fn masses(grid: &Grid1D, state: &State) -> Vec<f64> {
    (0..state.n_species())
        .map(|i| grid.integrate(&state.rho(i)))
        .collect()
}

/// `H(rho^k) + τ ∫ (w^k - w_D)' · B w^k' + ε τ ∫ |w^k - w_D|^2
///  - τ ∫ sum_i (z_i/M_i) r_i (Φ^k - Φ_D) - H(rho^{k-1})`,
/// with `B` given per element.
pub fn entropy_step_residual(
    grid: &Grid1D,
    spec: &MixtureSpec,
    lift: &Lift,
    params: &SolverParams,
    state_k: &State,
    state_km1: &State,
    mobilities: &[DMatrix<f64>],
) -> Result<f64> {
    let m = spec.n() - 1;
    let h = grid.h();
    let tau = params.tau;
    if mobilities.len() != grid.n_elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} mobilities for {} elements",
            mobilities.len(),
            grid.n_elements()
        )));
    }
    let mut dissipation = 0.0;
    let mut du = vec![0.0; m];
    let mut dw = vec![0.0; m];
    for (e, b) in mobilities.iter().enumerate() {
        let (ua, ub) = (state_k.u_at(e), state_k.u_at(e + 1));
        let (wa, wb) = (lift.w_d_at(e, m), lift.w_d_at(e + 1, m));
        for i in 0..m {
            du[i] = (ub[i] - ua[i]) / h;
            dw[i] = du[i] + (wb[i] - wa[i]) / h;
        }
        let mut q = 0.0;
        for i in 0..m {
            for k in 0..m {
                q += du[i] * b[(i, k)] * dw[k];
            }
        }
        dissipation += h * q;
    }
    let mut reg = Vec::with_capacity(grid.n_nodes());
    let mut reaction = Vec::with_capacity(grid.n_nodes());
    for j in 0..grid.n_nodes() {
        reg.push(state_k.u_at(j).iter().map(|u| u * u).sum::<f64>());
        let r = spec.reaction_rates(&state_k.comps[j].x)?;
        let q: f64 = r
            .iter()
            .zip(spec.charges())
            .zip(spec.molar_masses())
            .map(|((r, z), mm)| z * r / mm)
            .sum();
        reaction.push(q * (state_k.phi[j] - lift.phi_d[j]));
    }
    Ok(entropy(grid, spec, lift, state_k)
        + tau * dissipation
        + params.eps_reg * tau * grid.integrate(&reg)
        - tau * grid.integrate(&reaction)
        - entropy(grid, spec, lift, state_km1))
}

/// Straight-line least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(
            "fit abscissae and ordinates differ in length".into(),
        ));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "a fit needs at least two points".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "fit abscissae are all equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of `log value` against `t` for the samples with `t` in `window`.
pub fn semilog_fit(ts: &[f64], values: &[f64], window: (f64, f64)) -> Result<LinearFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, v) in ts.iter().zip(values) {
        if *t >= window.0 && *t <= window.1 {
            if !(*v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "cannot take the logarithm of {v} at t = {t}"
                )));
            }
            xs.push(*t);
            ys.push(v.ln());
        }
    }
    linear_fit(&xs, &ys)
}

/// Observed orders between consecutive levels and the global log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub slopes: Vec<f64>,
    pub fitted: f64,
}

pub fn convergence_rates(hs: &[f64], errs: &[f64]) -> Result<Rates> {
    if hs.len() != errs.len() || hs.len() < 2 {
        return Err(Error::InvalidParameter(
            "need matching mesh widths and errors on at least two levels".into(),
        ));
    }
    if let Some(e) = errs.iter().chain(hs).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "mesh widths and errors must be positive, got {e}"
        )));
    }
    let slopes = hs
        .windows(2)
        .zip(errs.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    let lh: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let le: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    Ok(Rates {
        slopes,
        fitted: linear_fit(&lh, &le)?.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_state(spec: &MixtureSpec, x: &[f64], phi: Vec<f64>) -> State {
        let comp = crate::statemap::rho_from_x(x, spec).unwrap();
        let nodes = phi.len();
        State {
            t: 0.0,
            u: vec![0.0; nodes * (spec.n() - 1)],
            phi,
            comps: vec![comp; nodes],
        }
    }

    fn zero_lift(nodes: usize, m: usize) -> Lift {
        Lift {
            phi_d: vec![0.0; nodes],
            w_d: vec![0.0; nodes * m],
        }
    }

    #[test]
    fn entropy_of_uniform_mixture() {
        let spec =
            MixtureSpec::from_pairs(vec![1.0; 3], vec![0.0; 3], &[1.0, 1.0, 1.0], 1.0).unwrap();
        let grid = Grid1D::new(7).unwrap();
        let s = uniform_state(&spec, &[1.0 / 3.0; 3], vec![0.0; 8]);
        let h = entropy(&grid, &spec, &zero_lift(8, 2), &s);
        assert_relative_eq!(h, -(3.0f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn mixing_vanishes_at_pure_species() {
        let comp = Composition {
            rho: vec![1.0, 0.0],
            x: vec![1.0, 0.0],
            c_tot: 1.0,
        };
        assert_eq!(mixing_density(&comp), 0.0);
    }

    #[test]
    fn field_energy_of_linear_difference() {
        let grid = Grid1D::new(16).unwrap();
        let a = grid.nodes();
        assert_relative_eq!(
            field_energy(&grid, 2.0, &a, &[0.0; 17]),
            1.0,
            epsilon = 1e-13
        );
    }

    #[test]
    fn relative_entropy_values() {
        let spec = MixtureSpec::from_pairs(vec![1.0; 2], vec![0.0; 2], &[1.0], 1.0).unwrap();
        let grid = Grid1D::new(5).unwrap();
        let s = uniform_state(&spec, &[0.6, 0.4], vec![0.0; 6]);
        let r = uniform_state(&spec, &[0.5, 0.5], vec![0.0; 6]);
        let expected = 0.6 * 1.2f64.ln() + 0.4 * 0.8f64.ln();
        assert_relative_eq!(
            relative_entropy(&grid, &spec, &s, &r),
            expected,
            epsilon = 1e-14
        );
        assert_relative_eq!(expected, 0.020136, epsilon = 1e-6);
        assert_eq!(relative_entropy(&grid, &spec, &r, &r), 0.0);
    }

    #[test]
    fn masses_sum_to_one() {
        let spec =
            MixtureSpec::from_pairs(vec![1.0, 2.0, 3.0], vec![0.0; 3], &[1.0; 3], 1.0).unwrap();
        let grid = Grid1D::new(9).unwrap();
        let s = uniform_state(&spec, &[0.2, 0.3, 0.5], vec![0.0; 10]);
        let m = masses(&grid, &s);
        assert_relative_eq!(m.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(m[0], s.comps[0].rho[0], epsilon = 1e-14);
    }

    #[test]
    fn residual_at_rest_is_zero() {
        let spec = MixtureSpec::from_pairs(vec![1.0; 3], vec![0.0; 3], &[1.0; 3], 1.0).unwrap();
        let grid = Grid1D::new(4).unwrap();
        let s = uniform_state(&spec, &[1.0 / 3.0; 3], vec![0.0; 5]);
        let b = vec![DMatrix::identity(2, 2); 4];
        let params = SolverParams::default();
        let r = entropy_step_residual(&grid, &spec, &zero_lift(5, 2), &params, &s, &s, &b).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn rates() {
        let r = convergence_rates(&[0.1, 0.05], &[1e-2, 2.5e-3]).unwrap();
        assert_relative_eq!(r.slopes[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.fitted, 2.0, epsilon = 1e-12);
        let r = convergence_rates(&[0.1, 0.05, 0.025], &[0.4, 0.2, 0.1]).unwrap();
        assert_relative_eq!(r.fitted, 1.0, epsilon = 1e-12);
        assert!(convergence_rates(&[0.1, 0.05], &[1e-2, 0.0]).is_err());
        assert!(convergence_rates(&[0.1], &[1e-2]).is_err());
    }

    #[test]
    fn semilog_fit_recovers_exponent() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-1.5 * t).exp()).collect();
        let fit = semilog_fit(&ts, &vs, (1.0, 4.0)).unwrap();
        assert_relative_eq!(fit.slope, -1.5, epsilon = 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }
}
