//! Implicit Euler time stepping in entropy variables.
//!
//! Unknowns per node are the shifted entropy variables `u = w - w_D` (`n - 1`
//! values) and the potential `Φ`. Each time step solves the nonlinear Galerkin
//! system by a linearized semi-implicit iteration: the densities are linearized
//! around the current iterate `(ū, Φ̄)`, the mobility `B` is frozen at the iterate,
//! and the increment `ζ` solves one block-tridiagonal system. The iteration stops
//! when `|ζ|_∞ < eps_tol`.
//!
//! Quadrature: time-derivative, regularization, reaction and charge pairings use
//! the lumped (trapezoidal) mass; the mobility is evaluated once per element at the
//! midpoint of the averaged nodal entropy variables.

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::diagnostics::{self, StepReport};
use crate::error::{Error, Result};
use crate::fem1d::{self, BandedSystem, BlockTridiagonal, Grid1D};
use crate::mixture::{rescaled_k, Composition, MixtureSpec};
use crate::msalgebra;
use crate::statemap::{self, EntropyVars};

/// Numerical parameters of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Time step.
    pub tau: f64,
    /// Regularization weight of the `u` mass term.
    pub eps_reg: f64,
    /// Stopping tolerance on `|ζ|_∞`.
    pub eps_tol: f64,
    /// Inner iteration cap.
    pub m_max: usize,
    /// Floor applied to the initial densities.
    pub eta: f64,
    /// One coupled species+potential solve per iteration; otherwise potential first, then species.
    pub coupled_solve: bool,
    /// Number of times a rejected step may be retried as two half steps.
    pub max_halvings: u32,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tau: 1e-3,
            eps_reg: f64::EPSILON,
            eps_tol: 1e-10,
            m_max: 100,
            eta: 1e-5,
            coupled_solve: true,
            max_halvings: 0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidScenario(what.to_string()));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("solver.tau must be positive");
        }
        if !(self.eps_reg >= 0.0 && self.eps_reg.is_finite()) {
            return bad("solver.eps_reg must be nonnegative");
        }
        if !(self.eps_tol > 0.0) {
            return bad("solver.eps_tol must be positive");
        }
        if self.m_max < 1 {
            return bad("solver.m_max must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("solver.eta must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Initial densities.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    /// Three species: `rho_1` is 0.7 on `[0, 1/4)`, falls linearly to `eta` on
    /// `[1/4, 3/4)` and stays at `eta` afterwards; `rho_2 = 0.2`; `rho_3` the rest.
    Ramp,
    /// Spatially constant densities.
    Constant(Vec<f64>),
    /// Nodal tables, one row per species.
    Nodal(Vec<Vec<f64>>),
}

/// The ramp datum for species 1.
pub fn ramp_density(y: f64, eta: f64) -> f64 {
    if y < 0.25 {
        0.7
    } else if y < 0.75 {
        -2.0 * (0.7 - eta) * y - 2.0 * (0.25 * eta - 0.7 * 0.75)
    } else {
        eta
    }
}

impl InitialProfile {
    /// Nodal densities `[species][node]` before flooring.
    pub fn sample(&self, grid: &Grid1D, n: usize, eta: f64) -> Result<Vec<Vec<f64>>> {
        let nodes = grid.nodes();
        match self {
            InitialProfile::Ramp => {
                if n != 3 {
                    return Err(Error::InvalidScenario(format!(
                        "the ramp profile is defined for 3 species, got {n}"
                    )));
                }
                let rho1: Vec<f64> = nodes.iter().map(|y| ramp_density(*y, eta)).collect();
                let rho2 = vec![0.2; nodes.len()];
                let rho3 = rho1.iter().map(|r| 1.0 - r - 0.2).collect();
                Ok(vec![rho1, rho2, rho3])
            }
            InitialProfile::Constant(values) => {
                if values.len() != n {
                    return Err(Error::InvalidScenario(format!(
                        "{} constant densities for {n} species",
                        values.len()
                    )));
                }
                Ok(values.iter().map(|v| vec![*v; nodes.len()]).collect())
            }
            InitialProfile::Nodal(table) => {
                if table.len() != n || table.iter().any(|r| r.len() != nodes.len()) {
                    return Err(Error::InvalidScenario(format!(
                        "initial table must be {n} rows of {} nodal values",
                        nodes.len()
                    )));
                }
                Ok(table.clone())
            }
        }
    }
}

/// Everything that defines a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: MixtureSpec,
    pub grid: Grid1D,
    pub initial: InitialProfile,
    /// Dirichlet values `(Φ(0), Φ(1))`.
    pub phi_bc: (f64, f64),
    /// When false the electric field is dropped: `Φ ≡ 0` and no Poisson equation.
    pub field: bool,
    pub horizon: f64,
    pub solver: SolverParams,
    /// Store a frame every this many steps (the final step is always stored).
    pub output_every: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidScenario(
                "time horizon must be nonnegative".into(),
            ));
        }
        if self.output_every == 0 {
            return Err(Error::InvalidScenario(
                "output_every must be at least 1".into(),
            ));
        }
        if !(self.phi_bc.0.is_finite() && self.phi_bc.1.is_finite()) {
            return Err(Error::InvalidScenario(
                "potential boundary values must be finite".into(),
            ));
        }
        self.spec
            .background()
            .nodal_values(self.grid.n_nodes())
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        Ok(())
    }

    /// Number of time steps to reach the horizon.
    pub fn n_steps(&self) -> usize {
        let ratio = self.horizon / self.solver.tau;
        (ratio - 1e-9).ceil().max(0.0) as usize
    }
}

/// Boundary lift: `Φ_D` solves `-λ Φ_D'' = f` with the Dirichlet data, and
/// `w_D,i = (z_i/M_i - z_n/M_n) Φ_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lift {
    pub phi_d: Vec<f64>,
    /// Node-major, `n - 1` values per node.
    pub w_d: Vec<f64>,
}

impl Lift {
    pub fn w_d_at(&self, node: usize, m: usize) -> &[f64] {
        &self.w_d[node * m..(node + 1) * m]
    }
}

pub fn build_lift(scenario: &Scenario) -> Result<Lift> {
    let grid = &scenario.grid;
    let spec = &scenario.spec;
    let m = spec.n() - 1;
    let phi_d = if scenario.field {
        let f = spec.background().nodal_values(grid.n_nodes())?;
        fem1d::poisson_solve(grid, &f, spec.lambda(), scenario.phi_bc)?
    } else {
        vec![0.0; grid.n_nodes()]
    };
    let offsets = spec.charge_offsets();
    let mut w_d = Vec::with_capacity(grid.n_nodes() * m);
    for p in &phi_d {
        w_d.extend(offsets.iter().map(|o| o * p));
    }
    Ok(Lift { phi_d, w_d })
}

/// Discrete state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// Node-major shifted entropy variables, `n - 1` per node.
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// Compositions recovered from `(u + w_D, Φ)` at every node.
    pub comps: Vec<Composition>,
}

impl State {
    pub fn n_nodes(&self) -> usize {
        self.phi.len()
    }

    pub fn n_species(&self) -> usize {
        self.comps.first().map_or(0, |c| c.n())
    }

    pub fn u_at(&self, node: usize) -> &[f64] {
        let m = self.u.len() / self.phi.len();
        &self.u[node * m..(node + 1) * m]
    }

    /// Nodal density of one species.
    pub fn rho(&self, species: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c.rho[species]).collect()
    }

    /// Nodal molar fraction of one species.
    pub fn x(&self, species: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c.x[species]).collect()
    }

    /// `max_{i,j} |rho_i(y_j) - other_i(y_j)|`.
    pub fn max_density_difference(&self, other: &State) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.rho.iter().zip(&b.rho).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max)
    }
}

/// Frames stored at the output times plus one report per step (index 0 is `t = 0`).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<State>,
    pub reports: Vec<StepReport>,
}

/// Discretized problem: scenario, boundary lift and cached nodal data.
#[derive(Debug, Clone)]
pub struct Stepper {
    scenario: Scenario,
    lift: Lift,
    weights: Vec<f64>,
    background: Vec<f64>,
    offsets: Vec<f64>,
}

impl Stepper {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let lift = build_lift(&scenario)?;
        let weights = fem1d::lumped_mass(&scenario.grid);
        let background = if scenario.field {
            scenario
                .spec
                .background()
                .nodal_values(scenario.grid.n_nodes())?
        } else {
            vec![0.0; scenario.grid.n_nodes()]
        };
        let offsets = scenario.spec.charge_offsets();
        Ok(Stepper {
            scenario,
            lift,
            weights,
            background,
            offsets,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.scenario.spec
    }

    pub fn grid(&self) -> &Grid1D {
        &self.scenario.grid
    }

    pub fn lift(&self) -> &Lift {
        &self.lift
    }

    fn m(&self) -> usize {
        self.scenario.spec.n() - 1
    }

    /// Recovers compositions at every node from `(u + w_D, Φ)`.
    pub fn evaluate(&self, u: Vec<f64>, phi: Vec<f64>, t: f64) -> Result<State> {
        let m = self.m();
        let spec = self.spec();
        let comps = (0..phi.len())
            .map(|j| {
                let w = u[j * m..(j + 1) * m]
                    .iter()
                    .zip(self.lift.w_d_at(j, m))
                    .map(|(u, wd)| u + wd)
                    .collect();
                statemap::invert(&EntropyVars::new(w, phi[j]), spec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(State { t, u, phi, comps })
    }

    /// Floored initial densities, `Φ^0` from the Poisson equation, `u^0` from the densities.
    pub fn init_state(&self) -> Result<State> {
        let sc = &self.scenario;
        let spec = &sc.spec;
        let grid = &sc.grid;
        let n = spec.n();
        let eta = sc.solver.eta;
        let table = sc.initial.sample(grid, n, eta)?;
        let mut comps = Vec::with_capacity(grid.n_nodes());
        for j in 0..grid.n_nodes() {
            let mut rho: Vec<f64> = (0..n).map(|i| table[i][j]).collect();
            if rho.iter().any(|r| !r.is_finite()) {
                return Err(Error::InvalidScenario(format!(
                    "non-finite initial density at node {j}"
                )));
            }
            for r in rho.iter_mut().take(n - 1) {
                *r = r.max(eta);
            }
            rho[n - 1] = 1.0 - rho[..n - 1].iter().sum::<f64>();
            if rho[n - 1] < eta {
                return Err(Error::InvalidScenario(format!(
                    "initial densities at node {j} leave no room for the last species after flooring"
                )));
            }
            comps.push(Composition::from_rho(rho, spec)?);
        }
        let phi = if sc.field {
            let charge: Vec<f64> = comps
                .iter()
                .zip(&self.background)
                .map(|(c, f)| spec.charge_density(&c.rho) + f)
                .collect();
            fem1d::poisson_solve(grid, &charge, spec.lambda(), sc.phi_bc)?
        } else {
            vec![0.0; grid.n_nodes()]
        };
        let mut u = Vec::with_capacity(grid.n_nodes() * (n - 1));
        for (j, c) in comps.iter().enumerate() {
            u.extend(statemap::w_from_rho(c, phi[j], self.lift.phi_d[j], spec)?);
        }
        self.evaluate(u, phi, 0.0)
    }

    /// Mobility `B` per element at the midpoint of the averaged nodal entropy variables.
    pub fn element_mobilities(&self, state: &State) -> Result<Vec<DMatrix<f64>>> {
        let m = self.m();
        let spec = self.spec();
        (0..self.grid().n_elements())
            .map(|e| {
                let (ua, ub) = (state.u_at(e), state.u_at(e + 1));
                let (wa, wb) = (self.lift.w_d_at(e, m), self.lift.w_d_at(e + 1, m));
                let w = (0..m)
                    .map(|i| 0.5 * (ua[i] + wa[i] + ub[i] + wb[i]))
                    .collect();
                let phi = 0.5 * (state.phi[e] + state.phi[e + 1]);
                let comp = statemap::invert(&EntropyVars::new(w, phi), spec)?;
                let k = rescaled_k(spec, comp.c_tot)?;
                msalgebra::build_b(&comp.rho, comp.c_tot, &k)
            })
            .collect()
    }

    /// Nonlinear residuals at `guess`: species `[node][n-1]` and Poisson `[node]`.
    fn residuals(
        &self,
        prev: &State,
        guess: &State,
        params: &SolverParams,
        mobilities: &[DMatrix<f64>],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.m();
        let spec = self.spec();
        let grid = self.grid();
        let h = grid.h();
        let tau = params.tau;
        let mut species = vec![0.0; grid.n_nodes() * m];
        for j in 0..grid.n_nodes() {
            let wt = self.weights[j];
            let rates = spec.reaction_rates(&guess.comps[j].x)?;
            let u = guess.u_at(j);
            for i in 0..m {
                species[j * m + i] = wt
                    * (guess.comps[j].rho[i] - prev.comps[j].rho[i] + params.eps_reg * tau * u[i]
                        - tau * rates[i]);
            }
        }
        let mut grad = vec![0.0; m];
        for (e, b) in mobilities.iter().enumerate() {
            let (ua, ub) = (guess.u_at(e), guess.u_at(e + 1));
            let (wa, wb) = (self.lift.w_d_at(e, m), self.lift.w_d_at(e + 1, m));
            for i in 0..m {
                grad[i] = ((ub[i] + wb[i]) - (ua[i] + wa[i])) / h;
            }
            for i in 0..m {
                let flux: f64 = (0..m).map(|k| b[(i, k)] * grad[k]).sum();
                species[e * m + i] -= tau * flux;
                species[(e + 1) * m + i] += tau * flux;
            }
        }
        let mut poisson = vec![0.0; grid.n_nodes()];
        if self.scenario.field {
            let lambda = spec.lambda();
            for (j, p) in poisson.iter_mut().enumerate() {
                *p = -self.weights[j]
                    * (spec.charge_density(&guess.comps[j].rho) + self.background[j]);
            }
            for e in 0..grid.n_elements() {
                let g = lambda * (guess.phi[e + 1] - guess.phi[e]) / h;
                poisson[e] -= g;
                poisson[e + 1] += g;
            }
        }
        Ok((species, poisson))
    }

    fn nodal_jacobians(&self, state: &State) -> Result<Vec<DMatrix<f64>>> {
        state
            .comps
            .iter()
            .map(|c| statemap::jacobian_from_composition(c, self.spec()))
            .collect()
    }

    /// Coupled linear system for `ζ = (u - ū, Φ - Φ̄)`, block size `n` per node
    /// (`n - 1` species increments followed by the potential increment).
    pub fn assemble_inner_system(
        &self,
        prev: &State,
        guess: &State,
        params: &SolverParams,
    ) -> Result<BandedSystem> {
        if let Some(j) = guess.comps.iter().position(|c| !c.is_interior()) {
            return Err(Error::Domain(format!(
                "composition at node {j} is on the simplex boundary"
            )));
        }
        let mobilities = self.element_mobilities(guess)?;
        let jacobians = self.nodal_jacobians(guess)?;
        let (res_species, res_poisson) = self.residuals(prev, guess, params, &mobilities)?;
        self.coupled_system(params, &mobilities, &jacobians, &res_species, &res_poisson)
    }

    fn coupled_system(
        &self,
        params: &SolverParams,
        mobilities: &[DMatrix<f64>],
        jacobians: &[DMatrix<f64>],
        res_species: &[f64],
        res_poisson: &[f64],
    ) -> Result<BandedSystem> {
        let m = self.m();
        let bs = m + 1;
        let grid = self.grid();
        let tau = params.tau;
        let mut a = BlockTridiagonal::zeros(grid.n_nodes(), bs);
        let mut rhs = vec![0.0; grid.n_nodes() * bs];
        for (j, jac) in jacobians.iter().enumerate() {
            let wt = self.weights[j];
            let base = j * bs;
            for i in 0..m {
                for k in 0..=m {
                    a.add(base + i, base + k, wt * jac[(i, k)]);
                }
                a.add(base + i, base + i, params.eps_reg * tau * wt);
                rhs[base + i] = -res_species[j * m + i];
            }
            if self.scenario.field {
                for k in 0..=m {
                    let dq: f64 = (0..m).map(|i| self.offsets[i] * jac[(i, k)]).sum();
                    a.add(base + m, base + k, -wt * dq);
                }
                rhs[base + m] = -res_poisson[j];
            }
        }
        fem1d::add_weighted_stiffness(&mut a, grid, mobilities, 0, tau)?;
        let mut sys = if self.scenario.field {
            let lambda = vec![DMatrix::from_element(1, 1, self.spec().lambda()); grid.n_elements()];
            fem1d::add_weighted_stiffness(&mut a, grid, &lambda, m, 1.0)?;
            let mut sys = BandedSystem::new(a, rhs);
            sys.constrain(0, m, 0.0);
            sys.constrain(grid.n_elements(), m, 0.0);
            sys
        } else {
            let mut sys = BandedSystem::new(a, rhs);
            for j in 0..grid.n_nodes() {
                sys.constrain(j, m, 0.0);
            }
            sys
        };
        sys.apply_constraints();
        Ok(sys)
    }

    /// Potential first (species frozen), then species with the potential increment.
    fn split_increment(
        &self,
        params: &SolverParams,
        mobilities: &[DMatrix<f64>],
        jacobians: &[DMatrix<f64>],
        res_species: &[f64],
        res_poisson: &[f64],
    ) -> Result<Vec<f64>> {
        let m = self.m();
        let grid = self.grid();
        let nodes = grid.n_nodes();
        let tau = params.tau;
        let dphi = if self.scenario.field {
            let mut k = BlockTridiagonal::zeros(nodes, 1);
            let lambda = vec![DMatrix::from_element(1, 1, self.spec().lambda()); grid.n_elements()];
            fem1d::add_weighted_stiffness(&mut k, grid, &lambda, 0, 1.0)?;
            for (j, jac) in jacobians.iter().enumerate() {
                let dq: f64 = (0..m).map(|i| self.offsets[i] * jac[(i, m)]).sum();
                k.add(j, j, -self.weights[j] * dq);
            }
            let mut sys = BandedSystem::new(k, res_poisson.iter().map(|r| -r).collect());
            sys.constrain(0, 0, 0.0);
            sys.constrain(grid.n_elements(), 0, 0.0);
            fem1d::solve_banded(sys)?
        } else {
            vec![0.0; nodes]
        };
        let mut a = BlockTridiagonal::zeros(nodes, m);
        let mut rhs = vec![0.0; nodes * m];
        for (j, jac) in jacobians.iter().enumerate() {
            let wt = self.weights[j];
            for i in 0..m {
                for k in 0..m {
                    a.add(j * m + i, j * m + k, wt * jac[(i, k)]);
                }
                a.add(j * m + i, j * m + i, params.eps_reg * tau * wt);
                rhs[j * m + i] = -res_species[j * m + i] - wt * jac[(i, m)] * dphi[j];
            }
        }
        fem1d::add_weighted_stiffness(&mut a, grid, mobilities, 0, tau)?;
        let du = fem1d::solve_banded(BandedSystem::new(a, rhs))?;
        let mut zeta = Vec::with_capacity(nodes * (m + 1));
        for j in 0..nodes {
            zeta.extend_from_slice(&du[j * m..(j + 1) * m]);
            zeta.push(dphi[j]);
        }
        Ok(zeta)
    }

    /// One increment of the inner iteration, laid out as `[node][u_1..u_{n-1}, Φ]`.
    fn inner_increment(
        &self,
        prev: &State,
        guess: &State,
        params: &SolverParams,
    ) -> Result<Vec<f64>> {
        let mobilities = self.element_mobilities(guess)?;
        let jacobians = self.nodal_jacobians(guess)?;
        let (res_species, res_poisson) = self.residuals(prev, guess, params, &mobilities)?;
        if params.coupled_solve {
            let sys =
                self.coupled_system(params, &mobilities, &jacobians, &res_species, &res_poisson)?;
            fem1d::solve_banded(sys)
        } else {
            self.split_increment(params, &mobilities, &jacobians, &res_species, &res_poisson)
        }
    }

    /// Advances one time step of size `params.tau`.
    pub fn advance(&self, prev: &State, params: &SolverParams) -> Result<(State, StepReport)> {
        let m = self.m();
        let t = prev.t + params.tau;
        let mut guess = State { t, ..prev.clone() };
        let mut zeta_inf = f64::INFINITY;
        let mut iterations = 0;
        while iterations < params.m_max {
            iterations += 1;
            let zeta = self.inner_increment(prev, &guess, params)?;
            zeta_inf = zeta.iter().fold(0.0, |a, v| a.max(v.abs()));
            let mut u = guess.u.clone();
            let mut phi = guess.phi.clone();
            for j in 0..phi.len() {
                for i in 0..m {
                    u[j * m + i] += zeta[j * (m + 1) + i];
                }
                phi[j] += zeta[j * (m + 1) + m];
            }
            guess = self.evaluate(u, phi, t)?;
            if zeta_inf < params.eps_tol {
                break;
            }
        }
        if !(zeta_inf < params.eps_tol) {
            return Err(Error::NotConverged {
                t,
                iterations,
                zeta_inf,
            });
        }
        debug!("t = {t:.6}: {iterations} iterations, |zeta| = {zeta_inf:e}");
        let report = self.report(prev, &guess, params, iterations, zeta_inf)?;
        Ok((guess, report))
    }

    /// [`Stepper::advance`], retrying a rejected step as two half steps up to
    /// `params.max_halvings` times.
    pub fn advance_with_fallback(
        &self,
        prev: &State,
        params: &SolverParams,
    ) -> Result<(State, StepReport)> {
        match self.advance(prev, params) {
            Err(Error::NotConverged { .. }) if params.max_halvings > 0 => {
                warn!(
                    "step at t = {} rejected, retrying with tau = {}",
                    prev.t,
                    params.tau / 2.0
                );
                let half = SolverParams {
                    tau: params.tau / 2.0,
                    max_halvings: params.max_halvings - 1,
                    ..*params
                };
                let (mid, first) = self.advance_with_fallback(prev, &half)?;
                let (end, second) = self.advance_with_fallback(&mid, &half)?;
                let mut report = self.report(
                    prev,
                    &end,
                    params,
                    first.iterations + second.iterations,
                    second.zeta_inf,
                )?;
                report.entropy_residual = first.entropy_residual + second.entropy_residual;
                Ok((end, report))
            }
            other => other,
        }
    }

    fn report(
        &self,
        prev: &State,
        next: &State,
        params: &SolverParams,
        iterations: usize,
        zeta_inf: f64,
    ) -> Result<StepReport> {
        let mobilities = self.element_mobilities(next)?;
        let grid = self.grid();
        let spec = self.spec();
        Ok(StepReport {
            t: next.t,
            entropy: diagnostics::entropy(grid, spec, &self.lift, next),
            relative_entropy: None,
            masses: diagnostics::masses(grid, next),
            entropy_residual: diagnostics::entropy_step_residual(
                grid,
                spec,
                &self.lift,
                params,
                next,
                prev,
                &mobilities,
            )?,
            iterations,
            zeta_inf,
            stationarity: next.max_density_difference(prev) / params.tau,
        })
    }

    /// Report for the initial state.
    pub fn initial_report(&self, state: &State) -> StepReport {
        StepReport {
            t: state.t,
            entropy: diagnostics::entropy(self.grid(), self.spec(), &self.lift, state),
            relative_entropy: None,
            masses: diagnostics::masses(self.grid(), state),
            entropy_residual: 0.0,
            iterations: 0,
            zeta_inf: 0.0,
            stationarity: 0.0,
        }
    }

    /// Marches to the horizon with the scenario's parameters.
    pub fn run(&self) -> Result<Trajectory> {
        self.run_with(None, |_, _, _| {})
    }

    /// Marches to the horizon, filling the relative entropy against `reference`
    /// when given and calling `observer(prev, next, report)` after every step.
    pub fn run_with<F>(&self, reference: Option<&State>, mut observer: F) -> Result<Trajectory>
    where
        F: FnMut(&State, &State, &StepReport),
    {
        let params = self.scenario.solver;
        let mut state = self.init_state()?;
        let mut first = self.initial_report(&state);
        if let Some(r) = reference {
            first.relative_entropy = Some(diagnostics::relative_entropy(
                self.grid(),
                self.spec(),
                &state,
                r,
            ));
        }
        let mut reports = vec![first];
        let mut frames = vec![state.clone()];
        let steps = self.scenario.n_steps();
        for k in 1..=steps {
            let (mut next, mut report) = self.advance_with_fallback(&state, &params)?;
            // k * tau instead of the accumulated sum
            next.t = k as f64 * params.tau;
            report.t = next.t;
            if let Some(r) = reference {
                report.relative_entropy = Some(diagnostics::relative_entropy(
                    self.grid(),
                    self.spec(),
                    &next,
                    r,
                ));
            }
            observer(&state, &next, &report);
            if k % self.scenario.output_every == 0 || k == steps {
                frames.push(next.clone());
            }
            reports.push(report);
            state = next;
        }
        Ok(Trajectory { frames, reports })
    }

    /// Marches from `start` until `|rho^k - rho^{k-1}|_∞ / τ <= tol` or `t_max` is reached.
    /// Stationary points do not depend on `τ`, so `params` may use a larger step than the run.
    pub fn steady_state(
        &self,
        start: &State,
        params: &SolverParams,
        tol: f64,
        t_max: f64,
    ) -> Result<State> {
        let params = *params;
        let mut state = start.clone();
        while state.t < t_max {
            let (next, report) = self.advance_with_fallback(&state, &params)?;
            state = next;
            if report.stationarity <= tol {
                return Ok(state);
            }
        }
        warn!("stationarity tolerance {tol:e} not reached by t = {t_max}");
        Ok(state)
    }

    /// Spatially constant state with the masses of `initial`; the exact steady
    /// state when the field is dropped and there are no reactions.
    pub fn uniform_steady_state(&self, initial: &State) -> Result<State> {
        if self.scenario.field {
            return Err(Error::InvalidScenario(
                "the uniform steady state applies only without electric field".into(),
            ));
        }
        let masses = diagnostics::masses(self.grid(), initial);
        let total: f64 = masses.iter().sum();
        let rho: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let comp = Composition::from_rho(rho, self.spec())?;
        let u0 = statemap::w_from_rho(&comp, 0.0, 0.0, self.spec())?;
        let nodes = self.grid().n_nodes();
        let u = (0..nodes).flat_map(|_| u0.iter().copied()).collect();
        self.evaluate(u, vec![0.0; nodes], initial.t)
    }
}
