//! Multi-run workflows: runs with relative-entropy tracking and the spatial
//! convergence study on nested grids.

use log::info;
use rayon::prelude::*;

use crate::diagnostics::{self, LinearFit, Rates};
use crate::error::{Error, Result};
use crate::fem1d::{self, Grid1D};
use crate::scenario::ScenarioFile;
use crate::stepper::{Scenario, SolverParams, State, Stepper, Trajectory};

/// Stationarity tolerance `|rho^k - rho^{k-1}|_∞ / τ` for steady states.
pub const STEADY_TOL: f64 = 1e-8;
/// Time limit of the march to a steady state.
pub const STEADY_T_MAX: f64 = 500.0;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub steady: Option<State>,
    /// Semilog fit of the relative entropy over the scenario's fit window.
    pub decay: Option<LinearFit>,
}

/// Steady state used as reference for the relative entropy: the uniform state
/// without field, otherwise the scheme marched to stationarity with a step of
/// at least `1e-2` (stationary points do not depend on the step).
pub fn reference_steady_state(stepper: &Stepper, initial: &State) -> Result<State> {
    if !stepper.scenario().field {
        return stepper.uniform_steady_state(initial);
    }
    let base = stepper.scenario().solver;
    let params = SolverParams {
        tau: base.tau.max(1e-2),
        max_halvings: base.max_halvings.max(4),
        ..base
    };
    let steady = stepper.steady_state(initial, &params, STEADY_TOL, STEADY_T_MAX)?;
    info!("steady state reached at t = {:.3}", steady.t);
    Ok(steady)
}

/// Runs a scenario, tracking the relative entropy when requested.
pub fn run(file: &ScenarioFile) -> Result<RunOutcome> {
    let stepper = Stepper::new(file.to_scenario()?)?;
    if !file.outputs.relative_entropy {
        return Ok(RunOutcome {
            trajectory: stepper.run()?,
            steady: None,
            decay: None,
        });
    }
    let initial = stepper.init_state()?;
    let steady = reference_steady_state(&stepper, &initial)?;
    let trajectory = stepper.run_with(Some(&steady), |_, _, _| {})?;
    let (ts, hs): (Vec<f64>, Vec<f64>) = trajectory
        .reports
        .iter()
        .filter_map(|r| r.relative_entropy.map(|h| (r.t, h)))
        .unzip();
    let [a, b] = file.outputs.fit_window;
    let decay = diagnostics::semilog_fit(&ts, &hs, (a, b)).ok();
    Ok(RunOutcome {
        trajectory,
        steady: Some(steady),
        decay,
    })
}

/// Errors of one grid against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub n_p: usize,
    pub h: f64,
    pub err_rho: Vec<f64>,
    pub err_phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub reference_n_p: usize,
    pub levels: Vec<LevelError>,
    pub species_rates: Vec<Rates>,
    pub phi_rate: Rates,
}

impl ConvergenceStudy {
    /// Smallest least-squares order over all species and the potential.
    pub fn min_fitted_rate(&self) -> f64 {
        self.species_rates
            .iter()
            .chain([&self.phi_rate])
            .map(|r| r.fitted)
            .fold(f64::INFINITY, f64::min)
    }
}

fn final_state(scenario: &Scenario) -> Result<State> {
    let stepper = Stepper::new(scenario.clone())?;
    let traj = stepper.run()?;
    Ok(traj
        .frames
        .last()
        .expect("a run always stores the initial frame")
        .clone())
}

/// Worker count: `MSMS_THREADS` if set, else one per job.
fn thread_count(jobs: usize) -> usize {
    std::env::var("MSMS_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|v| *v > 0)
        .unwrap_or(jobs)
}

/// Runs every level and the reference grid to the horizon and measures the
/// `L²` errors of the final densities and potential.
pub fn convergence_study(file: &ScenarioFile) -> Result<ConvergenceStudy> {
    let conv = file
        .convergence
        .as_ref()
        .ok_or_else(|| Error::InvalidScenario("the scenario has no convergence section".into()))?;
    let base = file.to_scenario()?;
    // coarse to fine
    let mut sizes = conv.levels.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::InvalidScenario(
            "a convergence study needs at least two levels".into(),
        ));
    }
    let mut jobs = sizes.clone();
    jobs.push(conv.reference_n_p);
    let scenarios = jobs
        .iter()
        .map(|n_p| {
            let mut sc = base.clone();
            sc.grid = Grid1D::new(*n_p)?;
            sc.output_every = usize::MAX;
            Ok(sc)
        })
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(jobs.len()))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let finals: Vec<State> = pool.install(|| {
        scenarios
            .par_iter()
            .map(final_state)
            .collect::<Result<Vec<_>>>()
    })?;
    let (reference, coarse) = finals.split_last().expect("at least three jobs");
    let fine = Grid1D::new(conv.reference_n_p)?;
    let n = base.spec.n();
    let mut levels = Vec::with_capacity(coarse.len());
    for (state, n_p) in coarse.iter().zip(&sizes) {
        let grid = Grid1D::new(*n_p)?;
        let err_rho = (0..n)
            .map(|i| fem1d::l2_distance(&grid, &state.rho(i), &fine, &reference.rho(i)))
            .collect::<Result<Vec<_>>>()?;
        let err_phi = fem1d::l2_distance(&grid, &state.phi, &fine, &reference.phi)?;
        levels.push(LevelError {
            n_p: *n_p,
            h: grid.h(),
            err_rho,
            err_phi,
        });
    }
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let species_rates = (0..n)
        .map(|i| {
            let errs: Vec<f64> = levels.iter().map(|l| l.err_rho[i]).collect();
            diagnostics::convergence_rates(&hs, &errs)
        })
        .collect::<Result<Vec<_>>>()?;
    let phi_errs: Vec<f64> = levels.iter().map(|l| l.err_phi).collect();
    let phi_rate = diagnostics::convergence_rates(&hs, &phi_errs)?;
    Ok(ConvergenceStudy {
        reference_n_p: conv.reference_n_p,
        levels,
        species_rates,
        phi_rate,
    })
}
