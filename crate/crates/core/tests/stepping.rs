#![allow(clippy::needless_range_loop)]

use approx::assert_relative_eq;

use msms::diagnostics;
use msms::fem1d::{self, Grid1D};
use msms::scenario::preset;
use msms::stepper::InitialProfile;
use msms::{Error, MixtureSpec, Scenario, SolverParams, State, Stepper};

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn binary_stepper() -> Stepper {
    let spec = MixtureSpec::from_pairs(vec![1.0, 1.0], vec![1.0, 0.0], &[0.4], 0.7).unwrap();
    Stepper::new(Scenario {
        spec,
        grid: Grid1D::new(2).unwrap(),
        initial: InitialProfile::Nodal(vec![vec![0.3, 0.5, 0.6], vec![0.7, 0.5, 0.4]]),
        phi_bc: (1.0, 0.0),
        field: true,
        horizon: 1.0,
        solver: SolverParams {
            eps_reg: 1e-3,
            ..SolverParams::default()
        },
        output_every: 1,
    })
    .unwrap()
}

// Two species, unit masses, z = (1, 0): rho_1 = sigmoid(w_1 - Φ), B = rho_1 rho_2 D_12,
// d rho_1 / d w_1 = -d rho_1 / d Φ = rho_1 rho_2.
#[test]
fn binary_system_matches_hand_assembly() {
    let st = binary_stepper();
    let prev = st.init_state().unwrap();
    let u = vec![prev.u[0] + 0.1, prev.u[1] - 0.2, prev.u[2] + 0.05];
    let phi = vec![1.0, prev.phi[1] + 0.3, 0.0];
    let guess = st.evaluate(u.clone(), phi.clone(), 1e-3).unwrap();
    let params = st.scenario().solver;
    let (tau, eps, lambda, d12) = (params.tau, params.eps_reg, 0.7, 0.4);
    let h = 0.5;
    let wd = [1.0, 0.5, 0.0];
    let w: Vec<f64> = (0..3).map(|j| u[j] + wd[j]).collect();
    let rho1: Vec<f64> = (0..3).map(|j| sigmoid(w[j] - phi[j])).collect();
    let prev_rho1: Vec<f64> = (0..3).map(|j| prev.comps[j].rho[0]).collect();
    for j in 0..3 {
        assert_relative_eq!(guess.comps[j].rho[0], rho1[j], epsilon = 1e-15);
    }
    let b: Vec<f64> = (0..2)
        .map(|e| {
            let r = sigmoid(0.5 * (w[e] + w[e + 1]) - 0.5 * (phi[e] + phi[e + 1]));
            r * (1.0 - r) * d12
        })
        .collect();
    let wt = [h / 2.0, h, h / 2.0];

    let mut a = [[0.0; 6]; 6];
    let mut rhs = [0.0; 6];
    for j in 0..3 {
        let jw = rho1[j] * (1.0 - rho1[j]);
        let (su, sp) = (2 * j, 2 * j + 1);
        a[su][su] += wt[j] * jw + eps * tau * wt[j];
        a[su][sp] += -wt[j] * jw;
        a[sp][su] += -wt[j] * jw;
        a[sp][sp] += wt[j] * jw;
        rhs[su] -= wt[j] * (rho1[j] - prev_rho1[j] + eps * tau * u[j]);
        rhs[sp] += wt[j] * rho1[j];
    }
    for e in 0..2 {
        let (ua, ub) = (2 * e, 2 * e + 2);
        let (pa, pb) = (2 * e + 1, 2 * e + 3);
        let kb = tau * b[e] / h;
        let kl = lambda / h;
        a[ua][ua] += kb;
        a[ub][ub] += kb;
        a[ua][ub] -= kb;
        a[ub][ua] -= kb;
        a[pa][pa] += kl;
        a[pb][pb] += kl;
        a[pa][pb] -= kl;
        a[pb][pa] -= kl;
        let flux = tau * b[e] * (w[e + 1] - w[e]) / h;
        rhs[ua] += flux;
        rhs[ub] -= flux;
        let g = lambda * (phi[e + 1] - phi[e]) / h;
        rhs[pa] += g;
        rhs[pb] -= g;
    }
    // potential increments vanish at both ends
    for g in [1, 5] {
        for k in 0..6 {
            a[g][k] = 0.0;
            a[k][g] = 0.0;
        }
        a[g][g] = 1.0;
        rhs[g] = 0.0;
    }

    let sys = st.assemble_inner_system(&prev, &guess, &params).unwrap();
    let dense = sys.matrix.to_dense();
    for r in 0..6 {
        for c in 0..6 {
            assert_relative_eq!(dense[r][c], a[r][c], epsilon = 1e-13);
        }
        assert_relative_eq!(sys.rhs[r], rhs[r], epsilon = 1e-13);
    }
}

fn example1() -> Stepper {
    Stepper::new(preset("example1").unwrap().to_scenario().unwrap()).unwrap()
}

#[test]
fn first_step_stays_in_simplex() {
    let st = example1();
    let s0 = st.init_state().unwrap();
    let (s1, report) = st.advance(&s0, &st.scenario().solver).unwrap();
    assert!(report.iterations <= 100 && report.zeta_inf < 1e-10);
    for c in &s1.comps {
        assert!(c.rho.iter().all(|r| *r > 0.0 && *r < 1.0));
        assert!((c.rho.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn advance_is_deterministic() {
    let st = example1();
    let s0 = st.init_state().unwrap();
    let params = st.scenario().solver;
    let (a, ra) = st.advance(&s0, &params).unwrap();
    let (b, rb) = st.advance(&s0, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

fn step_difference(st: &Stepper, s0: &State, tau: f64) -> f64 {
    let full = SolverParams {
        tau,
        eps_tol: 1e-12,
        ..st.scenario().solver
    };
    let half = SolverParams {
        tau: tau / 2.0,
        ..full
    };
    let (one, _) = st.advance(s0, &full).unwrap();
    let (mid, _) = st.advance(s0, &half).unwrap();
    let (two, _) = st.advance(&mid, &half).unwrap();
    one.max_density_difference(&two)
}

#[test]
fn halving_the_step_is_first_order_consistent() {
    let st = Stepper::new(preset("example3").unwrap().to_scenario().unwrap()).unwrap();
    let s0 = st.init_state().unwrap();
    let (s1, _) = st.advance(&s0, &st.scenario().solver).unwrap();
    let d1 = step_difference(&st, &s1, 2e-3);
    let d2 = step_difference(&st, &s1, 1e-3);
    assert!(d1 < 2e-3 * 10.0, "difference {d1}");
    assert!(d1 / d2 > 1.8, "ratio {}", d1 / d2);
}

#[test]
fn split_and_coupled_iterations_agree() {
    let st = Stepper::new(preset("example3").unwrap().to_scenario().unwrap()).unwrap();
    let s0 = st.init_state().unwrap();
    let coupled = st.scenario().solver;
    let split = SolverParams {
        coupled_solve: false,
        ..coupled
    };
    let (a, _) = st.advance(&s0, &coupled).unwrap();
    let (b, _) = st.advance(&s0, &split).unwrap();
    assert!(a.max_density_difference(&b) < 1e-9);
    for (p, q) in a.phi.iter().zip(&b.phi) {
        assert!((p - q).abs() < 1e-9);
    }
}

#[test]
fn potential_solves_poisson_after_each_step() {
    let st = Stepper::new(preset("example3").unwrap().to_scenario().unwrap()).unwrap();
    let mut s = st.init_state().unwrap();
    let spec = st.spec().clone();
    for _ in 0..5 {
        s = st.advance(&s, &st.scenario().solver).unwrap().0;
        let charge: Vec<f64> = s
            .comps
            .iter()
            .map(|c| spec.charge_density(&c.rho))
            .collect();
        let phi = fem1d::poisson_solve(st.grid(), &charge, spec.lambda(), (10.0, 0.0)).unwrap();
        for (a, b) in phi.iter().zip(&s.phi) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn entropy_is_nonincreasing_with_equilibrium_boundary_data() {
    let st = example1();
    let mut s = st.init_state().unwrap();
    let mut h = st.initial_report(&s).entropy;
    for _ in 0..300 {
        let (next, report) = st.advance(&s, &st.scenario().solver).unwrap();
        assert!(report.entropy <= h + 1e-8);
        assert!(report.entropy_residual <= 1e-8);
        h = report.entropy;
        s = next;
    }
}

#[test]
fn rejection_and_fallback() {
    let st = example1();
    let s0 = st.init_state().unwrap();
    let strict = SolverParams {
        m_max: 2,
        ..st.scenario().solver
    };
    match st.advance(&s0, &strict) {
        Err(Error::NotConverged { iterations, .. }) => assert_eq!(iterations, 2),
        other => panic!("expected a rejected step, got {other:?}"),
    }
    // later steps need fewer iterations as the step shrinks
    let mut s = s0;
    for _ in 0..10 {
        s = st.advance(&s, &st.scenario().solver).unwrap().0;
    }
    let capped = SolverParams {
        m_max: 8,
        max_halvings: 6,
        ..st.scenario().solver
    };
    assert!(st
        .advance(
            &s,
            &SolverParams {
                max_halvings: 0,
                ..capped
            }
        )
        .is_err());
    let (next, report) = st.advance_with_fallback(&s, &capped).unwrap();
    assert_relative_eq!(next.t, s.t + 1e-3, epsilon = 1e-15);
    assert!(report.entropy_residual <= 1e-8);
    let (reference, _) = st.advance(&s, &st.scenario().solver).unwrap();
    assert!(next.max_density_difference(&reference) < 1e-3);
}

#[test]
fn no_field_decay_rates_are_comparable() {
    let mut rates = Vec::new();
    for name in ["example5", "example5-m2", "example5-m6"] {
        let file = preset(name).unwrap().with_overrides(&["time.T=4"]).unwrap();
        let outcome = msms::study::run(&file).unwrap();
        let fit = outcome.decay.unwrap();
        assert!(fit.slope < 0.0);
        rates.push(-fit.slope);
        let reports = &outcome.trajectory.reports;
        let h: Vec<f64> = reports
            .iter()
            .map(|r| r.relative_entropy.unwrap())
            .collect();
        assert!(h.iter().all(|v| *v >= -1e-12));
        let masses =
            diagnostics::masses(&Grid1D::new(100).unwrap(), outcome.steady.as_ref().unwrap());
        assert_relative_eq!(masses[1], 0.2, epsilon = 1e-12);
    }
    let max = rates.iter().cloned().fold(f64::MIN, f64::max);
    let min = rates.iter().cloned().fold(f64::MAX, f64::min);
    assert!(max / min <= 2.0, "decay rates {rates:?}");
}
