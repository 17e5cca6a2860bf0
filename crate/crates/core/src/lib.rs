//! Entropy-variable Galerkin solver for the one-dimensional Poisson–Maxwell–Stefan
//! system of an isothermal, ionized fluid mixture.
//!
//! The species balance equations are written in electro-chemical potentials
//! `w` (entropy variables), so the densities recovered from `w` stay in the open
//! simplex by construction. Time stepping is implicit Euler; each step solves the
//! nonlinear Galerkin system with a linearized semi-implicit inner iteration on a
//! coupled block-tridiagonal system (species + potential).
//!
//! Module map:
//!
//! * [`mixture`]: species parameters, rescaled diffusivities, driving forces.
//! * [`msalgebra`]: the Maxwell–Stefan matrices `A`, `A0`, `C`, `B` and the flux formulations.
//! * [`statemap`]: conversions between `(w, Φ)`, molar fractions and densities.
//! * [`fem1d`]: grid, assembly and banded direct solves for P1 elements.
//! * [`stepper`]: initial state, boundary lift, inner iteration, time marching.
//! * [`diagnostics`]: entropy, relative entropy, masses, entropy-production residual, rates.
//! * [`scenario`], [`output`], [`study`], [`cli`]: scenario files, presets, CSV/SVG output,
//!   the mesh-convergence study and the command-line front end.
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fem1d;
pub mod mixture;
pub mod msalgebra;
pub mod output;
pub mod scenario;
pub mod statemap;
pub mod stepper;
pub mod study;

pub use diagnostics::StepReport;
pub use error::{Error, Result};
pub use fem1d::Grid1D;
pub use mixture::{BackgroundCharge, Composition, MixtureSpec};
pub use statemap::EntropyVars;
pub use stepper::{InitialProfile, Lift, Scenario, SolverParams, State, Stepper, Trajectory};
