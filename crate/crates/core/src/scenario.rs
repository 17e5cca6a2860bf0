//! JSON scenario files, built-in presets and dotted-path overrides.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fem1d::Grid1D;
use crate::mixture::{BackgroundCharge, MixtureSpec};
use crate::stepper::{InitialProfile, Scenario, SolverParams};

/// Pair diffusivities of the ternary test mixture, `(D_12, D_13, D_23)`.
pub const TERNARY_DIFFUSIVITIES: [f64; 3] = [0.833, 0.680, 0.168];

pub const PRESETS: &[&str] = &[
    "example1",
    "example2",
    "example3",
    "example3-m4",
    "example3-m6",
    "example4",
    "example4-m4",
    "example4-m6",
    "example5",
    "example5-m2",
    "example5-m6",
    "convergence",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub species: SpeciesSection,
    pub physics: PhysicsSection,
    pub domain: DomainSection,
    pub bc: BcSection,
    pub initial: InitialSection,
    pub time: TimeSection,
    pub solver: SolverSection,
    pub outputs: OutputsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSection {
    pub n: usize,
    #[serde(rename = "M")]
    pub molar_masses: Vec<f64>,
    pub z: Vec<f64>,
    /// Full symmetric matrix; the diagonal is ignored.
    #[serde(rename = "Dms")]
    pub diffusivities: Vec<Vec<f64>>,
}

/// `"zero"` or a nodal table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackgroundSpec {
    Named(String),
    Nodal(Vec<f64>),
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub lambda: f64,
    pub f: BackgroundSpec,
    pub reactions: String,
    /// `false` drops the electric field altogether.
    #[serde(default = "yes")]
    pub field: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub n_p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSection {
    pub phi_left: f64,
    pub phi_right: f64,
}

/// Either a named profile (`"ramp"`) or per-species tables. A table row of
/// length one is a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub output_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub eps_reg: f64,
    pub eps_tol: f64,
    pub m_max: usize,
    pub eta: f64,
    pub coupled_solve: bool,
    #[serde(default)]
    pub max_halvings: u32,
}

fn default_window() -> [f64; 2] {
    [1.0, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub dir: String,
    pub plots: bool,
    /// Track the relative entropy against the steady state.
    #[serde(default)]
    pub relative_entropy: bool,
    /// Time window of the semilog fit of the relative entropy.
    #[serde(default = "default_window")]
    pub fit_window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Element counts of the compared grids; each must divide `reference_n_p`.
    pub levels: Vec<usize>,
    pub reference_n_p: usize,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files always serialize")
    }

    /// Applies `key=value` overrides, where `key` is a dotted path and `value`
    /// is JSON (bare words are taken as strings).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            apply_override(&mut doc, o.as_ref())?;
        }
        serde_json::from_value(doc).map_err(|e| Error::InvalidScenario(e.to_string()))
    }

    /// Checks the document and builds the run description.
    pub fn to_scenario(&self) -> Result<Scenario> {
        self.build().map_err(|e| match e {
            Error::InvalidScenario(_) => e,
            other => Error::InvalidScenario(other.to_string()),
        })
    }

    fn build(&self) -> Result<Scenario> {
        let sp = &self.species;
        let n = sp.n;
        if sp.molar_masses.len() != n || sp.z.len() != n {
            return Err(Error::InvalidScenario(format!(
                "species.n = {n} but {} molar masses and {} charges given",
                sp.molar_masses.len(),
                sp.z.len()
            )));
        }
        if sp.diffusivities.len() != n || sp.diffusivities.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidScenario(format!(
                "species.Dms must be {n}x{n}"
            )));
        }
        let d = DMatrix::from_fn(n, n, |i, j| sp.diffusivities[i][j]);
        let grid = Grid1D::new(self.domain.n_p)?;
        let background = match &self.physics.f {
            BackgroundSpec::Named(name) if name == "zero" => BackgroundCharge::Zero,
            BackgroundSpec::Named(name) => {
                return Err(Error::InvalidScenario(format!(
                    "physics.f must be \"zero\" or a nodal table, got \"{name}\""
                )))
            }
            BackgroundSpec::Nodal(values) => {
                if values.len() != grid.n_nodes() {
                    return Err(Error::InvalidScenario(format!(
                        "physics.f has {} values, the grid has {} nodes",
                        values.len(),
                        grid.n_nodes()
                    )));
                }
                BackgroundCharge::Nodal(values.clone())
            }
        };
        if self.physics.reactions != "none" {
            return Err(Error::InvalidScenario(format!(
                "physics.reactions must be \"none\", got \"{}\"",
                self.physics.reactions
            )));
        }
        let spec = MixtureSpec::new(
            sp.molar_masses.clone(),
            sp.z.clone(),
            d,
            self.physics.lambda,
        )?
        .with_background(background);
        let initial = match (&self.initial.preset, &self.initial.rho) {
            (Some(name), None) if name == "ramp" => InitialProfile::Ramp,
            (Some(name), None) => {
                return Err(Error::InvalidScenario(format!(
                    "unknown initial profile \"{name}\""
                )))
            }
            (None, Some(rows)) if rows.iter().all(|r| r.len() == 1) => {
                InitialProfile::Constant(rows.iter().map(|r| r[0]).collect())
            }
            (None, Some(rows)) => InitialProfile::Nodal(rows.clone()),
            _ => {
                return Err(Error::InvalidScenario(
                    "initial needs exactly one of \"preset\" and \"rho\"".into(),
                ))
            }
        };
        let s = &self.solver;
        let scenario = Scenario {
            spec,
            grid,
            initial,
            phi_bc: (self.bc.phi_left, self.bc.phi_right),
            field: self.physics.field,
            horizon: self.time.horizon,
            solver: SolverParams {
                tau: self.time.tau,
                eps_reg: s.eps_reg,
                eps_tol: s.eps_tol,
                m_max: s.m_max,
                eta: s.eta,
                coupled_solve: s.coupled_solve,
                max_halvings: s.max_halvings,
            },
            output_every: self.time.output_every,
        };
        scenario.validate()?;
        scenario.initial.sample(&scenario.grid, n, s.eta)?;
        let [a, b] = self.outputs.fit_window;
        if !(a < b) {
            return Err(Error::InvalidScenario(
                "outputs.fit_window must be increasing".into(),
            ));
        }
        if let Some(c) = &self.convergence {
            if c.levels.is_empty() {
                return Err(Error::InvalidScenario("convergence.levels is empty".into()));
            }
            if let Some(l) = c
                .levels
                .iter()
                .find(|l| **l < 2 || c.reference_n_p % **l != 0)
            {
                return Err(Error::InvalidScenario(format!(
                    "convergence level {l} does not divide the reference grid {}",
                    c.reference_n_p
                )));
            }
        }
        Ok(scenario)
    }
}

fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::InvalidScenario(format!("override \"{assignment}\" is not key=value"))
    })?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), value);
                    return Ok(());
                }
                map.entry(key.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key.parse().map_err(|_| {
                    Error::InvalidScenario(format!(
                        "override path \"{path}\": \"{key}\" is not an index"
                    ))
                })?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| {
                    Error::InvalidScenario(format!(
                        "override path \"{path}\": index {idx} out of range {len}"
                    ))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(Error::InvalidScenario(format!(
                    "override path \"{path}\" descends into a scalar at \"{key}\""
                )))
            }
        };
    }
    Ok(())
}

fn ternary(m: [f64; 3], phi_left: f64, horizon: f64, field: bool) -> ScenarioFile {
    let [d12, d13, d23] = TERNARY_DIFFUSIVITIES;
    ScenarioFile {
        species: SpeciesSection {
            n: 3,
            molar_masses: m.to_vec(),
            z: vec![1.0, 1.0, 0.0],
            diffusivities: vec![
                vec![0.0, d12, d13],
                vec![d12, 0.0, d23],
                vec![d13, d23, 0.0],
            ],
        },
        physics: PhysicsSection {
            lambda: 1.0,
            f: BackgroundSpec::Named("zero".into()),
            reactions: "none".into(),
            field,
        },
        domain: DomainSection { n_p: 100 },
        bc: BcSection {
            phi_left,
            phi_right: 0.0,
        },
        initial: InitialSection {
            preset: Some("ramp".into()),
            rho: None,
        },
        time: TimeSection {
            tau: 1e-3,
            horizon,
            output_every: 100,
        },
        solver: SolverSection {
            eps_reg: f64::EPSILON,
            eps_tol: 1e-10,
            m_max: 100,
            eta: 1e-5,
            coupled_solve: true,
            max_halvings: 0,
        },
        outputs: OutputsSection {
            dir: "out".into(),
            plots: false,
            relative_entropy: false,
            fit_window: default_window(),
        },
        convergence: None,
    }
}

/// Built-in scenarios; see [`PRESETS`] for the names.
pub fn preset(name: &str) -> Result<ScenarioFile> {
    let file = match name {
        "example1" => ternary([1.0, 1.0, 1.0], 0.0, 17.0, true),
        "example2" => {
            let mut f = ternary([6.0, 1.0, 1.0], 0.0, 4.0, true);
            f.outputs.relative_entropy = true;
            f
        }
        "example3" => ternary([2.0, 1.0, 1.0], 10.0, 8.0, true),
        "example3-m4" => ternary([4.0, 1.0, 1.0], 10.0, 8.0, true),
        "example3-m6" => ternary([6.0, 1.0, 1.0], 10.0, 8.0, true),
        "example4" => ternary([1.0, 2.0, 1.0], 10.0, 8.0, true),
        "example4-m4" => ternary([1.0, 4.0, 1.0], 10.0, 8.0, true),
        "example4-m6" => ternary([1.0, 6.0, 1.0], 10.0, 8.0, true),
        "example5" | "example5-m2" | "example5-m6" => {
            let m1 = match name {
                "example5" => 1.0,
                "example5-m2" => 2.0,
                _ => 6.0,
            };
            let mut f = ternary([m1, 1.0, 1.0], 0.0, 8.0, false);
            f.outputs.relative_entropy = true;
            f
        }
        "convergence" => {
            let mut f = ternary([2.0, 1.0, 1.0], 10.0, 0.01, true);
            f.time.tau = 1e-4;
            f.time.output_every = 100;
            f.convergence = Some(ConvergenceSection {
                levels: vec![100, 200, 400],
                reference_n_p: 25600,
            });
            f
        }
        other => {
            return Err(Error::InvalidScenario(format!(
                "unknown preset \"{other}\"; known presets: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(file)
}
