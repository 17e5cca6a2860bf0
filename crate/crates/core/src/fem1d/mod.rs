//! Piecewise-linear finite elements on a uniform grid of `(0, 1)`.

mod banded;

pub use banded::{BandLu, BlockTridiagonal};

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Uniform mesh of `(0, 1)` with `n_p` elements and nodes `y_j = j h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid1D {
    n_p: usize,
}

impl Grid1D {
    pub fn new(n_p: usize) -> Result<Self> {
        if n_p < 2 {
            return Err(Error::InvalidParameter(format!(
                "a grid needs at least 2 elements, got {n_p}"
            )));
        }
        Ok(Grid1D { n_p })
    }

    pub fn n_elements(&self) -> usize {
        self.n_p
    }

    pub fn n_nodes(&self) -> usize {
        self.n_p + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_p as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 / self.n_p as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.node(j)).collect()
    }

    /// Refinement ratio when `self` is nested in `coarse`.
    pub fn refinement_ratio(&self, coarse: &Grid1D) -> Option<usize> {
        self.n_p.is_multiple_of(coarse.n_p).then(|| self.n_p / coarse.n_p)
    }

    /// Trapezoidal weights (the lumped mass matrix diagonal).
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.n_nodes()];
        w[0] = 0.5 * h;
        w[self.n_p] = 0.5 * h;
        w
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_nodes());
        let h = self.h();
        let inner: f64 = values[1..self.n_p].iter().sum();
        h * (inner + 0.5 * (values[0] + values[self.n_p]))
    }
}

/// Prescribed value of one unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletConstraint {
    pub node: usize,
    pub component: usize,
    pub value: f64,
}

/// Linear system with block-tridiagonal matrix and pending Dirichlet constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSystem {
    pub matrix: BlockTridiagonal,
    pub rhs: Vec<f64>,
    pub constraints: Vec<DirichletConstraint>,
}

impl BandedSystem {
    pub fn new(matrix: BlockTridiagonal, rhs: Vec<f64>) -> Self {
        assert_eq!(
            matrix.dim(),
            rhs.len(),
            "matrix and right-hand side sizes differ"
        );
        BandedSystem {
            matrix,
            rhs,
            constraints: Vec::new(),
        }
    }

    pub fn constrain(&mut self, node: usize, component: usize, value: f64) {
        self.constraints.push(DirichletConstraint {
            node,
            component,
            value,
        });
    }

    /// Eliminates constrained rows and columns; leaves unit diagonals. Idempotent.
    pub fn apply_constraints(&mut self) {
        let m = self.matrix.block_size();
        for c in std::mem::take(&mut self.constraints) {
            let g = c.node * m + c.component;
            let cols = self.matrix.band_columns(g);
            for r in cols.clone() {
                if r != g {
                    let a = self.matrix.get(r, g);
                    self.rhs[r] -= a * c.value;
                    self.matrix.set(r, g, 0.0);
                }
            }
            for col in cols {
                self.matrix.set(g, col, 0.0);
            }
            self.matrix.set(g, g, 1.0);
            self.rhs[g] = c.value;
        }
    }
}

/// Consistent P1 mass matrix.
pub fn assemble_mass(grid: &Grid1D) -> BlockTridiagonal {
    let h = grid.h();
    let mut mass = BlockTridiagonal::zeros(grid.n_nodes(), 1);
    for e in 0..grid.n_elements() {
        mass.add(e, e, h / 3.0);
        mass.add(e + 1, e + 1, h / 3.0);
        mass.add(e, e + 1, h / 6.0);
        mass.add(e + 1, e, h / 6.0);
    }
    mass
}

/// Row-sum lumped mass matrix (the trapezoidal weights).
pub fn lumped_mass(grid: &Grid1D) -> Vec<f64> {
    grid.trapezoid_weights()
}

fn check_coefficients(grid: &Grid1D, coeff: &[DMatrix<f64>]) -> Result<usize> {
    if coeff.len() != grid.n_elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} element coefficients for {} elements",
            coeff.len(),
            grid.n_elements()
        )));
    }
    let m = coeff.first().map_or(1, |c| c.nrows());
    if coeff.iter().any(|c| c.nrows() != m || c.ncols() != m) {
        return Err(Error::DimensionMismatch(
            "element coefficients must all be square of the same size".into(),
        ));
    }
    Ok(m)
}

/// Adds `scale * (1/h) coeff_e ⊗ [[1, -1], [-1, 1]]` into the unknowns
/// `offset .. offset + m` of each node block of `target`.
pub fn add_weighted_stiffness(
    target: &mut BlockTridiagonal,
    grid: &Grid1D,
    coeff: &[DMatrix<f64>],
    offset: usize,
    scale: f64,
) -> Result<()> {
    let m = check_coefficients(grid, coeff)?;
    let bs = target.block_size();
    if offset + m > bs || target.nodes() != grid.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "stiffness of block size {m} at offset {offset} does not fit blocks of size {bs}"
        )));
    }
    let f = scale / grid.h();
    for (e, c) in coeff.iter().enumerate() {
        for i in 0..m {
            for k in 0..m {
                let v = f * c[(i, k)];
                if v == 0.0 {
                    continue;
                }
                let (ri, rj) = (e * bs + offset + i, (e + 1) * bs + offset + i);
                let (ci, cj) = (e * bs + offset + k, (e + 1) * bs + offset + k);
                target.add(ri, ci, v);
                target.add(rj, cj, v);
                target.add(ri, cj, -v);
                target.add(rj, ci, -v);
            }
        }
    }
    Ok(())
}

/// Stiffness matrix weighted by one `m x m` coefficient matrix per element.
pub fn assemble_weighted_stiffness(
    grid: &Grid1D,
    coeff: &[DMatrix<f64>],
) -> Result<BlockTridiagonal> {
    let m = check_coefficients(grid, coeff)?;
    let mut k = BlockTridiagonal::zeros(grid.n_nodes(), m);
    add_weighted_stiffness(&mut k, grid, coeff, 0, 1.0)?;
    Ok(k)
}

/// Applies constraints and solves by banded LU with partial pivoting.
pub fn solve_banded(mut sys: BandedSystem) -> Result<Vec<f64>> {
    sys.apply_constraints();
    let lu = BandLu::factor(&sys.matrix)?;
    let x = lu.solve(&sys.rhs);
    if log::log_enabled!(log::Level::Debug) {
        let ax = sys.matrix.matvec(&x);
        let res = ax
            .iter()
            .zip(&sys.rhs)
            .fold(0.0_f64, |a, (l, r)| a.max((l - r).abs()));
        let bnorm = sys.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        debug!(
            "banded solve: n = {}, residual {res:e}, |b| = {bnorm:e}",
            x.len()
        );
    }
    Ok(x)
}

/// P1 solution of `-λ Φ'' = charge` with Dirichlet values at both ends. The load
/// uses the lumped (trapezoidal) pairing.
pub fn poisson_solve(
    grid: &Grid1D,
    charge: &[f64],
    lambda: f64,
    bc: (f64, f64),
) -> Result<Vec<f64>> {
    if charge.len() != grid.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} charge values for {} nodes",
            charge.len(),
            grid.n_nodes()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let mut k = BlockTridiagonal::zeros(grid.n_nodes(), 1);
    let unit = vec![DMatrix::from_element(1, 1, lambda); grid.n_elements()];
    add_weighted_stiffness(&mut k, grid, &unit, 0, 1.0)?;
    let rhs = grid
        .trapezoid_weights()
        .iter()
        .zip(charge)
        .map(|(w, q)| w * q)
        .collect();
    let mut sys = BandedSystem::new(k, rhs);
    sys.constrain(0, 0, bc.0);
    sys.constrain(grid.n_elements(), 0, bc.1);
    solve_banded(sys)
}

/// L² distance between a coarse P1 field and a fine P1 field on a nested grid.
/// The coarse field is interpolated to the fine nodes and the squared difference
/// integrated exactly element by element.
pub fn l2_distance(
    coarse: &Grid1D,
    u_coarse: &[f64],
    fine: &Grid1D,
    u_fine: &[f64],
) -> Result<f64> {
    let ratio = fine.refinement_ratio(coarse).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "grid with {} elements is not nested in a grid with {} elements",
            fine.n_elements(),
            coarse.n_elements()
        ))
    })?;
    if u_coarse.len() != coarse.n_nodes() || u_fine.len() != fine.n_nodes() {
        return Err(Error::DimensionMismatch(
            "nodal field lengths do not match their grids".into(),
        ));
    }
    let diff: Vec<f64> = (0..fine.n_nodes())
        .map(|j| {
            let e = (j / ratio).min(coarse.n_elements() - 1);
            let theta = (j - e * ratio) as f64 / ratio as f64;
            let interp = (1.0 - theta) * u_coarse[e] + theta * u_coarse[e + 1];
            interp - u_fine[j]
        })
        .collect();
    let h = fine.h();
    let sq: f64 = diff
        .windows(2)
        .map(|d| h * (d[0] * d[0] + d[0] * d[1] + d[1] * d[1]) / 3.0)
        .sum();
    Ok(sq.sqrt())
}
