//! Block-tridiagonal storage and a banded LU factorization with partial pivoting.

use crate::error::{Error, Result};

/// Square block-tridiagonal matrix with `m x m` blocks, one block row per grid node.
/// Global unknown `node * m + component`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    m: usize,
    nodes: usize,
    diag: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl BlockTridiagonal {
    pub fn zeros(nodes: usize, m: usize) -> Self {
        assert!(nodes >= 1 && m >= 1, "empty block-tridiagonal matrix");
        let off = (nodes - 1) * m * m;
        BlockTridiagonal {
            m,
            nodes,
            diag: vec![0.0; nodes * m * m],
            upper: vec![0.0; off],
            lower: vec![0.0; off],
        }
    }

    pub fn block_size(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.nodes * self.m
    }

    fn slot(&self, row: usize, col: usize) -> Option<(u8, usize)> {
        let (rn, rc) = (row / self.m, row % self.m);
        let (cn, cc) = (col / self.m, col % self.m);
        let local = rc * self.m + cc;
        if rn == cn {
            Some((0, rn * self.m * self.m + local))
        } else if cn == rn + 1 {
            Some((1, rn * self.m * self.m + local))
        } else if rn == cn + 1 {
            Some((2, cn * self.m * self.m + local))
        } else {
            None
        }
    }

    /// Entry at global `(row, col)`; zero outside the block band.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        match self.slot(row, col) {
            Some((0, i)) => self.diag[i],
            Some((1, i)) => self.upper[i],
            Some((_, i)) => self.lower[i],
            None => 0.0,
        }
    }

    /// Adds to the entry at global `(row, col)`. Panics outside the block band.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        match self.slot(row, col) {
            Some((0, i)) => self.diag[i] += value,
            Some((1, i)) => self.upper[i] += value,
            Some((_, i)) => self.lower[i] += value,
            None => panic!("entry ({row}, {col}) outside the block-tridiagonal band"),
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        match self.slot(row, col) {
            Some((0, i)) => self.diag[i] = value,
            Some((1, i)) => self.upper[i] = value,
            Some((_, i)) => self.lower[i] = value,
            None => panic!("entry ({row}, {col}) outside the block-tridiagonal band"),
        }
    }

    /// Column range that may hold nonzeros in `row`.
    pub fn band_columns(&self, row: usize) -> std::ops::Range<usize> {
        let node = row / self.m;
        let start = node.saturating_sub(1) * self.m;
        let end = ((node + 2).min(self.nodes)) * self.m;
        start..end
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim());
        (0..self.dim())
            .map(|r| self.band_columns(r).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// Sum of two matrices with the same layout.
    pub fn add_scaled(&mut self, other: &BlockTridiagonal, scale: f64) {
        assert_eq!((self.m, self.nodes), (other.m, other.nodes));
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += scale * b;
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += scale * b;
        }
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a += scale * b;
        }
    }

    /// Max-norm of the entries.
    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(&self.upper)
            .chain(&self.lower)
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.get(r, c)).collect())
            .collect()
    }
}

/// LU factors of a band matrix, LAPACK `gbtrf` layout: row `i` stores columns
/// `i - kl ..= i + kl + ku` so that row interchanges stay inside the band.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width + (col + self.kl - row)
    }

    /// Factorizes a block-tridiagonal matrix (`kl = ku = 2m - 1`).
    pub fn factor(a: &BlockTridiagonal) -> Result<Self> {
        let n = a.dim();
        let kl = 2 * a.block_size() - 1;
        let ku = kl;
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for r in 0..n {
            for c in a.band_columns(r) {
                let i = lu.idx(r, c);
                lu.data[i] = a.get(r, c);
            }
        }
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for r in (k + 1)..=last_row {
                let v = lu.data[lu.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= f64::EPSILON * f64::EPSILON * scale {
                return Err(Error::Singular {
                    column: k,
                    size: n,
                    pivot: best,
                });
            }
            lu.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (i, j) = (lu.idx(k, c), lu.idx(p, c));
                    lu.data.swap(i, j);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for r in (k + 1)..=last_row {
                let ir = lu.idx(r, k);
                let factor = lu.data[ir] / pivot;
                lu.data[ir] = factor;
                if factor == 0.0 {
                    continue;
                }
                for c in (k + 1)..=last_col {
                    let src = lu.data[lu.idx(k, c)];
                    let dst = lu.idx(r, c);
                    lu.data[dst] -= factor * src;
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for r in (k + 1)..=(k + self.kl).min(n - 1) {
                x[r] -= self.data[self.idx(r, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in (k + 1)..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.data[self.idx(k, c)] * x[c];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
        x
    }
}
