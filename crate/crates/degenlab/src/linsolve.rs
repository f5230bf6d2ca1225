//! Sparse direct solves through faer.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

/// Solves `A x = b` for an `n × n` matrix given as (row, col, value) triplets;
/// duplicate entries are summed.
pub fn solve_triplets(n: usize, entries: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    Factorized::new(n, entries)?.solve(b)
}

/// A sparse LU factorization reused across right-hand sides.
pub struct Factorized {
    n: usize,
    lu: Option<faer::sparse::linalg::solvers::Lu<usize, f64>>,
}

impl Factorized {
    pub fn new(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Ok(Factorized { n, lu: None });
        }
        let trips: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        Ok(Factorized { n, lu: Some(lu) })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let Some(lu) = &self.lu else { return Ok(Vec::new()) };
        let rhs = faer::Col::<f64>::from_fn(self.n, |i| b[i]);
        let x = lu.solve(&rhs);
        let out: Vec<f64> = (0..self.n).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular or ill-conditioned system".into()));
        }
        Ok(out)
    }
}

/// Dense solve of a small square system (row-major), `None` when singular.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let rhs = faer::Col::<f64>::from_fn(n, |i| b[i]);
    let x = m.partial_piv_lu().solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Eigenvalues of a small symmetric matrix (row-major), ascending.
pub fn sym_eigenvalues(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    m.self_adjoint_eigenvalues(faer::Side::Lower).ok()
}
