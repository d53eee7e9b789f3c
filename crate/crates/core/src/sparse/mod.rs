//! Sparse matrices and the direct solver used by assembly and Newton.

mod lu;
mod matrix;
mod ordering;

use alloc::vec::Vec;

pub use lu::LuFactors;
pub use matrix::SparseMatrix;
pub use ordering::nested_dissection;

use crate::error::{invalid, Result};

/// Diagonal pivots are kept while within this factor of the column maximum.
pub const PIVOT_THRESHOLD: f64 = 0.1;

/// Factored matrix that solves with iterative refinement.
#[derive(Debug, Clone)]
pub struct DirectSolver {
    matrix: SparseMatrix,
    lu: LuFactors,
}

impl DirectSolver {
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(invalid("linear solve needs a square matrix"));
        }
        let order = nested_dissection(&matrix);
        Self::with_order(matrix, &order)
    }

    /// Factors with a precomputed column elimination order, e.g. one reused
    /// across matrices sharing a sparsity pattern.
    pub fn with_order(matrix: SparseMatrix, order: &[usize]) -> Result<Self> {
        let lu = LuFactors::factor(&matrix, order, PIVOT_THRESHOLD)?;
        Ok(DirectSolver { matrix, lu })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn factors(&self) -> &LuFactors {
        &self.lu
    }

    /// Solves `A x = rhs`, refining until
    /// `||A x - rhs|| <= 1e-10 (||A|| ||x|| + ||rhs||)` or three corrections.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.matrix.nrows() {
            return Err(invalid("right-hand side has the wrong length"));
        }
        let mut x = self.lu.solve(rhs);
        let anorm = self.matrix.norm_inf();
        let bnorm = norm_inf(rhs);
        for _ in 0..3 {
            let r = residual(&self.matrix, &x, rhs);
            if norm_inf(&r) <= 1e-14 * (anorm * norm_inf(&x) + bnorm) {
                break;
            }
            let dx = self.lu.solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Ok(x)
    }
}

/// Direct sparse solve of `A x = rhs` (nested dissection + partial pivoting LU).
pub fn solve_linear(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    DirectSolver::new(a.clone())?.solve(rhs)
}

/// `rhs - A x`.
pub fn residual(a: &SparseMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(rhs).map(|(ax, b)| b - ax).collect()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
