//! Left-looking sparse LU with threshold partial pivoting (Gilbert-Peierls).

use alloc::vec;
use alloc::vec::Vec;

use super::SparseMatrix;
use crate::error::{invalid, Error, Result};

const NONE: usize = usize::MAX;

/// Factors `P A Q = L U` with `L` unit lower triangular.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    /// Original row index -> pivot step.
    pinv: Vec<usize>,
    /// Pivot step -> original column index.
    q: Vec<usize>,
}

/// Depth-first search from `j` in the graph of the partial `L`, pushing
/// finished nodes onto `xi[top..]` in topological order.
#[allow(clippy::too_many_arguments)]
fn dfs(
    j: usize,
    l_ptr: &[usize],
    l_idx: &[usize],
    pinv: &[usize],
    marks: &mut [usize],
    stamp: usize,
    xi: &mut [usize],
    pstack: &mut [usize],
    mut top: usize,
) -> usize {
    let mut head = 0usize;
    xi[0] = j;
    loop {
        let j = xi[head];
        let jnew = pinv[j];
        if marks[j] != stamp {
            marks[j] = stamp;
            pstack[head] = if jnew == NONE { 0 } else { l_ptr[jnew] + 1 };
        }
        let end = if jnew == NONE { 0 } else { l_ptr[jnew + 1] };
        let mut done = true;
        let mut p = pstack[head];
        while p < end {
            let i = l_idx[p];
            p += 1;
            if marks[i] != stamp {
                pstack[head] = p;
                head += 1;
                xi[head] = i;
                done = false;
                break;
            }
        }
        if done {
            top -= 1;
            xi[top] = j;
            if head == 0 {
                return top;
            }
            head -= 1;
        }
    }
}

impl LuFactors {
    /// Factors `a` eliminating columns in the order `col_order`. A pivot on
    /// the diagonal row is kept whenever its magnitude is at least
    /// `threshold` times the largest candidate.
    pub fn factor(a: &SparseMatrix, col_order: &[usize], threshold: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(invalid("LU needs a square matrix"));
        }
        if col_order.len() != n {
            return Err(invalid("column order has the wrong length"));
        }
        let csc = a.transpose();
        let anorm = a.max_abs();
        let tiny = anorm * f64::EPSILON * 1e-8;

        let mut l_ptr = Vec::with_capacity(n + 1);
        let mut u_ptr = Vec::with_capacity(n + 1);
        let mut l_idx = Vec::with_capacity(4 * a.nnz());
        let mut l_val = Vec::with_capacity(4 * a.nnz());
        let mut u_idx = Vec::with_capacity(4 * a.nnz());
        let mut u_val = Vec::with_capacity(4 * a.nnz());
        let mut pinv = vec![NONE; n];
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut marks = vec![NONE; n];

        for k in 0..n {
            l_ptr.push(l_idx.len());
            u_ptr.push(u_idx.len());
            let col = col_order[k];
            let (rows, vals) = csc.row(col);

            let mut top = n;
            for &i in rows {
                if marks[i] != k {
                    top = dfs(i, &l_ptr, &l_idx, &pinv, &mut marks, k, &mut xi, &mut pstack, top);
                }
            }
            for &i in &xi[top..n] {
                x[i] = 0.0;
            }
            for (&i, &v) in rows.iter().zip(vals) {
                x[i] = v;
            }
            for p in top..n {
                let j = xi[p];
                let jc = pinv[j];
                if jc == NONE {
                    continue;
                }
                let xj = x[j];
                for q in l_ptr[jc] + 1..l_ptr[jc + 1] {
                    x[l_idx[q]] -= l_val[q] * xj;
                }
            }

            let mut ipiv = NONE;
            let mut best = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    let t = x[i].abs();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    u_idx.push(pinv[i]);
                    u_val.push(x[i]);
                }
            }
            if ipiv == NONE || !(best > tiny) || !best.is_finite() {
                return Err(Error::Singular { step: k, column: col });
            }
            if pinv[col] == NONE && x[col].abs() >= threshold * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u_idx.push(k);
            u_val.push(pivot);
            pinv[ipiv] = k;
            l_idx.push(ipiv);
            l_val.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == NONE {
                    l_idx.push(i);
                    l_val.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l_ptr.push(l_idx.len());
        u_ptr.push(u_idx.len());
        for i in l_idx.iter_mut() {
            *i = pinv[*i];
        }
        Ok(LuFactors {
            n,
            l_ptr,
            l_idx,
            l_val,
            u_ptr,
            u_idx,
            u_val,
            pinv,
            q: col_order.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "right-hand side has the wrong length");
        let mut y = vec![0.0; self.n];
        for (i, &v) in b.iter().enumerate() {
            y[self.pinv[i]] = v;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.l_ptr[j] + 1..self.l_ptr[j + 1] {
                    y[self.l_idx[p]] -= self.l_val[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let last = self.u_ptr[j + 1] - 1;
            y[j] /= self.u_val[last];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u_ptr[j]..last {
                    y[self.u_idx[p]] -= self.u_val[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &c) in self.q.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }
}
