//! Minimal sparse kernel used by the eigen solver: CSR storage, ILU(0)
//! preconditioning, and preconditioned BiCGStab.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, deduplicated columns per row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Csr> {
        if n == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "entry ({i},{j}) outside {n}x{n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at ({i},{j})")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for r in &mut rows {
            r.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let (j, mut v) = r[k];
                while k + 1 < r.len() && r[k + 1].0 == j {
                    k += 1;
                    v += r[k].1;
                }
                col.push(j);
                val.push(v);
                k += 1;
            }
            row_ptr.push(col.len());
        }
        Ok(Csr { n, row_ptr, col, val })
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    /// Row sums (used by assembly conservation tests).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.val[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col[k] == j {
                return self.val[k];
            }
        }
        0.0
    }
}

/// Zero-fill incomplete LU factorization sharing the matrix sparsity.
///
/// Works well here because the operator matrices are strictly diagonally
/// dominant M-matrices (positive diagonal, non-positive off-diagonals).
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag_ptr: Vec<usize>,
}

impl Ilu0 {
    pub fn factor(a: &Csr) -> Result<Ilu0> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag_ptr = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.row_ptr[i]..lu.row_ptr[i + 1] {
                if lu.col[k] == i {
                    diag_ptr[i] = k;
                }
            }
            if diag_ptr[i] == usize::MAX {
                return Err(Error::InvalidInput(format!("structurally zero diagonal in row {i}")));
            }
        }
        // IKJ variant restricted to the existing pattern
        let mut colmap = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in lo..hi {
                colmap[lu.col[k]] = k;
            }
            for k in lo..hi {
                let j = lu.col[k];
                if j >= i {
                    break;
                }
                let piv = lu.val[diag_ptr[j]];
                if piv == 0.0 {
                    return Err(Error::NonConvergence("zero pivot in ILU(0)".into()));
                }
                let lij = lu.val[k] / piv;
                lu.val[k] = lij;
                for kk in diag_ptr[j] + 1..lu.row_ptr[j + 1] {
                    let jj = lu.col[kk];
                    let slot = colmap[jj];
                    if slot != usize::MAX {
                        lu.val[slot] -= lij * lu.val[kk];
                    }
                }
            }
            for k in lo..hi {
                colmap[lu.col[k]] = usize::MAX;
            }
            if lu.val[diag_ptr[i]] == 0.0 {
                return Err(Error::NonConvergence(format!("zero pivot at row {i}")));
            }
        }
        Ok(Ilu0 { lu, diag_ptr })
    }

    /// Solve `L U x = b` with unit-lower L.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.lu.n;
        x.copy_from_slice(b);
        for i in 0..n {
            let mut s = x[i];
            for k in self.lu.row_ptr[i]..self.diag_ptr[i] {
                s -= self.lu.val[k] * x[self.lu.col[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag_ptr[i] + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.val[k] * x[self.lu.col[k]];
            }
            x[i] = s / self.lu.val[self.diag_ptr[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Iterations per shadow-residual refresh. BiCGStab stagnates once the
/// running residual loses its bi-orthogonality to the fixed shadow vector
/// `r0`; periodically restarting with `r0 = r` restores it and costs one
/// saved vector.
const RESTART_CYCLE: usize = 400;

/// Right-preconditioned BiCGStab with periodic restarts. Returns the
/// solution and the total iteration count; `NonConvergence` carries the
/// final relative residual. Classical breakdowns (vanishing `rho`,
/// `omega`, or `t`) trigger a restart rather than an error, so only an
/// exhausted iteration budget reports failure.
pub fn bicgstab(
    a: &Csr,
    pre: &Ilu0,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let bnorm = norm(b).max(1e-300);
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm(&r) / bnorm < tol {
        return Ok((x, 0));
    }
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut done = 0;
    while done < max_iter {
        let r0 = r.clone();
        let mut rho = 1.0;
        let mut alpha = 1.0;
        let mut omega = 1.0;
        for i in 0..n {
            p[i] = 0.0;
            v[i] = 0.0;
        }
        let budget = RESTART_CYCLE.min(max_iter - done);
        let mut executed = 0;
        for it in 1..=budget {
            executed = it;
            let rho_new = dot(&r0, &r);
            if rho_new.abs() < 1e-300 {
                break; // shadow direction exhausted: restart
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pre.solve(&p, &mut phat);
            a.matvec(&phat, &mut v);
            alpha = rho / dot(&r0, &v);
            // s = r - alpha v (reuse r)
            for i in 0..n {
                r[i] -= alpha * v[i];
            }
            if norm(&r) / bnorm < tol {
                for i in 0..n {
                    x[i] += alpha * phat[i];
                }
                return Ok((x, done + it));
            }
            pre.solve(&r, &mut shat);
            a.matvec(&shat, &mut t);
            let tt = dot(&t, &t);
            if tt.abs() < 1e-300 {
                break;
            }
            omega = dot(&t, &r) / tt;
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] -= omega * t[i];
            }
            if norm(&r) / bnorm < tol {
                return Ok((x, done + it));
            }
            if omega.abs() < 1e-300 {
                break;
            }
        }
        // a cycle always consumes budget, even on an immediate breakdown
        done += executed.max(1);
    }
    let rel = norm(&r) / bnorm;
    Err(Error::NonConvergence(format!(
        "BiCGStab stalled at relative residual {rel:.3e} after {max_iter} iterations"
    )))
}
