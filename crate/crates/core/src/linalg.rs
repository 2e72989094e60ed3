//! Dense Cholesky factorization with bounded jitter escalation.
//!
//! The factorization is right-looking and blocked: diagonal blocks are
//! factored column by column, the trailing matrix is updated with `gemm`.
//! In semidefinite mode, pivots below a tolerance produce zero columns, so
//! rank-deficient covariance matrices (e.g. posterior covariances at
//! noiselessly observed sites) still yield a factor `L` with `L L^T ≈ A`.

use nalgebra::{DMatrix, DVector};

const BLOCK: usize = 96;
const MAX_ESCALATIONS: usize = 3;
const DEFINITE_FLOOR: f64 = 1e-14;

/// How non-positive pivots are treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotMode {
    /// Every pivot must exceed `1e-14 * mean(diag A)`.
    Definite,
    /// Pivots in `(-neg_tol, zero_tol]` become zero columns; pivots below
    /// `-neg_tol` fail.
    Semidefinite { zero_tol: f64, neg_tol: f64 },
}

/// Lower-triangular Cholesky factor plus the jitter that was added to the
/// diagonal to obtain it.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
    jitter: f64,
}

/// The pivot index at which a factorization broke down.
#[derive(Debug, Clone, Copy)]
pub struct NotPositive {
    pub pivot: usize,
    pub jitter: f64,
}

impl Cholesky {
    /// Factor `a` (only the lower triangle is read).  On failure a jitter of
    /// `1e-10 * mean(diag)` is added and multiplied by ten on each retry, at
    /// most three escalations.
    pub fn with_jitter(a: DMatrix<f64>, mode: PivotMode) -> Result<Self, NotPositive> {
        let n = a.nrows();
        let mean_diag = if n == 0 {
            0.0
        } else {
            a.diagonal().iter().sum::<f64>() / n as f64
        };
        let mut work = a.clone();
        match factor_in_place(&mut work, mode) {
            Ok(()) => {
                return Ok(Cholesky {
                    l: work,
                    jitter: 0.0,
                })
            }
            Err(pivot) => {
                if !(mean_diag > 0.0) {
                    return Err(NotPositive { pivot, jitter: 0.0 });
                }
            }
        }
        let mut jitter = 1e-10 * mean_diag;
        let mut last = 0;
        for attempt in 0..=MAX_ESCALATIONS {
            if attempt > 0 {
                jitter *= 10.0;
            }
            work.copy_from(&a);
            for i in 0..n {
                work[(i, i)] += jitter;
            }
            match factor_in_place(&mut work, mode) {
                Ok(()) => return Ok(Cholesky { l: work, jitter }),
                Err(p) => last = p,
            }
        }
        Err(NotPositive {
            pivot: last,
            jitter,
        })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn into_l(self) -> DMatrix<f64> {
        self.l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `ln det(A)`; only meaningful for definite factors.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = b.clone();
        self.l.solve_lower_triangular_mut(&mut y);
        y
    }

    /// Solves `L Y = B` column-wise.
    pub fn forward_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = b.clone();
        self.l.solve_lower_triangular_mut(&mut y);
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = self.forward(b);
        self.l.tr_solve_lower_triangular_mut(&mut y);
        y
    }

    /// `A^{-1}`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut x = DMatrix::identity(n, n);
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }
}

/// Blocked in-place lower Cholesky.  On success the strict upper triangle is
/// zeroed; on failure returns the offending pivot.
pub fn factor_in_place(a: &mut DMatrix<f64>, mode: PivotMode) -> Result<(), usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "Cholesky of a non-square matrix");
    let floor = if n == 0 {
        0.0
    } else {
        DEFINITE_FLOOR * a.diagonal().iter().sum::<f64>() / n as f64
    };
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        factor_diagonal_block(a, k, b, mode, floor)?;
        let rest = n - k - b;
        if rest > 0 {
            solve_panel(a, k, b);
            // Trailing update A22 -= P P^T, lower block-columns only.
            let panel = a.view((k + b, k), (rest, b)).clone_owned();
            let mut j = 0;
            while j < rest {
                let w = BLOCK.min(rest - j);
                let lhs = panel.rows(j, rest - j);
                let rhs = panel.rows(j, w).transpose();
                a.view_mut((k + b + j, k + b + j), (rest - j, w))
                    .gemm(-1.0, &lhs, &rhs, 1.0);
                j += w;
            }
        }
        k += b;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

fn factor_diagonal_block(
    a: &mut DMatrix<f64>,
    k: usize,
    b: usize,
    mode: PivotMode,
    floor: f64,
) -> Result<(), usize> {
    for j in k..k + b {
        let d = a[(j, j)];
        let pivot = match mode {
            PivotMode::Definite => {
                if !(d > floor) || !d.is_finite() {
                    return Err(j);
                }
                d.sqrt()
            }
            PivotMode::Semidefinite { zero_tol, neg_tol } => {
                if !d.is_finite() || d < -neg_tol {
                    return Err(j);
                }
                if d <= zero_tol {
                    0.0
                } else {
                    d.sqrt()
                }
            }
        };
        a[(j, j)] = pivot;
        if pivot == 0.0 {
            for i in j + 1..k + b {
                a[(i, j)] = 0.0;
            }
            continue;
        }
        let inv = 1.0 / pivot;
        for i in j + 1..k + b {
            a[(i, j)] *= inv;
        }
        for c in j + 1..k + b {
            let f = a[(c, j)];
            if f != 0.0 {
                for i in c..k + b {
                    let v = a[(i, j)];
                    a[(i, c)] -= v * f;
                }
            }
        }
    }
    Ok(())
}

/// Overwrites the panel below the diagonal block with `A21 L11^{-T}`,
/// zeroing columns whose pivot is zero.
fn solve_panel(a: &mut DMatrix<f64>, k: usize, b: usize) {
    let n = a.nrows();
    let r0 = k + b;
    for j in k..k + b {
        let pivot = a[(j, j)];
        if pivot == 0.0 {
            for i in r0..n {
                a[(i, j)] = 0.0;
            }
            continue;
        }
        let inv = 1.0 / pivot;
        for i in r0..n {
            a[(i, j)] *= inv;
        }
        for c in j + 1..k + b {
            let f = a[(c, j)];
            if f != 0.0 {
                for i in r0..n {
                    let v = a[(i, j)];
                    a[(i, c)] -= v * f;
                }
            }
        }
    }
}
