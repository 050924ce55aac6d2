//! Dense symmetric positive-definite factorization.
//!
//! A right-looking blocked Cholesky: panels are factored column by column and
//! the trailing block is updated with one GEMM per panel. Only the lower
//! triangle of the result is meaningful.

use nalgebra::{DMatrix, DVector};

use crate::error::QpError;

const BLOCK: usize = 96;

/// Lower Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `matrix` in place. Fails if a pivot is not strictly positive.
    pub fn new(mut matrix: DMatrix<f64>) -> Result<Self, QpError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(QpError::Dimension("Cholesky of a non-square matrix".into()));
        }
        let mut k = 0;
        while k < n {
            let kb = BLOCK.min(n - k);
            factor_diagonal_block(&mut matrix, k, kb)?;
            let rest = n - k - kb;
            if rest > 0 {
                solve_panel(&mut matrix, k, kb);
                let panel = matrix.view((k + kb, k), (rest, kb)).clone_owned();
                let panel_t = panel.transpose();
                let mut trailing = matrix.view_mut((k + kb, k + kb), (rest, rest));
                trailing.gemm(-1.0, &panel, &panel_t, 1.0);
            }
            k += kb;
        }
        Ok(Self { factor: matrix })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Solves `M x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let n = self.dim();
        let l = &self.factor;
        let data = b.as_mut_slice();
        // forward: L y = b
        for j in 0..n {
            let yj = data[j] / l[(j, j)];
            data[j] = yj;
            if yj != 0.0 {
                let col = &l.as_slice()[j * n + j + 1..(j + 1) * n];
                for (bi, &lij) in data[j + 1..].iter_mut().zip(col) {
                    *bi -= lij * yj;
                }
            }
        }
        // backward: Lᵀ x = y
        for j in (0..n).rev() {
            let col = &l.as_slice()[j * n + j + 1..(j + 1) * n];
            let dot: f64 = col.iter().zip(&data[j + 1..]).map(|(a, b)| a * b).sum();
            data[j] = (data[j] - dot) / l[(j, j)];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }
}

fn factor_diagonal_block(a: &mut DMatrix<f64>, k: usize, kb: usize) -> Result<(), QpError> {
    for j in k..k + kb {
        let mut d = a[(j, j)];
        for p in k..j {
            d -= a[(j, p)] * a[(j, p)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(QpError::NotPositiveDefinite);
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in j + 1..k + kb {
            let mut s = a[(i, j)];
            for p in k..j {
                s -= a[(i, p)] * a[(j, p)];
            }
            a[(i, j)] = s / d;
        }
    }
    Ok(())
}

/// Overwrites the sub-diagonal panel `B` (rows below the block, columns of
/// the block) with `B L11⁻ᵀ`.
fn solve_panel(a: &mut DMatrix<f64>, k: usize, kb: usize) {
    let n = a.nrows();
    let start = k + kb;
    let data = a.as_mut_slice();
    for j in k..k + kb {
        for p in k..j {
            let l_jp = data[p * n + j];
            if l_jp != 0.0 {
                let (left, right) = data.split_at_mut(j * n);
                let src = &left[p * n + start..(p + 1) * n];
                let dst = &mut right[start..n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d -= l_jp * s;
                }
            }
        }
        let diag = data[j * n + j];
        for v in &mut data[j * n + start..(j + 1) * n] {
            *v /= diag;
        }
    }
}
