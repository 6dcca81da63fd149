//! Independent dense-linear-algebra cross-checks.
//!
//! Everything here deliberately avoids the O(c) recursions of the main
//! solver: rate matrices come from full (c+1) x (c+1) inversions, the
//! stationary distribution from one LU solve of the truncated global
//! generator. Slow but structurally unrelated, so agreement is meaningful.

use crate::error::{Error, Result};
use crate::matrix::{lu_solve, Matrix};
use crate::model::{build_blocks, ModelParams};
use crate::rate_matrix::RateRows;

/// Largest truncated state count the dense generator solve will accept.
pub const STATE_BUDGET: usize = 20_000;

/// Solves X M = B densely for X via the transposed system M^T X^T = B^T.
fn right_solve(m: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mt = m.transpose();
    let mut bt = b.transpose();
    lu_solve(&mt, &mut bt)?;
    Ok(bt.transpose())
}

/// Depth-k continued-fraction approximation of the full rate matrix R^(n),
/// computed by composing X <- -Q0^(lev-1) (Q1^(lev) + X Q2^(lev+1))^{-1}
/// downward from the zero matrix at level n+k-1.
pub fn dense_rate_matrix(params: &ModelParams, n: usize, k: usize) -> Result<Matrix> {
    assert!(n >= 1 && k >= 1);
    let dim = params.c + 1;
    let mut x = Matrix::zeros(dim, dim);
    for lev in (n..n + k).rev() {
        let q0 = build_blocks(params, lev - 1).q0;
        let q1 = build_blocks(params, lev).q1;
        let q2 = build_blocks(params, lev + 1).q2;
        let m = q1.add(&x.matmul(&q2));
        let neg_q0 = Matrix::zeros(dim, dim).sub(&q0);
        x = right_solve(&m, &neg_q0)?;
    }
    Ok(x)
}

/// Extracts the two nonzero rows of a dense rate matrix.
pub fn dense_rate_rows(params: &ModelParams, n: usize, k: usize) -> Result<RateRows> {
    let c = params.c;
    let full = dense_rate_matrix(params, n, k)?;
    Ok(RateRows {
        r0: full.row(c - 1).to_vec(),
        r1: full.row(c).to_vec(),
        level: n,
        iterations: k,
    })
}

/// Stationary distribution of the generator truncated at orbit size N,
/// with the up-transitions of level N folded back onto level N so rows
/// still sum to zero. Returns pi[n][i] for n in 0..=N.
pub fn truncated_generator_solve(params: &ModelParams, n_trunc: usize) -> Result<Vec<Vec<f64>>> {
    let c = params.c;
    let dim = c + 1;
    let size = (n_trunc + 1) * dim;
    if size > STATE_BUDGET {
        return Err(Error::SizeBudgetExceeded {
            size,
            budget: STATE_BUDGET,
        });
    }

    let mut gen = Matrix::zeros(size, size);
    let put_block = |gen: &mut Matrix, row_lvl: usize, col_lvl: usize, block: &Matrix| {
        for i in 0..dim {
            for j in 0..dim {
                let v = block.get(i, j);
                if v != 0.0 {
                    gen.add_to(row_lvl * dim + i, col_lvl * dim + j, v);
                }
            }
        }
    };
    for n in 0..=n_trunc {
        let blocks = build_blocks(params, n);
        put_block(&mut gen, n, n, &blocks.q1);
        if n > 0 {
            put_block(&mut gen, n, n - 1, &blocks.q2);
        }
        if n < n_trunc {
            put_block(&mut gen, n, n + 1, &blocks.q0);
        } else {
            // fold the blocked-arrival outflow back onto the diagonal
            gen.add_to(n * dim + c - 1, n * dim + c - 1, params.lambda2);
            gen.add_to(n * dim + c, n * dim + c, params.lambda());
        }
    }

    // pi gen = 0, pi e = 1: transpose and replace the first equation by the
    // normalization row.
    let mut a = gen.transpose();
    for j in 0..size {
        a.set(0, j, 1.0);
    }
    let mut b = Matrix::zeros(size, 1);
    b.set(0, 0, 1.0);
    lu_solve(&a, &mut b)?;

    let mut pi = vec![vec![0.0; dim]; n_trunc + 1];
    for n in 0..=n_trunc {
        for i in 0..dim {
            pi[n][i] = b.get(n * dim + i, 0);
        }
    }
    Ok(pi)
}

/// Normalized left null vector of Q1^(0) + R^(1) Q2^(1), solved densely.
pub fn boundary_solve(params: &ModelParams, rows1: &RateRows) -> Result<Vec<f64>> {
    assert_eq!(rows1.level, 1);
    let dim = params.c + 1;
    let q1 = build_blocks(params, 0).q1;
    let q2 = build_blocks(params, 1).q2;
    let m = q1.add(&crate::rate_matrix::embed_full(rows1).matmul(&q2));
    // x m = 0, x e = 1: m^T x^T = 0 with the last equation replaced.
    let mut a = m.transpose();
    for j in 0..dim {
        a.set(dim - 1, j, 1.0);
    }
    let mut b = Matrix::zeros(dim, 1);
    b.set(dim - 1, 0, 1.0);
    lu_solve(&a, &mut b)?;
    Ok((0..dim).map(|i| b.get(i, 0)).collect())
}
