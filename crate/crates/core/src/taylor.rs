//! Taylor expansion of the nonzero rate rows in powers of 1/n.
//!
//! Entry r_{c-k}^(s,n) expands as sum_{i=0}^m theta_i^(s,k) (-1)^i / n^{k+i}.
//! The coefficient table theta is built recursively in the expansion order m;
//! within one order the k=1 coefficients come first, then k=2..c ascending,
//! then k=0, which needs the fresh k=1 value of the same order. Coefficients
//! with k < 0, k > c, or m < 0 are zero by convention.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rate_matrix::RateRows;

/// Coefficients theta_m^(s,k) for s in {0,1}, k in 0..=c, m in 0..=m_max.
#[derive(Debug, Clone)]
pub struct TaylorTable {
    pub c: usize,
    pub m_max: usize,
    // theta[s][k][m]
    theta: [Vec<Vec<f64>>; 2],
}

impl TaylorTable {
    /// Coefficient theta_m^(s,k); out-of-range k or m yields 0.
    pub fn theta(&self, s: usize, k: isize, m: isize) -> f64 {
        assert!(s < 2);
        if k < 0 || k > self.c as isize || m < 0 || m > self.m_max as isize {
            if m > self.m_max as isize {
                panic!("order {m} beyond table depth {}", self.m_max);
            }
            return 0.0;
        }
        self.theta[s][k as usize][m as usize]
    }

    /// Evaluates the order-m partial sums at level n for both rows.
    pub fn eval_rows(&self, n: usize, m: usize) -> RateRows {
        assert!(m <= self.m_max, "order {m} beyond table depth {}", self.m_max);
        assert!(n >= 1);
        let c = self.c;
        let nf = n as f64;
        let mut rows = [vec![0.0; c + 1], vec![0.0; c + 1]];
        for s in 0..2 {
            for k in 0..=c {
                let mut acc = 0.0;
                // Horner in 1/n over i = m .. 0, then scale by n^{-k}.
                for i in (0..=m).rev() {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    acc = acc / nf + sign * self.theta[s][k][i];
                }
                rows[s][c - k] = acc / nf.powi(k as i32);
            }
        }
        let [r0, r1] = rows;
        RateRows {
            r0,
            r1,
            level: n,
            iterations: 0,
        }
    }
}

/// Leading coefficients theta_0^(s,k): the k-th entry of the returned pair of
/// vectors, indexed by idle-server count k.
pub fn leading_coeffs(params: &ModelParams) -> [Vec<f64>; 2] {
    let c = params.c;
    let lambda = params.lambda();
    let mut out = [vec![0.0; c + 1], vec![0.0; c + 1]];
    out[0][0] = 0.0;
    out[1][0] = lambda / (c as f64 * params.nu);
    for (s, rate) in [(0usize, params.lambda2), (1, lambda)] {
        out[s][1] = rate / params.mu;
        for k in 2..=c {
            out[s][k] = out[s][k - 1] * (c - (k - 1)) as f64 * params.nu / params.mu;
        }
    }
    out
}

// Pochhammer (phi)_n = phi (phi+1) ... (phi+n-1), empty product for n = 0.
fn pochhammer(phi: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (phi + i as f64))
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Builds the coefficient table up to expansion order `m_max`.
pub fn build_table(params: &ModelParams, m_max: usize) -> Result<TaylorTable> {
    if m_max > 60 {
        // factorial weights in the shift coefficients overflow binary64
        // well before this, and the series is asymptotic anyway
        return Err(Error::InvalidParameter {
            field: "m_max",
            reason: format!("expansion order {m_max} too deep, limit is 60"),
        });
    }
    let c = params.c;
    let lambda = params.lambda();
    let (l1, mu, nu) = (params.lambda1, params.mu, params.nu);
    let cnu = c as f64 * nu;

    let seeds = leading_coeffs(params);
    let mut theta = [
        vec![vec![0.0; m_max + 1]; c + 1],
        vec![vec![0.0; m_max + 1]; c + 1],
    ];
    for s in 0..2 {
        for k in 0..=c {
            theta[s][k][0] = seeds[s][k];
        }
    }

    // th(s, k, m) with the zero convention for out-of-range indices.
    let th = |theta: &[Vec<Vec<f64>>; 2], s: usize, k: isize, m: isize| -> f64 {
        if k < 0 || k > c as isize || m < 0 {
            0.0
        } else {
            theta[s][k as usize][m as usize]
        }
    };
    // Shift coefficient Phi_j^(sigma,k): the 1/n^{k+j} coefficient of the
    // level-(n+1) entry r_{c-k}^(sigma,n+1) re-expanded around 1/n.
    let phi = |theta: &[Vec<Vec<f64>>; 2], sigma: usize, k: usize, j: usize| -> f64 {
        let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut acc = 0.0;
        for i in 0..=j {
            acc += th(theta, sigma, k as isize + 1, i as isize)
                * pochhammer((k + i) as f64, j - i)
                / factorial(j - i);
        }
        sign * acc
    };
    // Variant without the i = 0 term, for the k = 0 self-coupling where the
    // leading coefficient is already accounted for.
    let phi_tilde = |theta: &[Vec<Vec<f64>>; 2], j: usize| -> f64 {
        let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut acc = 0.0;
        for i in 1..=j {
            acc += th(theta, 1, 1, i as isize) * pochhammer(i as f64, j - i) / factorial(j - i);
        }
        sign * acc
    };

    for m in 1..=m_max {
        let mi = m as isize;
        for s in 0..2 {
            // k = 1: telescoped from the row-sum identity.
            let mut v = 0.0;
            for j in 2..=c.min(m + 1) {
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                v += sign * th(&theta, s, j as isize, mi + 1 - j as isize);
            }
            theta[s][1][m] = v;
        }
        for s in 0..2 {
            for k in 2..=c {
                let ki = k as isize;
                let mut v = (c - k + 1) as f64 * nu / mu * th(&theta, s, ki - 1, mi)
                    + lambda / mu * th(&theta, s, ki + 1, mi - 2)
                    + (lambda + (c - k) as f64 * nu) / mu * th(&theta, s, ki, mi - 1);
                for j in 0..=m.saturating_sub(2) {
                    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                    v += sign * phi(&theta, 0, k, j) * th(&theta, s, 1, mi - j as isize - 2);
                }
                for j in 0..m {
                    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                    v += sign * phi(&theta, 1, k, j) * th(&theta, s, 0, mi - j as isize - 1);
                }
                theta[s][k][m] = v;
            }
        }
        for s in 0..2 {
            // k = 0: balance of the all-busy phase.
            let mut v = -l1 / cnu * th(&theta, s, 1, mi - 1);
            for j in 0..m {
                let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
                v += sign * mu / cnu * phi(&theta, 0, 0, j) * th(&theta, s, 1, mi - j as isize - 1);
            }
            for j in 1..=m {
                let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
                v += sign * mu / cnu * phi_tilde(&theta, j) * th(&theta, s, 0, mi - j as isize);
            }
            theta[s][0][m] = v;
        }
    }

    for s in 0..2 {
        for k in 0..=c {
            for m in 0..=m_max {
                if !theta[s][k][m].is_finite() {
                    return Err(Error::NumericalBreakdown(format!(
                        "nonfinite expansion coefficient at s={s} k={k} m={m}"
                    )));
                }
            }
        }
    }

    Ok(TaylorTable { c, m_max, theta })
}

/// Relative error ||approx - exact||_inf / ||exact||_inf over the two rows.
pub fn relative_error(approx: &RateRows, exact: &RateRows) -> f64 {
    approx.inf_norm_diff(exact) / exact.inf_norm()
}
