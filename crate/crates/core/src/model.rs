//! Model parameters, stability check, and the level-dependent generator
//! blocks of the QBD process.
//!
//! Phase i = number of busy channels (0..=c), level n = orbit size. The
//! generator is block tridiagonal with blocks Q0 (up one level), Q1 (within
//! level), Q2 (down one level), each of dimension c+1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The five rates and the server count defining the queue.
///
/// `lambda1` is the high-priority (handover) arrival rate, `lambda2` the
/// fresh-call rate, `mu` the per-customer retrial rate, `nu` the per-server
/// service rate. One of the `c` servers is the guard channel, usable only by
/// high-priority and retrial traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub nu: f64,
}

impl ModelParams {
    pub fn new(c: usize, lambda1: f64, lambda2: f64, mu: f64, nu: f64) -> Result<Self> {
        validate(ModelParams {
            c,
            lambda1,
            lambda2,
            mu,
            nu,
        })
    }

    /// Parameterization matching the numerical experiments: lambda is solved
    /// from rho = lambda/(c nu) and split by lambda2/lambda1 = ratio21.
    pub fn from_rho(c: usize, rho: f64, ratio21: f64, mu: f64, nu: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "rho",
                reason: format!("must be positive and finite, got {rho}"),
            });
        }
        if !ratio21.is_finite() || ratio21 < 0.0 {
            return Err(Error::InvalidParameter {
                field: "ratio21",
                reason: format!("must be nonnegative and finite, got {ratio21}"),
            });
        }
        let lambda = rho * c as f64 * nu;
        let lambda1 = lambda / (1.0 + ratio21);
        let lambda2 = lambda - lambda1;
        Self::new(c, lambda1, lambda2, mu, nu)
    }

    /// Total arrival rate lambda1 + lambda2.
    pub fn lambda(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    /// Traffic intensity lambda/(c nu).
    pub fn rho(&self) -> f64 {
        self.lambda() / (self.c as f64 * self.nu)
    }

    /// Diagonal entry b_i^(n) = -(lambda + i nu + n mu (1 - delta_{i,c})).
    pub(crate) fn b(&self, i: usize, n: usize) -> f64 {
        let retrial = if i < self.c { n as f64 * self.mu } else { 0.0 };
        -(self.lambda() + i as f64 * self.nu + retrial)
    }
}

/// Returns `params` unchanged iff every field invariant holds.
pub fn validate(params: ModelParams) -> Result<ModelParams> {
    let check_rate = |name: &'static str, v: f64, strict: bool| -> Result<()> {
        if !v.is_finite() || v < 0.0 || (strict && v == 0.0) {
            Err(Error::InvalidParameter {
                field: name,
                reason: format!(
                    "must be {} and finite, got {v}",
                    if strict { "positive" } else { "nonnegative" }
                ),
            })
        } else {
            Ok(())
        }
    };
    if params.c < 2 {
        // With one server the guard mechanism degenerates: fresh calls could
        // never be served.
        return Err(Error::InvalidParameter {
            field: "c",
            reason: format!("need at least 2 servers, got {}", params.c),
        });
    }
    check_rate("lambda1", params.lambda1, true)?;
    check_rate("lambda2", params.lambda2, false)?;
    check_rate("mu", params.mu, true)?;
    check_rate("nu", params.nu, true)?;
    Ok(params)
}

/// Returns rho = lambda/(c nu), or `Unstable` when rho >= 1.
pub fn check_stability(params: &ModelParams) -> Result<f64> {
    let rho = params.rho();
    if rho >= 1.0 {
        Err(Error::Unstable(rho))
    } else {
        Ok(rho)
    }
}

/// The three generator blocks at a given level.
#[derive(Debug, Clone)]
pub struct QbdBlocks {
    pub q0: Matrix,
    pub q1: Matrix,
    pub q2: Matrix,
    pub level: usize,
}

/// Builds Q0^(n), Q1^(n), Q2^(n) for level n.
pub fn build_blocks(params: &ModelParams, n: usize) -> QbdBlocks {
    let c = params.c;
    let dim = c + 1;
    let lambda = params.lambda();
    let nmu = n as f64 * params.mu;

    let mut q0 = Matrix::zeros(dim, dim);
    q0.set(c - 1, c - 1, params.lambda2);
    q0.set(c, c, lambda);

    let mut q2 = Matrix::zeros(dim, dim);
    for i in 0..c {
        q2.set(i, i + 1, nmu);
    }

    let mut q1 = Matrix::zeros(dim, dim);
    for i in 0..dim {
        q1.set(i, i, params.b(i, n));
        if i > 0 {
            q1.set(i, i - 1, i as f64 * params.nu);
        }
        if i + 1 < dim {
            q1.set(i, i + 1, if i == c - 1 { params.lambda1 } else { lambda });
        }
    }

    QbdBlocks {
        q0,
        q1,
        q2,
        level: n,
    }
}
