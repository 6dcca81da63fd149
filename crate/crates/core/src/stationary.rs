//! Truncated stationary distribution of the orbit/busy-channel chain.
//!
//! The orbit is truncated at a point N chosen so that the tail mass of a
//! single-server retrial surrogate with arrival rate lambda/c falls below a
//! tolerance. The rate rows are computed once at level N, swept downward to
//! level 1, combined with the boundary vector at level 0, and normalized.

use crate::error::{Error, Result};
use crate::model::{build_blocks, check_stability, ModelParams};
use crate::rate_matrix::{algorithm1, apply_rn, embed_full, IterationSchedule, RateRows};

/// Hard cap on the truncation point.
pub const TRUNCATION_CAP: usize = 1_000_000;

/// Acceptable residual for the recursive boundary vector before falling back
/// to a dense null-space solve.
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-8;

/// Truncation point: smallest N with cumulative mass above 1 - eps in the
/// single-server retrial surrogate (arrival lambda/c, retrial mu, service nu).
pub fn truncation_point(params: &ModelParams, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter {
            field: "eps_trunc",
            reason: format!("must lie in (0, 1), got {eps}"),
        });
    }
    let rho = check_stability(params)?;
    let a = params.lambda() / (params.c as f64 * params.mu);
    let mut p0 = (1.0 - rho).powf(a + 1.0);
    let mut p1 = rho * p0;
    let mut cum = p0 + p1;
    let mut n = 0usize;
    while cum <= 1.0 - eps {
        if n >= TRUNCATION_CAP {
            return Err(Error::TruncationOverflow {
                cap: TRUNCATION_CAP,
            });
        }
        let nf = n as f64;
        p0 *= rho * (a + nf) / (nf + 1.0);
        p1 *= rho * (1.0 + a + nf) / (nf + 1.0);
        cum += p0 + p1;
        n += 1;
    }
    Ok(n)
}

/// Level-0 phase distribution with its balance residual.
#[derive(Debug, Clone)]
pub struct BoundaryVector {
    pub x: Vec<f64>,
    /// Chain with beta_c = 1 and x_i = beta_i x_c.
    pub beta: Vec<f64>,
    pub residual: f64,
    pub used_fallback: bool,
}

/// Max-abs residual of x (Q1^(0) + R^(1) Q2^(1)) for a normalized x.
fn boundary_residual(params: &ModelParams, rows1: &RateRows, x: &[f64]) -> f64 {
    let q1 = build_blocks(params, 0).q1;
    let q2 = build_blocks(params, 1).q2;
    let m = q1.add(&embed_full(rows1).matmul(&q2));
    m.left_mul(x).iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

/// Solves x (Q1^(0) + R^(1) Q2^(1)) = 0, x e = 1 by a backward beta
/// recursion; only the level-1 rate rows enter. Falls back to a dense
/// null-space solve when the recursion's residual is too large.
pub fn boundary_vector(params: &ModelParams, rows1: &RateRows) -> Result<BoundaryVector> {
    assert_eq!(rows1.level, 1);
    let c = params.c;
    let lambda = params.lambda();
    let (l1, mu, nu) = (params.lambda1, params.mu, params.nu);

    // beta is only determined up to scale, so rescaling the whole prefix is
    // legal; the growth is geometric in (lambda + i nu)/lambda.
    let mut beta = vec![0.0; c + 1];
    beta[c] = 1.0;
    beta[c - 1] = (lambda + c as f64 * nu - mu * rows1.r1[c - 1]) / (l1 + mu * rows1.r0[c - 1]);
    let mut beta_cm1 = beta[c - 1];
    for i in (1..c).rev() {
        beta[i - 1] = ((lambda + i as f64 * nu) * beta[i]
            - (i + 1) as f64 * nu * beta[i + 1]
            - mu * (rows1.r0[i - 1] * beta_cm1 + rows1.r1[i - 1]))
            / lambda;
        if beta[i - 1].abs() > 1e250 {
            for b in beta[i - 1..].iter_mut() {
                *b *= 1e-250;
            }
            beta_cm1 *= 1e-250;
        }
    }
    // Normalizes a candidate, clamping rounding-noise negatives; None when
    // the candidate is unusable (nonfinite, truly negative, or off-balance).
    let finalize = |mut x: Vec<f64>| -> Option<(Vec<f64>, f64)> {
        let mx = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if !mx.is_finite() || mx <= 0.0 {
            return None;
        }
        for v in x.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-12 * mx {
                    return None;
                }
                *v = 0.0;
            }
        }
        let total: f64 = x.iter().sum();
        for v in x.iter_mut() {
            *v /= total;
        }
        let residual = boundary_residual(params, rows1, &x);
        (residual <= BOUNDARY_RESIDUAL_TOL).then_some((x, residual))
    };

    if let Some((x, residual)) = finalize(beta.clone()) {
        let xc = x[c];
        return Ok(BoundaryVector {
            beta: x.iter().map(|v| v / xc).collect(),
            x,
            residual,
            used_fallback: false,
        });
    }

    let dense = crate::oracle::boundary_solve(params, rows1)?;
    match finalize(dense) {
        Some((x, residual)) => {
            let xc = x[c];
            Ok(BoundaryVector {
                beta: x.iter().map(|v| v / xc).collect(),
                x,
                residual,
                used_fallback: true,
            })
        }
        None => Err(Error::BoundaryResidualTooLarge {
            residual: f64::INFINITY,
            tol: BOUNDARY_RESIDUAL_TOL,
        }),
    }
}

/// Stationary probabilities pi[n][i] for orbit size n in 0..=n_trunc and
/// busy-channel count i in 0..=c.
#[derive(Debug, Clone)]
pub struct StationaryDist {
    pub levels: Vec<Vec<f64>>,
    pub n_trunc: usize,
    pub boundary: BoundaryVector,
    /// Continued-fraction depth used at the top level.
    pub top_iterations: usize,
}

impl StationaryDist {
    pub fn pi(&self, n: usize, i: usize) -> f64 {
        self.levels[n][i]
    }

    pub fn level_mass(&self, n: usize) -> f64 {
        self.levels[n].iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.levels.iter().flatten().sum()
    }

    /// Marginal distribution of the busy-channel count.
    pub fn phase_marginals(&self) -> Vec<f64> {
        let dim = self.levels[0].len();
        let mut out = vec![0.0; dim];
        for level in &self.levels {
            for (i, v) in level.iter().enumerate() {
                out[i] += v;
            }
        }
        out
    }
}

/// Computes the stationary distribution truncated at `n_trunc`.
pub fn solve_truncated(
    params: &ModelParams,
    n_trunc: usize,
    schedule: &IterationSchedule,
) -> Result<StationaryDist> {
    check_stability(params)?;
    assert!(n_trunc >= 1);

    // one full iteration at the top, then a single downward sweep
    let top = algorithm1(params, n_trunc, schedule)?;
    let top_iterations = top.iterations;
    let mut rows: Vec<RateRows> = Vec::with_capacity(n_trunc);
    rows.push(top);
    for level in (1..n_trunc).rev() {
        let next = rows.last().unwrap();
        rows.push(apply_rn(params, level, Some(next))?);
    }
    rows.reverse(); // rows[n - 1] holds level n

    let boundary = boundary_vector(params, &rows[0])?;

    let mut levels = Vec::with_capacity(n_trunc + 1);
    levels.push(boundary.x.clone());
    for n in 1..=n_trunc {
        let prev = &levels[n - 1];
        let r = &rows[n - 1];
        let (a, b) = (prev[params.c - 1], prev[params.c]);
        let next: Vec<f64> = r
            .r0
            .iter()
            .zip(&r.r1)
            .map(|(r0, r1)| a * r0 + b * r1)
            .collect();
        levels.push(next);
    }

    let total: f64 = levels.iter().flatten().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::NumericalBreakdown(format!(
            "level masses sum to {total}"
        )));
    }
    for level in &mut levels {
        for v in level.iter_mut() {
            *v /= total;
        }
    }

    Ok(StationaryDist {
        levels,
        n_trunc,
        boundary,
        top_iterations,
    })
}

/// Truncation point selection followed by [`solve_truncated`].
pub fn algorithm2(
    params: &ModelParams,
    eps_trunc: f64,
    schedule: &IterationSchedule,
) -> Result<StationaryDist> {
    let n_trunc = truncation_point(params, eps_trunc)?.max(1);
    solve_truncated(params, n_trunc, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::from_rho(5, 0.5, 4.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn truncation_point_grows_as_eps_shrinks() {
        let p = params();
        let n6 = truncation_point(&p, 1e-6).unwrap();
        let n10 = truncation_point(&p, 1e-10).unwrap();
        assert!(n10 > n6);
        assert!(n6 >= 1);
    }

    #[test]
    fn truncation_point_matches_direct_summation() {
        // recompute with explicit Pochhammer/factorial terms
        let p = params();
        let eps = 1e-10;
        let n = truncation_point(&p, eps).unwrap();
        let rho = p.rho();
        let a = p.lambda() / (p.c as f64 * p.mu);
        let base = (1.0 - rho).powf(a + 1.0);
        let mut cum = 0.0;
        let mut k = 0usize;
        let direct = loop {
            let mut poch0 = 1.0;
            let mut poch1 = 1.0;
            let mut fact = 1.0;
            for i in 0..k {
                poch0 *= a + i as f64;
                poch1 *= 1.0 + a + i as f64;
                fact *= (i + 1) as f64;
            }
            cum += rho.powi(k as i32) / fact * base * poch0
                + rho.powi(k as i32 + 1) / fact * base * poch1;
            if cum > 1.0 - eps {
                break k;
            }
            k += 1;
        };
        assert_eq!(n, direct);
    }

    #[test]
    fn unstable_load_is_rejected() {
        let p = ModelParams::new(5, 2.0, 4.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            truncation_point(&p, 1e-10),
            Err(Error::Unstable(_))
        ));
        assert!(matches!(
            algorithm2(&p, 1e-10, &IterationSchedule::default()),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn boundary_vector_recursion_agrees_with_dense_solve() {
        let p = params();
        let rows1 = algorithm1(&p, 1, &IterationSchedule::default()).unwrap();
        let bv = boundary_vector(&p, &rows1).unwrap();
        assert!(!bv.used_fallback);
        assert!(bv.residual <= BOUNDARY_RESIDUAL_TOL);
        let dense = crate::oracle::boundary_solve(&p, &rows1).unwrap();
        let diff: f64 = bv
            .x
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-12, "diff {diff}");
    }

    #[test]
    fn distribution_is_normalized_and_nonnegative() {
        let p = params();
        let dist = algorithm2(&p, 1e-10, &IterationSchedule::default()).unwrap();
        assert!((dist.total_mass() - 1.0).abs() <= 1e-12);
        assert!(dist.levels.iter().flatten().all(|&v| v >= 0.0));
        assert_eq!(dist.levels.len(), dist.n_trunc + 1);
    }

    #[test]
    fn matches_truncated_generator_oracle() {
        let p = params();
        let schedule = IterationSchedule::default();
        let n_trunc = truncation_point(&p, 1e-10).unwrap();
        let dist = solve_truncated(&p, n_trunc, &schedule).unwrap();
        let oracle = crate::oracle::truncated_generator_solve(&p, n_trunc).unwrap();
        let mut tv = 0.0;
        for n in 0..=n_trunc {
            for i in 0..=p.c {
                tv += (dist.pi(n, i) - oracle[n][i]).abs();
            }
        }
        tv *= 0.5;
        assert!(tv <= 1e-8, "total variation {tv}");
    }

    #[test]
    fn level_masses_decay_geometrically_in_tail() {
        let p = params();
        let dist = algorithm2(&p, 1e-10, &IterationSchedule::default()).unwrap();
        let tail_start = dist.n_trunc / 2;
        for n in tail_start..dist.n_trunc {
            assert!(dist.level_mass(n + 1) < dist.level_mass(n));
        }
    }

    #[test]
    fn large_c_boundary_survives_rescaling() {
        let p = ModelParams::new(100, 1.0 / 25.0, 24.0 / 25.0, 1.0, 1.0 / 70.0).unwrap();
        let rows1 = algorithm1(&p, 1, &IterationSchedule::default()).unwrap();
        let bv = boundary_vector(&p, &rows1).unwrap();
        assert!(bv.x.iter().all(|v| v.is_finite() && *v >= 0.0));
        let s: f64 = bv.x.iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
    }
}
