//! Performance measures derived from the stationary distribution.

use serde::Serialize;

use crate::error::Result;
use crate::model::ModelParams;
use crate::rate_matrix::{algorithm1, apply_rn, IterationSchedule, RateRows};
use crate::stationary::StationaryDist;

/// Blocking probabilities: fresh calls are blocked with c-1 or c channels
/// busy, priority and retrying calls only with all c busy.
pub fn blocking(dist: &StationaryDist) -> (f64, f64) {
    let c = dist.levels[0].len() - 1;
    let mut low = 0.0;
    let mut high = 0.0;
    for level in &dist.levels {
        low += level[c - 1] + level[c];
        high += level[c];
    }
    (low, high)
}

/// Mean number of busy channels E[C].
pub fn mean_busy(dist: &StationaryDist) -> f64 {
    dist.levels
        .iter()
        .flat_map(|level| level.iter().enumerate())
        .map(|(i, v)| i as f64 * v)
        .sum()
}

/// Truncation-error measure |lambda/nu - E[C]|; the exact mean busy-channel
/// count equals the offered load by conservation of work.
pub fn little_error(params: &ModelParams, dist: &StationaryDist) -> f64 {
    (params.lambda() / params.nu - mean_busy(dist)).abs()
}

/// Exponent a in the tail bound ||pi'_n||_1 = O(n^a rho^n),
/// a = (c^2 nu + lambda)/(c mu).
pub fn tail_exponent(params: &ModelParams) -> f64 {
    let c = params.c as f64;
    (c * c * params.nu + params.lambda()) / (c * params.mu)
}

/// One tail sample at orbit size n, all quantities in natural logarithm to
/// stay representable far into the tail. Entries are -inf where the
/// probability has underflowed to zero.
#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub n: usize,
    /// ln(pi_{i,n} / rho^n) for each requested phase, in input order.
    pub log_pi_over_rho_n: Vec<f64>,
    /// ln(||pi'_n||_1 / (n^a rho^n)) with pi'_n = (pi_{c-1,n}, pi_{c,n}).
    pub log_bound_ratio: f64,
}

/// Tail diagnostics for n = 1..=n_trunc at the given phases.
///
/// The ratios pi_{i,n}/rho^n stay representable long after pi_{i,n} itself
/// underflows (low phases decay by hundreds of extra orders of magnitude),
/// so the levels are re-propagated in scaled form: each level vector is
/// divided by rho and renormalized to unit maximum, with the accumulated
/// logarithm carried separately.
pub fn tail_diagnostics(
    params: &ModelParams,
    dist: &StationaryDist,
    phases: &[usize],
    schedule: &IterationSchedule,
) -> Result<Vec<TailPoint>> {
    let c = params.c;
    let n_trunc = dist.n_trunc;
    let ln_rho = params.rho().ln();
    let a = tail_exponent(params);
    if dist.levels.len() < 2 {
        return Ok(Vec::new());
    }

    // rate rows for levels 2..=n_trunc, one downward sweep from the top
    let mut sweep: Vec<RateRows> = Vec::with_capacity(n_trunc.saturating_sub(1));
    if n_trunc >= 2 {
        sweep.push(algorithm1(params, n_trunc, schedule)?);
        for n in (2..n_trunc).rev() {
            let next = sweep.last().unwrap();
            let rows = apply_rn(params, n, Some(next))?;
            sweep.push(rows);
        }
        sweep.reverse(); // sweep[n - 2] holds the rows for level n
    }

    let rescale = |u: &mut [f64], g: &mut f64| {
        let mx = u.iter().cloned().fold(0.0f64, f64::max);
        if mx > 0.0 {
            for v in u.iter_mut() {
                *v /= mx;
            }
            *g += mx.ln();
        }
    };
    let point = |n: usize, u: &[f64], g: f64| {
        let nf = n as f64;
        TailPoint {
            n,
            log_pi_over_rho_n: phases.iter().map(|&i| u[i].ln() + g).collect(),
            log_bound_ratio: (u[c - 1] + u[c]).ln() + g - a * nf.ln(),
        }
    };

    // scaled ratio vector u * e^g = pi_n / rho^n, seeded from level 1
    let mut u = dist.levels[1].clone();
    let mut g = -ln_rho;
    rescale(&mut u, &mut g);
    let mut out = Vec::with_capacity(n_trunc);
    out.push(point(1, &u, g));
    for n in 2..=n_trunc {
        let r = &sweep[n - 2];
        let v: Vec<f64> = (0..=c)
            .map(|j| u[c - 1] * r.r0[j] + u[c] * r.r1[j])
            .collect();
        u = v;
        g -= ln_rho;
        rescale(&mut u, &mut g);
        out.push(point(n, &u, g));
    }
    Ok(out)
}

/// Summary of one solved model instance.
#[derive(Debug, Clone, Serialize)]
pub struct PerformanceReport {
    pub c: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub nu: f64,
    pub rho: f64,
    pub n_trunc: usize,
    pub top_iterations: usize,
    pub blocking_low: f64,
    pub blocking_high: f64,
    pub mean_busy: f64,
    pub little_error: f64,
    pub tail_exponent: f64,
    pub boundary_residual: f64,
    pub boundary_fallback: bool,
}

pub fn report(params: &ModelParams, dist: &StationaryDist) -> PerformanceReport {
    let (blocking_low, blocking_high) = blocking(dist);
    PerformanceReport {
        c: params.c,
        lambda1: params.lambda1,
        lambda2: params.lambda2,
        mu: params.mu,
        nu: params.nu,
        rho: params.rho(),
        n_trunc: dist.n_trunc,
        top_iterations: dist.top_iterations,
        blocking_low,
        blocking_high,
        mean_busy: mean_busy(dist),
        little_error: little_error(params, dist),
        tail_exponent: tail_exponent(params),
        boundary_residual: dist.boundary.residual,
        boundary_fallback: dist.boundary.used_fallback,
    }
}
