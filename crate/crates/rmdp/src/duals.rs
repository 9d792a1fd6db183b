//! Worst-case expectations over ambiguity balls, solved through their dual
//! reformulations.
//!
//! For a nominal probability vector `p`, a value vector `v`, and a radius
//! `rho`, each operator computes `inf { q . v : D(q, p) <= rho }` as a
//! single-variable optimization over a bounded interval:
//!
//! - total variation: `-min over eta in [0, 2B/rho] of
//!   E_p[(eta - v)_+] + (eta - min v)_+ * rho - eta`, where `B` bounds
//!   `max v`. For `eta >= B` the objective is affine with slope `rho`, so
//!   the search is confined to `[0, B]`; the affine tail cannot contain the
//!   minimum.
//! - chi-square: `-min over eta in [0, C*B/(C-1)] of
//!   C * sqrt(E_p[((eta - v)_+)^2]) - eta`, with `C = sqrt(1 + rho)`. The
//!   positive part keeps the dual exact when the worst case sits on the
//!   simplex boundary (tiny nominal entries with large value spread);
//!   without it the plain-square variant can dip below `min v` there. The
//!   two coincide whenever the worst case is interior.
//! - Kullback-Leibler: `-min over lambda in [0, B/rho] of
//!   lambda*rho + lambda * log E_p[exp(-v/lambda)]`. The `lambda -> 0+`
//!   limit equals minus the minimum of `v` over the support of `p` and is
//!   evaluated analytically; the exponential moment is computed in shifted
//!   log-sum-exp form so values up to `B = 50` stay finite for lambda down
//!   to 1e-12.
//! - Wasserstein: `max over lambda in [0, B/rho^p] of
//!   E_p[min_j (v(j) + lambda * d^p(j, s'))] - lambda * rho^p`. The
//!   objective is concave piecewise-linear in lambda; it is maximized
//!   exactly over the pairwise breakpoints when the state count is small
//!   enough, with a bracketing search as fallback.
//!
//! Radii at or below [`RHO_NEGLIGIBLE`] are treated as zero and collapse to
//! the nominal expectation: at that scale the worst-case correction is below
//! useful accuracy while the dual intervals blow up like `1/rho`, which only
//! degrades conditioning. Zero-probability entries of empirical nominals
//! need no special casing anywhere: the duals integrate only against `p`.

use crate::error::RmdpError;
use crate::model::expectation;
use crate::scalar::minimize_scalar;
use crate::uncertainty::{
    DistanceMetric, DivergenceKind, DualSolution, SolverConfig, UncertaintySpec,
};

/// Radii at or below this are collapsed to the nominal expectation.
pub const RHO_NEGLIGIBLE: f64 = 1e-9;

/// Breakpoint enumeration for the Wasserstein dual is exact while
/// `|S|^2` stays within this budget; beyond it the solver falls back to a
/// bracketing search.
const WASSERSTEIN_EXACT_BREAKPOINT_BUDGET: usize = 10_000;

fn check_inputs(p: &[f64], v: &[f64], hbound: f64) -> Result<(), RmdpError> {
    if p.len() != v.len() {
        return Err(RmdpError::LengthMismatch {
            left: p.len(),
            right: v.len(),
        });
    }
    if p.is_empty() {
        return Err(RmdpError::InvalidArgument("empty distribution".into()));
    }
    for &x in v {
        if !x.is_finite() || x < 0.0 {
            return Err(RmdpError::InvalidArgument(format!(
                "value entries must be finite and nonnegative, got {x}"
            )));
        }
        if x > hbound * (1.0 + 1e-12) + 1e-12 {
            return Err(RmdpError::InvalidArgument(format!(
                "value entry {x} exceeds the stated bound {hbound}"
            )));
        }
    }
    Ok(())
}

fn nominal(p: &[f64], v: &[f64]) -> Result<DualSolution, RmdpError> {
    Ok(DualSolution {
        dual_var: 0.0,
        value: expectation(p, v)?,
        evaluations: 0,
    })
}

fn min_value(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn support_min(p: &[f64], v: &[f64]) -> f64 {
    p.iter()
        .zip(v)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(_, vi)| *vi)
        .fold(f64::INFINITY, f64::min)
}

/// Worst-case expectation over the total-variation ball of radius `rho`.
///
/// `hbound` must dominate `max v` (planners pass the remaining-horizon
/// bound). For `rho >= 1` the ball is the whole simplex and the exact
/// minimum of `v` is returned with no solver iteration.
pub fn inner_tv(
    p: &[f64],
    v: &[f64],
    rho: f64,
    hbound: f64,
    cfg: &SolverConfig,
) -> Result<DualSolution, RmdpError> {
    check_inputs(p, v, hbound)?;
    if rho < 0.0 || !rho.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "tv radius {rho} must be >= 0"
        )));
    }
    if rho <= RHO_NEGLIGIBLE {
        return nominal(p, v);
    }
    let vmin = min_value(v);
    if rho >= 1.0 {
        // D_TV <= 1 always, so the ball covers the simplex: point mass at
        // the argmin is feasible and optimal.
        return Ok(DualSolution {
            dual_var: vmin,
            value: vmin,
            evaluations: 0,
        });
    }
    let objective = |eta: f64| {
        let hinge: f64 = p
            .iter()
            .zip(v)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, vi)| pi * (eta - vi).max(0.0))
            .sum();
        hinge + (eta - vmin).max(0.0) * rho - eta
    };
    // rho < 1 puts 2*hbound/rho beyond hbound, and the objective is affine
    // increasing there, so [0, hbound] contains the minimizer.
    let got = minimize_scalar(objective, 0.0, hbound, cfg);
    Ok(DualSolution {
        dual_var: got.x,
        value: -got.value,
        evaluations: got.evaluations,
    })
}

/// Worst-case expectation over the chi-square ball of radius `rho`.
pub fn inner_chi2(
    p: &[f64],
    v: &[f64],
    rho: f64,
    hbound: f64,
    cfg: &SolverConfig,
) -> Result<DualSolution, RmdpError> {
    check_inputs(p, v, hbound)?;
    if rho < 0.0 || !rho.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "chi2 radius {rho} must be >= 0"
        )));
    }
    if rho <= RHO_NEGLIGIBLE {
        return nominal(p, v);
    }
    let c_rho = (1.0 + rho).sqrt();
    let hi = c_rho * hbound / (c_rho - 1.0);
    let objective = |eta: f64| {
        let second_moment: f64 = p
            .iter()
            .zip(v)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, vi)| {
                let gap = (eta - vi).max(0.0);
                pi * gap * gap
            })
            .sum();
        c_rho * second_moment.sqrt() - eta
    };
    let got = minimize_scalar(objective, 0.0, hi, cfg);
    Ok(DualSolution {
        dual_var: got.x,
        value: -got.value,
        evaluations: got.evaluations,
    })
}

/// KL dual objective `lambda*rho + lambda * log E_p[exp(-v/lambda)]`,
/// evaluated in shifted log-sum-exp form. At `lambda = 0` the analytic
/// limit `-min over supp(p) of v` is returned. Exposed so numerical
/// stability can be probed directly at extreme `lambda`.
pub fn kl_dual_objective(p: &[f64], v: &[f64], rho: f64, lambda: f64) -> f64 {
    let m = support_min(p, v);
    if lambda <= 0.0 {
        return -m;
    }
    let sum: f64 = p
        .iter()
        .zip(v)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, vi)| pi * (-(vi - m) / lambda).exp())
        .sum();
    lambda * rho - m + lambda * sum.ln()
}

/// Worst-case expectation over the KL ball of radius `rho`. The output
/// never drops below the minimum of `v` on the support of `p`: KL worst
/// cases are absolutely continuous with respect to the nominal.
pub fn inner_kl(
    p: &[f64],
    v: &[f64],
    rho: f64,
    hbound: f64,
    cfg: &SolverConfig,
) -> Result<DualSolution, RmdpError> {
    check_inputs(p, v, hbound)?;
    if rho < 0.0 || !rho.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "kl radius {rho} must be >= 0"
        )));
    }
    if rho <= RHO_NEGLIGIBLE {
        return nominal(p, v);
    }
    let got = minimize_scalar(|l| kl_dual_objective(p, v, rho, l), 0.0, hbound / rho, cfg);
    Ok(DualSolution {
        dual_var: got.x,
        value: -got.value,
        evaluations: got.evaluations,
    })
}

/// Worst-case expectation over the Wasserstein ball of radius `rho` with
/// order `order` and ground metric `metric`.
///
/// `rho = 0` is rejected: the dual interval `[0, B/rho^p]` is unbounded and
/// the caller should use the nominal expectation directly. Strictly positive
/// radii at or below [`RHO_NEGLIGIBLE`] collapse to the nominal expectation
/// like the other kinds.
pub fn inner_wasserstein(
    p: &[f64],
    v: &[f64],
    rho: f64,
    order: u32,
    metric: &DistanceMetric,
    hbound: f64,
    cfg: &SolverConfig,
) -> Result<DualSolution, RmdpError> {
    check_inputs(p, v, hbound)?;
    if rho == 0.0 {
        return Err(RmdpError::WassersteinZeroRadius);
    }
    if rho < 0.0 || !rho.is_finite() {
        return Err(RmdpError::InvalidArgument(format!(
            "wasserstein radius {rho} must be positive"
        )));
    }
    if order < 1 {
        return Err(RmdpError::InvalidArgument(
            "wasserstein order must be >= 1".into(),
        ));
    }
    if metric.len() != p.len() {
        return Err(RmdpError::LengthMismatch {
            left: metric.len(),
            right: p.len(),
        });
    }
    if rho <= RHO_NEGLIGIBLE {
        return nominal(p, v);
    }

    let n = p.len();
    let dp = metric.pow_matrix(order);
    let rho_p = rho.powi(order as i32);
    let lambda_max = hbound / rho_p;

    let support: Vec<usize> = (0..n).filter(|&i| p[i] > 0.0).collect();
    // Transported value under multiplier lambda: each nominal destination s'
    // pays the cheapest relocation min_j (v[j] + lambda d^p(j, s')).
    let phi = |lambda: f64| {
        let moved: f64 = support
            .iter()
            .map(|&sp| {
                let cheapest = (0..n)
                    .map(|j| v[j] + lambda * dp[j][sp])
                    .fold(f64::INFINITY, f64::min);
                p[sp] * cheapest
            })
            .sum();
        moved - lambda * rho_p
    };

    if n * n <= WASSERSTEIN_EXACT_BREAKPOINT_BUDGET {
        // phi is concave piecewise-linear; its maximum sits at an endpoint
        // or at a breakpoint where the inner argmin switches between a pair
        // (i, j): lambda = (v_i - v_j) / (d^p(j, s') - d^p(i, s')).
        let mut candidates = vec![0.0, lambda_max];
        for &sp in &support {
            for i in 0..n {
                for j in (i + 1)..n {
                    let denom = dp[j][sp] - dp[i][sp];
                    if denom == 0.0 {
                        continue;
                    }
                    let lambda = (v[i] - v[j]) / denom;
                    if lambda > 0.0 && lambda < lambda_max {
                        candidates.push(lambda);
                    }
                }
            }
        }
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        // Concavity makes the right-slope nonincreasing in lambda, so the
        // peak segment is found by bisecting on its sign. Comparing slopes
        // is numerically safe where comparing near-equal phi values is not:
        // clustered breakpoints produce adjacent phi samples that differ by
        // less than rounding.
        let right_slope = |lambda: f64| -> f64 {
            let transported: f64 = support
                .iter()
                .map(|&sp| {
                    let mut cheapest = f64::INFINITY;
                    for j in 0..n {
                        let val = v[j] + lambda * dp[j][sp];
                        if val < cheapest {
                            cheapest = val;
                        }
                    }
                    let tie_tol = 1e-12 * (1.0 + cheapest.abs() + lambda);
                    let mut slope = f64::INFINITY;
                    for j in 0..n {
                        let val = v[j] + lambda * dp[j][sp];
                        if val <= cheapest + tie_tol {
                            slope = slope.min(dp[j][sp]);
                        }
                    }
                    p[sp] * slope
                })
                .sum();
            transported - rho_p
        };
        let mut evals = 0u32;
        let mut lo = 0usize;
        let mut hi = candidates.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            evals += 1;
            if right_slope(candidates[mid]) > 0.0 {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        // Evaluate a small window around the landing index plus the
        // endpoints, in case a flat segment blurred the sign right at the
        // peak.
        let mut window = vec![0, lo.saturating_sub(2), lo.saturating_sub(1), lo];
        window.extend([lo + 1, lo + 2, candidates.len() - 1]);
        window.sort_unstable();
        window.dedup();
        let mut best_lambda = candidates[0];
        let mut best_val = f64::NEG_INFINITY;
        for idx in window {
            let Some(&lambda) = candidates.get(idx) else {
                continue;
            };
            let y = phi(lambda);
            evals += 1;
            if y > best_val {
                best_val = y;
                best_lambda = lambda;
            }
        }
        return Ok(DualSolution {
            dual_var: best_lambda,
            value: best_val,
            evaluations: evals,
        });
    }

    let got = minimize_scalar(|l| -phi(l), 0.0, lambda_max, cfg);
    Ok(DualSolution {
        dual_var: got.x,
        value: -got.value,
        evaluations: got.evaluations,
    })
}

/// Uniform entry point used by planners: dispatches on the spec's kind.
pub fn inner(
    spec: &UncertaintySpec,
    p: &[f64],
    v: &[f64],
    hbound: f64,
    cfg: &SolverConfig,
) -> Result<DualSolution, RmdpError> {
    match spec.kind {
        DivergenceKind::Tv => inner_tv(p, v, spec.rho, hbound, cfg),
        DivergenceKind::Chi2 => inner_chi2(p, v, spec.rho, hbound, cfg),
        DivergenceKind::Kl => inner_kl(p, v, spec.rho, hbound, cfg),
        DivergenceKind::Wasserstein => {
            let metric = spec.metric.as_ref().ok_or_else(|| {
                RmdpError::InvalidArgument("wasserstein spec is missing its metric".into())
            })?;
            inner_wasserstein(p, v, spec.rho, spec.order, metric, hbound, cfg)
        }
    }
}
