//! One-dimensional minimization on a closed interval: a coarse multistart
//! grid picks the best bracket, golden-section search refines it. The
//! returned value is the best of every point evaluated, so the result can
//! only improve on the grid scan.

use crate::uncertainty::SolverConfig;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy)]
pub struct ScalarMin {
    pub x: f64,
    pub value: f64,
    pub evaluations: u32,
}

/// Minimizes `f` over `[lo, hi]`, assuming unimodality (all dual objectives
/// here are convex or concave in the scalar variable).
pub fn minimize_scalar<F>(f: F, lo: f64, hi: f64, cfg: &SolverConfig) -> ScalarMin
where
    F: Fn(f64) -> f64,
{
    let mut evals = 0u32;
    let mut best_x = lo;
    let mut best_val = f64::INFINITY;
    let eval = |x: f64, evals: &mut u32, best_x: &mut f64, best_val: &mut f64| -> f64 {
        *evals += 1;
        let y = f(x);
        if y < *best_val {
            *best_val = y;
            *best_x = x;
        }
        y
    };

    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        eval(lo, &mut evals, &mut best_x, &mut best_val);
        return ScalarMin {
            x: best_x,
            value: best_val,
            evaluations: evals,
        };
    }

    // Multistart grid: also pins down the bracket that contains the minimum.
    let n = cfg.grid_seeds.max(2) as usize;
    let mut best_i = 0usize;
    let mut best_grid = f64::INFINITY;
    for i in 0..=n {
        let x = lo + (hi - lo) * (i as f64) / (n as f64);
        let y = eval(x, &mut evals, &mut best_x, &mut best_val);
        if y < best_grid {
            best_grid = y;
            best_i = i;
        }
    }
    let step = (hi - lo) / (n as f64);
    let mut a = (lo + step * best_i.saturating_sub(1) as f64).max(lo);
    let mut b = (lo + step * (best_i + 1) as f64).min(hi);

    // Golden-section refinement inside the winning bracket.
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = eval(x1, &mut evals, &mut best_x, &mut best_val);
    let mut f2 = eval(x2, &mut evals, &mut best_x, &mut best_val);
    let mut iter = 0u32;
    while (b - a) > cfg.tol && iter < cfg.max_iter {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = eval(x1, &mut evals, &mut best_x, &mut best_val);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = eval(x2, &mut evals, &mut best_x, &mut best_val);
        }
        iter += 1;
    }

    ScalarMin {
        x: best_x,
        value: best_val,
        evaluations: evals,
    }
}
