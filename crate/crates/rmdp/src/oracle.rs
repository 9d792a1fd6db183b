//! Brute-force primal oracles for the worst-case expectations. These stay
//! independent of the dual solvers in `duals` so the two routes can check
//! each other.
//!
//! - [`oracle_tv_primal`] solves the total-variation primal exactly by
//!   greedy mass transport.
//! - [`oracle_simplex_grid`] scans a resolution-`step` grid of the simplex
//!   and minimizes `q . v` subject to the divergence constraint, for state
//!   spaces of up to four points.
//!
//! Wasserstein feasibility on the grid needs exact optimal-transport costs.
//! For up to four states the transportation LP is solved through its dual:
//! the feasible region `{(u, w) : u_i + w_j <= c_ij, u_0 = 0}` is a pointed
//! polyhedron whose vertices are enumerated once per nominal distribution
//! (tight-constraint subsets of size `2n - 1`); the cost of any candidate
//! `q` is then `max` over those vertices of `u . q + w . p`, by LP duality.

use crate::error::RmdpError;
use crate::model::expectation;
use crate::uncertainty::{DivergenceKind, UncertaintySpec};

/// Exact minimizer of `q . v` over the TV ball of radius `rho`: move up to
/// `rho` total mass from states in decreasing-value order onto the
/// minimum-value state.
pub fn oracle_tv_primal(p: &[f64], v: &[f64], rho: f64) -> Result<f64, RmdpError> {
    if p.len() != v.len() {
        return Err(RmdpError::LengthMismatch {
            left: p.len(),
            right: v.len(),
        });
    }
    if rho < 0.0 {
        return Err(RmdpError::InvalidArgument(format!(
            "tv radius {rho} must be >= 0"
        )));
    }
    let mut argmin = 0usize;
    for i in 1..v.len() {
        if v[i] < v[argmin] {
            argmin = i;
        }
    }
    let mut order: Vec<usize> = (0..v.len()).filter(|&i| i != argmin).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));

    let mut value = expectation(p, v)?;
    let mut budget = rho;
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let moved = budget.min(p[i]);
        value -= moved * (v[i] - v[argmin]);
        budget -= moved;
    }
    Ok(value)
}

/// Exact transportation costs from a fixed nominal `p` to arbitrary
/// candidates `q`, for small state spaces.
pub struct TransportOracle {
    /// Dual vertices: the `u` weights applied to `q`, with `w . p` folded in.
    vertices: Vec<(Vec<f64>, f64)>,
}

impl TransportOracle {
    /// `cost[i][j]` is the per-unit cost of placing candidate mass at `i`
    /// that the nominal holds at `j`.
    pub fn new(p: &[f64], cost: &[Vec<f64>]) -> Result<Self, RmdpError> {
        let n = p.len();
        if !(1..=4).contains(&n) {
            return Err(RmdpError::InvalidArgument(format!(
                "transport oracle supports 1..=4 states, got {n}"
            )));
        }
        if cost.len() != n || cost.iter().any(|row| row.len() != n) {
            return Err(RmdpError::LengthMismatch {
                left: cost.len(),
                right: n,
            });
        }
        if n == 1 {
            return Ok(Self {
                vertices: vec![(vec![0.0], 0.0)],
            });
        }

        // Unknowns: u_1..u_{n-1}, w_0..w_{n-1} (u_0 normalized to zero).
        let unknowns = 2 * n - 1;
        let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let mut vertices = Vec::new();
        let mut subset = vec![0usize; unknowns];
        enumerate_subsets(cells.len(), unknowns, &mut subset, 0, 0, &mut |chosen| {
            let mut a = vec![vec![0.0; unknowns]; unknowns];
            let mut b = vec![0.0; unknowns];
            for (row, &cell) in chosen.iter().enumerate() {
                let (i, j) = cells[cell];
                if i >= 1 {
                    a[row][i - 1] = 1.0;
                }
                a[row][n - 1 + j] = 1.0;
                b[row] = cost[i][j];
            }
            let Some(x) = solve_linear(a, b) else { return };
            let mut u = vec![0.0; n];
            let mut w = vec![0.0; n];
            u[1..n].copy_from_slice(&x[..n - 1]);
            w.copy_from_slice(&x[n - 1..]);
            for i in 0..n {
                for j in 0..n {
                    if u[i] + w[j] > cost[i][j] + 1e-9 {
                        return;
                    }
                }
            }
            let w_dot_p: f64 = w.iter().zip(p).map(|(wi, pi)| wi * pi).sum();
            // Many tight-constraint subsets describe the same vertex.
            let duplicate = vertices.iter().any(|(seen_u, seen_w): &(Vec<f64>, f64)| {
                (seen_w - w_dot_p).abs() <= 1e-12
                    && seen_u.iter().zip(&u).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            if !duplicate {
                vertices.push((u, w_dot_p));
            }
        });
        if vertices.is_empty() {
            return Err(RmdpError::InvalidArgument(
                "transport dual has no feasible vertex (non-finite costs?)".into(),
            ));
        }
        Ok(Self { vertices })
    }

    /// Minimal transport cost from `p` to `q`.
    pub fn cost(&self, q: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|(u, w_dot_p)| u.iter().zip(q).map(|(ui, qi)| ui * qi).sum::<f64>() + w_dot_p)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn enumerate_subsets(
    n_items: usize,
    k: usize,
    scratch: &mut [usize],
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(scratch);
        return;
    }
    for item in start..n_items {
        scratch[depth] = item;
        enumerate_subsets(n_items, k, scratch, depth + 1, item + 1, visit);
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            if factor == 0.0 {
                continue;
            }
            for (entry, pivot_entry) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *entry -= factor * pivot_entry;
            }
            b[col + 1 + offset] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in (row + 1)..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn divergence_on_grid(
    spec: &UncertaintySpec,
    p: &[f64],
    q: &[f64],
    transport: Option<&TransportOracle>,
) -> f64 {
    match spec.kind {
        DivergenceKind::Tv => 0.5 * p.iter().zip(q).map(|(pi, qi)| (pi - qi).abs()).sum::<f64>(),
        DivergenceKind::Chi2 => {
            let mut acc = 0.0;
            for (pi, qi) in p.iter().zip(q) {
                if *pi > 0.0 {
                    acc += (qi - pi) * (qi - pi) / pi;
                } else if *qi > 0.0 {
                    return f64::INFINITY;
                }
            }
            acc
        }
        DivergenceKind::Kl => {
            let mut acc = 0.0;
            for (pi, qi) in p.iter().zip(q) {
                if *qi > 0.0 {
                    if *pi <= 0.0 {
                        return f64::INFINITY;
                    }
                    acc += qi * (qi / pi).ln();
                }
            }
            acc
        }
        DivergenceKind::Wasserstein => transport.expect("transport oracle prepared").cost(q),
    }
}

/// Minimum of `q . v` over all simplex grid points of resolution `step`
/// satisfying the spec's divergence constraint. Supports 2 to 4 states;
/// the answer is accurate to about `step * range(v)`.
pub fn oracle_simplex_grid(
    spec: &UncertaintySpec,
    p: &[f64],
    v: &[f64],
    step: f64,
) -> Result<f64, RmdpError> {
    let n = p.len();
    if v.len() != n {
        return Err(RmdpError::LengthMismatch {
            left: n,
            right: v.len(),
        });
    }
    if !(2..=4).contains(&n) {
        return Err(RmdpError::InvalidArgument(format!(
            "grid oracle supports 2..=4 states, got {n}"
        )));
    }
    if !(step > 0.0 && step <= 1e-2) {
        return Err(RmdpError::InvalidArgument(format!(
            "grid step must be in (0, 1e-2], got {step}"
        )));
    }

    let transport = if spec.kind == DivergenceKind::Wasserstein {
        let metric = spec
            .metric
            .as_ref()
            .ok_or_else(|| RmdpError::InvalidArgument("wasserstein spec without metric".into()))?;
        if metric.len() != n {
            return Err(RmdpError::LengthMismatch {
                left: metric.len(),
                right: n,
            });
        }
        Some(TransportOracle::new(p, &metric.pow_matrix(spec.order))?)
    } else {
        None
    };
    // Radius in transport-cost units: the ball W_p(q, p) <= rho constrains
    // the p-th power cost by rho^p.
    let radius = if spec.kind == DivergenceKind::Wasserstein {
        spec.rho.powi(spec.order as i32)
    } else {
        spec.rho
    };
    let feasible = |q: &[f64]| divergence_on_grid(spec, p, q, transport.as_ref()) <= radius + 1e-12;

    let resolution = (1.0 / step).round() as u64;
    // Seed the pruning bound with the grid point nearest the nominal.
    let mut best = f64::INFINITY;
    {
        let mut q: Vec<f64> = p
            .iter()
            .map(|pi| (pi * resolution as f64).round())
            .collect();
        let total: f64 = q.iter().sum();
        let largest = (0..n)
            .max_by(|&a, &b| q[a].partial_cmp(&q[b]).unwrap())
            .unwrap();
        q[largest] += resolution as f64 - total;
        if q[largest] >= 0.0 {
            for x in &mut q {
                *x /= resolution as f64;
            }
            if feasible(&q) {
                best = expectation(&q, v)?;
            }
        }
    }

    // Smallest value reachable by the coordinates at or after each dim;
    // drives the branch-and-bound pruning of the scan.
    let mut suffix_min = vec![f64::INFINITY; n];
    suffix_min[n - 1] = v[n - 1];
    for i in (0..n - 1).rev() {
        suffix_min[i] = v[i].min(suffix_min[i + 1]);
    }

    let mut q = vec![0.0; n];
    scan_simplex(
        &mut q,
        0,
        resolution,
        0.0,
        resolution,
        v,
        &suffix_min,
        &feasible,
        &mut best,
    );
    Ok(best)
}

/// Depth-first scan over grid points `q` with `sum q = 1`. At every level
/// the objective lower bound `partial + (k*v[dim] + (rem-k)*suffix_min)/m`
/// is linear in `k`, so iterating in its increasing direction and breaking
/// at the current best prunes everything outside the near-optimal band;
/// only surviving leaves pay for a divergence evaluation.
#[allow(clippy::too_many_arguments)]
fn scan_simplex(
    q: &mut Vec<f64>,
    dim: usize,
    remaining: u64,
    partial: f64,
    resolution: u64,
    v: &[f64],
    suffix_min: &[f64],
    feasible: &impl Fn(&[f64]) -> bool,
    best: &mut f64,
) {
    let n = q.len();
    let m = resolution as f64;
    if dim == n - 1 {
        let val = partial + remaining as f64 / m * v[dim];
        if val < *best {
            q[dim] = remaining as f64 / m;
            if feasible(q) {
                *best = val;
            }
        }
        return;
    }
    let tail_min = suffix_min[dim + 1];
    let ascending = v[dim] >= tail_min;
    for i in 0..=remaining {
        // Walk k in the direction of increasing lower bound.
        let k = if ascending { i } else { remaining - i };
        let bound = partial + (k as f64 * v[dim] + (remaining - k) as f64 * tail_min) / m;
        if bound >= *best {
            break;
        }
        q[dim] = k as f64 / m;
        scan_simplex(
            q,
            dim + 1,
            remaining - k,
            partial + k as f64 / m * v[dim],
            resolution,
            v,
            suffix_min,
            feasible,
            best,
        );
    }
}
