//! Ambiguity-set specifications: divergence kind, radius, Wasserstein order
//! and ground metric, plus solver configuration and dual-solution records.

use serde::{Deserialize, Serialize};

use crate::error::RmdpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DivergenceKind {
    Tv,
    Chi2,
    Kl,
    Wasserstein,
}

impl DivergenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceKind::Tv => "tv",
            DivergenceKind::Chi2 => "chi2",
            DivergenceKind::Kl => "kl",
            DivergenceKind::Wasserstein => "wasserstein",
        }
    }
}

impl std::str::FromStr for DivergenceKind {
    type Err = RmdpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tv" => Ok(DivergenceKind::Tv),
            "chi2" => Ok(DivergenceKind::Chi2),
            "kl" => Ok(DivergenceKind::Kl),
            "wasserstein" => Ok(DivergenceKind::Wasserstein),
            other => Err(RmdpError::InvalidArgument(format!(
                "unknown divergence kind {other:?} (expected tv|chi2|kl|wasserstein)"
            ))),
        }
    }
}

/// Ground metric over state indices for Wasserstein balls: symmetric,
/// nonnegative, zero on the diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMetric {
    d: Vec<Vec<f64>>,
}

impl DistanceMetric {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self, RmdpError> {
        let n = d.len();
        if n == 0 {
            return Err(RmdpError::InvalidArgument("empty metric".into()));
        }
        for (i, row) in d.iter().enumerate() {
            if row.len() != n {
                return Err(RmdpError::LengthMismatch {
                    left: row.len(),
                    right: n,
                });
            }
            if d[i][i] != 0.0 {
                return Err(RmdpError::InvalidArgument(format!(
                    "d({i},{i}) = {} must be 0",
                    d[i][i]
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 || !v.is_finite() {
                    return Err(RmdpError::InvalidArgument(format!(
                        "d({i},{j}) = {v} must be finite and nonnegative"
                    )));
                }
                if d[j][i] != v {
                    return Err(RmdpError::InvalidArgument(format!(
                        "metric not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if n > 1 && d.iter().flatten().all(|&v| v == 0.0) {
            return Err(RmdpError::InvalidArgument(
                "metric is identically zero; distinct states need positive diameter".into(),
            ));
        }
        Ok(Self { d })
    }

    /// Default metric for integer-labeled states: `d(i, j) = |i - j|`.
    pub fn line(n: usize) -> Self {
        let d = (0..n)
            .map(|i| (0..n).map(|j| (i as f64 - j as f64).abs()).collect())
            .collect();
        Self { d }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }

    /// `d(i, j)^p` for all pairs.
    pub fn pow_matrix(&self, order: u32) -> Vec<Vec<f64>> {
        self.d
            .iter()
            .map(|row| row.iter().map(|v| v.powi(order as i32)).collect())
            .collect()
    }

    /// `B_p = max_{i,j} d(i, j)^p`, the diameter of the metric to the p-th
    /// power. Positive whenever there is more than one state.
    pub fn b_p(&self, order: u32) -> f64 {
        self.d
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.powi(order as i32)))
    }
}

/// Divergence kind plus radius; Wasserstein additionally carries the order
/// `p >= 1` and a ground metric.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec {
    pub kind: DivergenceKind,
    pub rho: f64,
    /// Wasserstein order; ignored for the f-divergence kinds.
    pub order: u32,
    pub metric: Option<DistanceMetric>,
}

impl UncertaintySpec {
    pub fn tv(rho: f64) -> Result<Self, RmdpError> {
        Self::f_divergence(DivergenceKind::Tv, rho)
    }

    pub fn chi2(rho: f64) -> Result<Self, RmdpError> {
        Self::f_divergence(DivergenceKind::Chi2, rho)
    }

    pub fn kl(rho: f64) -> Result<Self, RmdpError> {
        Self::f_divergence(DivergenceKind::Kl, rho)
    }

    fn f_divergence(kind: DivergenceKind, rho: f64) -> Result<Self, RmdpError> {
        if rho < 0.0 || !rho.is_finite() {
            return Err(RmdpError::InvalidArgument(format!(
                "{} radius must be finite and nonnegative, got {rho}",
                kind.as_str()
            )));
        }
        Ok(Self {
            kind,
            rho,
            order: 1,
            metric: None,
        })
    }

    pub fn wasserstein(rho: f64, order: u32, metric: DistanceMetric) -> Result<Self, RmdpError> {
        if rho <= 0.0 || !rho.is_finite() {
            return Err(RmdpError::InvalidArgument(format!(
                "wasserstein radius must be positive, got {rho}"
            )));
        }
        if order < 1 {
            return Err(RmdpError::InvalidArgument(
                "wasserstein order must be >= 1".into(),
            ));
        }
        Ok(Self {
            kind: DivergenceKind::Wasserstein,
            rho,
            order,
            metric: Some(metric),
        })
    }
}

/// Scalar-solver knobs for the dual reformulations. Each dual is a
/// single-variable convex problem over a bounded interval, so a bracketing
/// search with a coarse multistart grid suffices.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Bracket tolerance on the dual variable.
    pub tol: f64,
    /// Iteration cap for the bracketing search.
    pub max_iter: u32,
    /// Multistart grid size guarding against flat regions.
    pub grid_seeds: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            grid_seeds: 32,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), RmdpError> {
        if self.tol <= 0.0 || !self.tol.is_finite() {
            return Err(RmdpError::InvalidArgument(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter < 10 {
            return Err(RmdpError::InvalidArgument(format!(
                "solver iteration cap must be at least 10, got {}",
                self.max_iter
            )));
        }
        Ok(())
    }
}

/// Outcome of one inner worst-case problem: the optimal dual variable
/// (eta for TV/chi-square, lambda for KL/Wasserstein), the worst-case
/// expectation, and the number of objective evaluations spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolution {
    pub dual_var: f64,
    pub value: f64,
    pub evaluations: u32,
}
