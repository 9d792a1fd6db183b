//! Finite-horizon tabular MDP data model: transition kernels, rewards, value
//! functions, and deterministic Markov policies.
//!
//! A model is a tuple (S, A(s), H, r, P): `num_states` states, a nonempty
//! action set per state, horizon `H`, rewards `r[h][s][a]` in `[0, 1]`, and
//! per-phase kernels `P[h][s][a]` over next states. Everything is stored
//! zero-based; phase row `h` of a [`ValueFunction`] holds the value-to-go
//! with `H - h` decision epochs remaining, and row `H` is identically zero.
//!
//! The serde layout of [`TabularModel`] is the interchange format: top-level
//! keys `num_states`, `horizon`, `actions`, `reward`, `kernels`. Probabilities
//! round-trip bit-exactly through JSON (shortest-representation float
//! printing).

use serde::{Deserialize, Serialize};

use crate::error::{ModelViolation, RmdpError};
use crate::par;

/// Tolerance on kernel row sums at validation. Rows are renormalized only in
/// the maximum-likelihood estimation path, never on user input.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularModel {
    pub num_states: usize,
    pub horizon: usize,
    /// Action ids per state; `actions[s][k]` is the id of the k-th action.
    /// Rewards and kernels are indexed by the position `k`, not the id.
    pub actions: Vec<Vec<usize>>,
    /// `reward[h][s][k]` in `[0, 1]`.
    pub reward: Vec<Vec<Vec<f64>>>,
    /// `kernels[h][s][k][s']`: probability of moving to `s'`.
    pub kernels: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TabularModel {
    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    pub fn kernel(&self, h: usize, s: usize, k: usize) -> &[f64] {
        &self.kernels[h][s][k]
    }

    pub fn reward_at(&self, h: usize, s: usize, k: usize) -> f64 {
        self.reward[h][s][k]
    }

    /// Total number of (s, a) pairs in one phase.
    pub fn pairs_per_phase(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    /// Checks every model invariant and reports the first violation:
    /// structural shape, action sets, kernel row sums within
    /// [`ROW_SUM_TOL`], kernel nonnegativity, and reward range.
    pub fn validate(&self) -> Result<(), ModelViolation> {
        if self.num_states == 0 {
            return Err(ModelViolation::Shape("num_states must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(ModelViolation::Shape("horizon must be positive".into()));
        }
        if self.actions.len() != self.num_states {
            return Err(ModelViolation::Shape(format!(
                "actions has {} entries, expected {}",
                self.actions.len(),
                self.num_states
            )));
        }
        for (s, ids) in self.actions.iter().enumerate() {
            if ids.is_empty() {
                return Err(ModelViolation::EmptyActionSet { s });
            }
            for (k, id) in ids.iter().enumerate() {
                if ids[..k].contains(id) {
                    return Err(ModelViolation::DuplicateAction { s, id: *id });
                }
            }
        }
        if self.reward.len() != self.horizon || self.kernels.len() != self.horizon {
            return Err(ModelViolation::Shape(format!(
                "reward/kernels have {}/{} phases, expected {}",
                self.reward.len(),
                self.kernels.len(),
                self.horizon
            )));
        }
        for h in 0..self.horizon {
            if self.reward[h].len() != self.num_states || self.kernels[h].len() != self.num_states {
                return Err(ModelViolation::Shape(format!(
                    "phase {h} has {}/{} states of rewards/kernels, expected {}",
                    self.reward[h].len(),
                    self.kernels[h].len(),
                    self.num_states
                )));
            }
            for s in 0..self.num_states {
                let n_act = self.actions[s].len();
                if self.reward[h][s].len() != n_act || self.kernels[h][s].len() != n_act {
                    return Err(ModelViolation::Shape(format!(
                        "(h={h}, s={s}) has {}/{} actions of rewards/kernels, expected {n_act}",
                        self.reward[h][s].len(),
                        self.kernels[h][s].len(),
                    )));
                }
                for a in 0..n_act {
                    let row = &self.kernels[h][s][a];
                    if row.len() != self.num_states {
                        return Err(ModelViolation::Shape(format!(
                            "kernel row (h={h}, s={s}, a={a}) has {} entries, expected {}",
                            row.len(),
                            self.num_states
                        )));
                    }
                    for (sp, &q) in row.iter().enumerate() {
                        if q < 0.0 || !q.is_finite() {
                            return Err(ModelViolation::NegativeKernelEntry {
                                h,
                                s,
                                a,
                                sp,
                                value: q,
                            });
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > ROW_SUM_TOL {
                        return Err(ModelViolation::RowSum { h, s, a, sum });
                    }
                    let r = self.reward[h][s][a];
                    if !(0.0..=1.0).contains(&r) || !r.is_finite() {
                        return Err(ModelViolation::RewardRange { h, s, a, value: r });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, RmdpError> {
        serde_json::from_str(text)
            .map_err(|e| RmdpError::InvalidArgument(format!("model JSON: {e}")))
    }
}

/// Validates `model` and returns the first violated invariant, if any.
pub fn validate_model(model: &TabularModel) -> Result<(), ModelViolation> {
    model.validate()
}

/// Expectation of `v` under the probability vector `p`.
pub fn expectation(p: &[f64], v: &[f64]) -> Result<f64, RmdpError> {
    if p.len() != v.len() {
        return Err(RmdpError::LengthMismatch {
            left: p.len(),
            right: v.len(),
        });
    }
    Ok(p.iter().zip(v).map(|(pi, vi)| pi * vi).sum())
}

/// Per-phase value vectors, `H + 1` rows by `|S|` columns. Row `H` is the
/// terminal zero row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    pub values: Vec<Vec<f64>>,
}

impl ValueFunction {
    pub fn zeros(horizon: usize, num_states: usize) -> Self {
        Self {
            values: vec![vec![0.0; num_states]; horizon + 1],
        }
    }

    pub fn phase(&self, h: usize) -> &[f64] {
        &self.values[h]
    }

    pub fn horizon(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn num_states(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Deterministic Markov policy: `decisions[h][s]` is the index into the
/// state's action set (not the action id).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub decisions: Vec<Vec<usize>>,
}

impl Policy {
    pub fn action_index(&self, h: usize, s: usize) -> usize {
        self.decisions[h][s]
    }

    /// Action id chosen at (h, s) under `model`'s action sets.
    pub fn action_id(&self, model: &TabularModel, h: usize, s: usize) -> usize {
        model.actions[s][self.decisions[h][s]]
    }

    pub fn validate(&self, model: &TabularModel) -> Result<(), ModelViolation> {
        if self.decisions.len() != model.horizon {
            return Err(ModelViolation::Shape(format!(
                "policy has {} phases, expected {}",
                self.decisions.len(),
                model.horizon
            )));
        }
        for (h, row) in self.decisions.iter().enumerate() {
            if row.len() != model.num_states {
                return Err(ModelViolation::Shape(format!(
                    "policy phase {h} has {} states, expected {}",
                    row.len(),
                    model.num_states
                )));
            }
            for (s, &k) in row.iter().enumerate() {
                if k >= model.actions[s].len() {
                    return Err(ModelViolation::PolicyAction {
                        h,
                        s,
                        index: k,
                        available: model.actions[s].len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One robust Bellman backup: per state, maximize
/// `r_h(s, a) + inner(P_h(.|s, a), v_next)` over the state's actions.
///
/// Returns the backed-up value row and the greedy action row. Ties pick the
/// smallest action index, so repeated calls on identical inputs give
/// identical rows. States are processed data-parallel when the `parallel`
/// feature is on; output order is fixed either way.
pub fn greedy_value_backup<F>(
    model: &TabularModel,
    h: usize,
    v_next: &[f64],
    inner: F,
) -> Result<(Vec<f64>, Vec<usize>), RmdpError>
where
    F: Fn(&[f64], &[f64]) -> Result<f64, RmdpError> + Sync + Send,
{
    if h >= model.horizon {
        return Err(RmdpError::IndexOutOfRange(format!(
            "phase {h} out of range for horizon {}",
            model.horizon
        )));
    }
    if v_next.len() != model.num_states {
        return Err(RmdpError::LengthMismatch {
            left: v_next.len(),
            right: model.num_states,
        });
    }
    let per_state = par::try_map_indexed(model.num_states, |s| {
        let mut best_val = f64::NEG_INFINITY;
        let mut best_idx = 0usize;
        for k in 0..model.num_actions(s) {
            let q = model.reward_at(h, s, k) + inner(model.kernel(h, s, k), v_next)?;
            if q > best_val {
                best_val = q;
                best_idx = k;
            }
        }
        Ok::<(f64, usize), RmdpError>((best_val, best_idx))
    })?;
    Ok(per_state.into_iter().unzip())
}
