//! The gambler's problem as a finite-horizon tabular model.
//!
//! A gambler with balance `s` bets `a in {0, 1, ..., min(s, goal - s)}` on a
//! coin that lands heads with probability `heads_prob`, moving to `s + a` on
//! heads and `s - a` on tails. The game ends at balance 0 or at the goal.
//!
//! States are `0..=goal` plus one absorbing sink at index `goal + 1`. The
//! goal state pays reward 1 and feeds the sink, every other reward is 0, so
//! the unit is collected exactly once and the phase-1 value of a policy is
//! its within-horizon winning probability. Holding the goal at some decision
//! epoch `h <= H` is what counts as a win: reaching it only on the final
//! transition (arrival at epoch `H + 1`) pays nothing. Betting 0 self-loops;
//! at balance 0 the only action is 0. The kernel is stationary and
//! replicated across phases.

use crate::error::RmdpError;
use crate::model::TabularModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GamblersConfig {
    pub goal: usize,
    pub horizon: usize,
    /// Heads (win) probability of the coin.
    pub heads_prob: f64,
}

impl Default for GamblersConfig {
    fn default() -> Self {
        Self {
            goal: 50,
            horizon: 50,
            heads_prob: 0.6,
        }
    }
}

impl GamblersConfig {
    pub fn goal_state(&self) -> usize {
        self.goal
    }

    pub fn sink_state(&self) -> usize {
        self.goal + 1
    }

    pub fn num_states(&self) -> usize {
        self.goal + 2
    }

    fn validate(&self) -> Result<(), RmdpError> {
        if self.goal == 0 {
            return Err(RmdpError::InvalidArgument("goal must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(RmdpError::InvalidArgument(
                "horizon must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.heads_prob) {
            return Err(RmdpError::InvalidArgument(format!(
                "heads probability {} outside [0, 1]",
                self.heads_prob
            )));
        }
        Ok(())
    }
}

/// Builds the gambler's model for `cfg`.
pub fn build_gamblers(cfg: &GamblersConfig) -> Result<TabularModel, RmdpError> {
    cfg.validate()?;
    let n = cfg.num_states();
    let goal = cfg.goal_state();
    let sink = cfg.sink_state();
    let p = cfg.heads_prob;

    let mut actions = Vec::with_capacity(n);
    let mut reward_row = Vec::with_capacity(n);
    let mut kernel_row = Vec::with_capacity(n);
    for s in 0..n {
        let bets: Vec<usize> = if s == 0 || s == goal || s == sink {
            vec![0]
        } else {
            (0..=s.min(goal - s)).collect()
        };
        let mut rewards = Vec::with_capacity(bets.len());
        let mut kernels = Vec::with_capacity(bets.len());
        for &bet in &bets {
            rewards.push(if s == goal { 1.0 } else { 0.0 });
            let mut row = vec![0.0; n];
            if s == 0 || s == goal || s == sink {
                row[sink] = 1.0;
            } else if bet == 0 {
                row[s] = 1.0;
            } else {
                row[s + bet] += p;
                row[s - bet] += 1.0 - p;
            }
            kernels.push(row);
        }
        actions.push(bets);
        reward_row.push(rewards);
        kernel_row.push(kernels);
    }

    Ok(TabularModel {
        num_states: n,
        horizon: cfg.horizon,
        actions,
        reward: vec![reward_row; cfg.horizon],
        kernels: vec![kernel_row; cfg.horizon],
    })
}

/// Same structure with the heads probability replaced; used for the
/// perturbed testing environments.
pub fn perturb(cfg: &GamblersConfig, new_p: f64) -> Result<TabularModel, RmdpError> {
    build_gamblers(&GamblersConfig {
        heads_prob: new_p,
        ..*cfg
    })
}

/// Uniform average over the interior balances `1..goal` (start states that
/// are neither absorbed nor artificial). A goal of 1 has no interior; the
/// whole row is averaged instead.
pub fn interior_average(row: &[f64], goal: usize) -> f64 {
    let interior = if goal > 1 { &row[1..goal] } else { row };
    interior.iter().sum::<f64>() / interior.len() as f64
}
