//! Generative-model access and phased maximum-likelihood estimation of the
//! nominal model.
//!
//! Each phase uses its own sample budget and its own keyed substreams, so
//! phase `h`'s estimate is independent of every other phase's, and the
//! estimate of any triple is unchanged by the order (or parallel schedule)
//! in which triples are sampled.

use crate::error::RmdpError;
use crate::model::TabularModel;
use crate::par;
use crate::rng;

/// Next-state sampler hiding a nominal model behind keyed random streams.
///
/// A draw at `(h, s, a, i)` is a pure function of the master seed and that
/// key, produced by inverse-CDF lookup on the row's precomputed cumulative
/// sums.
#[derive(Debug, Clone)]
pub struct GenerativeModel {
    truth: TabularModel,
    seed: u64,
    cumulative: Vec<Vec<Vec<Vec<f64>>>>,
}

impl GenerativeModel {
    pub fn new(truth: TabularModel, seed: u64) -> Result<Self, RmdpError> {
        truth.validate()?;
        let cumulative = truth
            .kernels
            .iter()
            .map(|phase| {
                phase
                    .iter()
                    .map(|state| {
                        state
                            .iter()
                            .map(|row| {
                                let mut acc = 0.0;
                                let mut cum: Vec<f64> = row
                                    .iter()
                                    .map(|q| {
                                        acc += q;
                                        acc
                                    })
                                    .collect();
                                // Guard the last bucket against rounding.
                                if let Some(last) = cum.last_mut() {
                                    *last = 1.0;
                                }
                                cum
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            truth,
            seed,
            cumulative,
        })
    }

    pub fn truth(&self) -> &TabularModel {
        &self.truth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws the next state for `(h, s, a)` from the hidden nominal, using
    /// the substream keyed by `(seed, h, s, a, draw)`.
    pub fn sample_next_state(
        &self,
        h: usize,
        s: usize,
        a: usize,
        draw: u64,
    ) -> Result<usize, RmdpError> {
        if h >= self.truth.horizon || s >= self.truth.num_states || a >= self.truth.num_actions(s) {
            return Err(RmdpError::IndexOutOfRange(format!(
                "(h={h}, s={s}, a={a}) outside ({}, {}, |A(s)|)",
                self.truth.horizon, self.truth.num_states
            )));
        }
        let u = rng::stream_unit(self.seed, h as u64, s as u64, a as u64, draw);
        let cum = &self.cumulative[h][s][a];
        Ok(cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1))
    }
}

/// Per-triple sample count `N`; the total budget is `N * H * sum_s |A(s)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleBudget {
    n_per_triple: usize,
}

impl SampleBudget {
    pub fn new(n_per_triple: usize) -> Result<Self, RmdpError> {
        if n_per_triple == 0 {
            return Err(RmdpError::InvalidArgument(
                "sample budget must be >= 1".into(),
            ));
        }
        Ok(Self { n_per_triple })
    }

    pub fn n(&self) -> usize {
        self.n_per_triple
    }

    pub fn total_samples(&self, model: &TabularModel) -> u64 {
        self.n_per_triple as u64 * model.horizon as u64 * model.pairs_per_phase() as u64
    }
}

/// Maximum-likelihood estimate of the nominal: kernel rows are empirical
/// frequencies `counts / N`, with the reward and action structure copied
/// from the truth (rewards are known).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    pub model: TabularModel,
    /// `counts[h][s][a][s']` over the `N` draws of that triple.
    pub counts: Vec<Vec<Vec<Vec<u64>>>>,
}

/// Empirical frequency row for `n` observed transitions. The final nonzero
/// entry absorbs the rounding of the others so the row sums to exactly 1.0
/// when added in index order.
pub fn empirical_row(counts: &[u64], n: usize) -> Vec<f64> {
    debug_assert_eq!(counts.iter().sum::<u64>() as usize, n);
    let mut row: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    if let Some(last_nz) = (0..row.len()).rev().find(|&i| counts[i] > 0) {
        let partial: f64 = row[..last_nz].iter().sum();
        row[last_nz] = 1.0 - partial;
    }
    row
}

/// Estimates every `(h, s, a)` row from `N` fresh draws of its keyed
/// substream. Triples are sampled data-parallel when the `parallel` feature
/// is on; keyed substreams make the result schedule-independent.
pub fn mle_estimate(gm: &GenerativeModel, budget: &SampleBudget) -> EmpiricalModel {
    let truth = gm.truth();
    let n = budget.n();
    let triples: Vec<(usize, usize, usize)> = (0..truth.horizon)
        .flat_map(|h| {
            (0..truth.num_states)
                .flat_map(move |s| (0..truth.num_actions(s)).map(move |a| (h, s, a)))
        })
        .collect();

    let rows = par::map_indexed(triples.len(), |t| {
        let (h, s, a) = triples[t];
        let mut counts = vec![0u64; truth.num_states];
        for draw in 0..n {
            let sp = gm
                .sample_next_state(h, s, a, draw as u64)
                .expect("triple indices are valid by construction");
            counts[sp] += 1;
        }
        let row = empirical_row(&counts, n);
        (counts, row)
    });

    let mut counts = vec![Vec::new(); truth.horizon];
    let mut kernels = vec![Vec::new(); truth.horizon];
    for h in 0..truth.horizon {
        counts[h] = vec![Vec::new(); truth.num_states];
        kernels[h] = vec![Vec::new(); truth.num_states];
    }
    for ((h, s, _a), (c, row)) in triples.into_iter().zip(rows) {
        counts[h][s].push(c);
        kernels[h][s].push(row);
    }

    let model = TabularModel {
        num_states: truth.num_states,
        horizon: truth.horizon,
        actions: truth.actions.clone(),
        reward: truth.reward.clone(),
        kernels,
    };
    EmpiricalModel { model, counts }
}
