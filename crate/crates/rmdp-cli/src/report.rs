//! Sweep results and their deterministic CSV/JSON serialization.
//!
//! The CSV is a pure function of the experiment configuration: rows are
//! sorted by (divergence, rho, N, seed, test_p), floats are printed with 12
//! significant digits, and the wall_ms column is pinned to 0 so repeated
//! runs of the same configuration are byte-identical. Measured wall times
//! are reported on stderr instead.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub divergence: String,
    pub rho: f64,
    pub n: u64,
    pub seed: u64,
    pub test_p: f64,
    pub gap: f64,
    pub gap_normalized: f64,
    pub win_prob_avg: f64,
    /// Phase-1 value for every start state of the evaluated policy.
    pub win_prob_by_state: Vec<f64>,
    /// Measured solve time; excluded from the CSV determinism contract.
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Fills the normalized-gap column: each row's gap divided by the
    /// largest gap of its divergence within this sweep.
    pub fn normalize_gaps(&mut self) {
        let mut divergences: Vec<String> = self.rows.iter().map(|r| r.divergence.clone()).collect();
        divergences.sort();
        divergences.dedup();
        for div in divergences {
            let max_gap = self
                .rows
                .iter()
                .filter(|r| r.divergence == div)
                .map(|r| r.gap)
                .fold(0.0f64, f64::max);
            for row in self.rows.iter_mut().filter(|r| r.divergence == div) {
                row.gap_normalized = if max_gap > 0.0 {
                    row.gap / max_gap
                } else {
                    0.0
                };
            }
        }
    }

    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.divergence
                .cmp(&b.divergence)
                .then(a.rho.total_cmp(&b.rho))
                .then(a.n.cmp(&b.n))
                .then(a.seed.cmp(&b.seed))
                .then(a.test_p.total_cmp(&b.test_p))
        });
    }

    pub fn csv_string(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},0\n",
                row.divergence,
                sig12(row.rho),
                row.n,
                row.seed,
                sig12(row.test_p),
                sig12(row.gap),
                sig12(row.gap_normalized),
                sig12(row.win_prob_avg),
            ));
        }
        out
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.rows.iter().map(|r| r.wall_ms).sum()
    }
}

pub const CSV_HEADER: &str = "divergence,rho,N,seed,test_p,gap,gap_normalized,win_prob_avg,wall_ms";

/// Writes the sorted CSV to `path`.
pub fn emit_csv(result: &SweepResult, path: &Path) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| {
        std::io::Error::new(e.kind(), format!("cannot create {}: {e}", path.display()))
    })?;
    file.write_all(result.csv_string().as_bytes())
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display())))
}

/// Writes the per-state winning probabilities next to the CSV.
pub fn emit_values_json(result: &SweepResult, csv_path: &Path) -> std::io::Result<()> {
    let path = csv_path.with_extension("values.json");
    let text = serde_json::to_string_pretty(result).expect("rows serialize");
    std::fs::write(&path, text)
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display())))
}

/// Plain-decimal formatting with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}
