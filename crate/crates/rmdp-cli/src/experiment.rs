//! Experiment harness: command-line parsing, model construction, and the
//! three sweep studies (sample-size convergence, radius dependence, and
//! robustness under perturbed test environments).

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rmdp::gamblers::{build_gamblers, interior_average, perturb, GamblersConfig};
use rmdp::{
    classical_dp, evaluate_robust, evaluate_under, robust_dp, rpvl, suboptimality_gap,
    DistanceMetric, DivergenceKind, GenerativeModel, Policy, SampleBudget, SolverConfig,
    TabularModel, UncertaintySpec, ValueFunction,
};

use crate::report::{emit_csv, emit_values_json, SweepResult, SweepRow};

#[derive(Debug, Parser)]
#[command(
    name = "rmdp-cli",
    about = "Robust finite-horizon MDP experiments over TV, chi-square, KL, and Wasserstein ambiguity sets",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact robust plan on the nominal model; emits policy/value JSON.
    Solve(CommonArgs),
    /// Sample-based robust plan (phased value learning); emits policy/value JSON.
    SampleSolve(CommonArgs),
    /// Evaluate a stored policy under a (possibly perturbed) model.
    Evaluate(CommonArgs),
    /// Convergence sweep over the sample budget N (CSV).
    SweepN(CommonArgs),
    /// Sweep over the uncertainty radius rho at fixed N (CSV).
    SweepRho(CommonArgs),
    /// Robustness sweep over perturbed test heads probabilities (CSV).
    SweepTestP(CommonArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Built-in environment (only `gamblers`).
    #[arg(long, default_value = "gamblers")]
    env: String,

    /// Model JSON file; overrides --env.
    #[arg(long)]
    model: Option<PathBuf>,

    /// Divergence kind: tv | chi2 | kl | wasserstein (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    divergence: Vec<String>,

    /// Uncertainty radius grid.
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,

    /// Sample budget grid (per state-action-phase triple).
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,

    /// Test heads-probability grid.
    #[arg(long = "test-p", value_delimiter = ',')]
    test_p: Vec<f64>,

    /// Training (nominal) heads probability for the gambler's environment.
    #[arg(long = "train-p", default_value_t = 0.6)]
    train_p: f64,

    /// Generative-model seeds (repeatable or comma-separated).
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,

    /// Wasserstein order p.
    #[arg(long = "wasserstein-p", default_value_t = 1)]
    wasserstein_p: u32,

    /// Output path (CSV for sweeps, JSON otherwise); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Dual-solver bracket tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,

    /// Policy JSON to evaluate (from solve/sample-solve).
    #[arg(long)]
    policy: Option<PathBuf>,
}

pub enum CliFailure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliFailure {
    fn from(err: anyhow::Error) -> Self {
        CliFailure::Runtime(err)
    }
}

fn usage(msg: impl Into<String>) -> CliFailure {
    CliFailure::Usage(msg.into())
}

/// Where the nominal model came from; the gambler's environment keeps its
/// config so test perturbations and interior averaging stay available.
enum ModelSource {
    Gamblers(GamblersConfig),
    File(TabularModel),
}

impl ModelSource {
    fn build(&self) -> Result<TabularModel, CliFailure> {
        match self {
            ModelSource::Gamblers(cfg) => {
                build_gamblers(cfg).map_err(|e| CliFailure::Runtime(e.into()))
            }
            ModelSource::File(model) => Ok(model.clone()),
        }
    }

    fn perturbed(&self, test_p: f64) -> Result<TabularModel, CliFailure> {
        match self {
            ModelSource::Gamblers(cfg) => {
                perturb(cfg, test_p).map_err(|e| CliFailure::Runtime(e.into()))
            }
            ModelSource::File(_) => Err(usage(
                "test-probability sweeps need the built-in gambler's environment (--env gamblers)",
            )),
        }
    }

    fn win_average(&self, phase1: &[f64]) -> f64 {
        match self {
            ModelSource::Gamblers(cfg) => interior_average(phase1, cfg.goal),
            ModelSource::File(_) => phase1.iter().sum::<f64>() / phase1.len().max(1) as f64,
        }
    }
}

/// Fully resolved experiment configuration; every sweep is a pure function
/// of this.
struct ExperimentConfig {
    source: ModelSource,
    divergences: Vec<DivergenceKind>,
    rho_grid: Vec<f64>,
    n_grid: Vec<usize>,
    test_p_grid: Vec<f64>,
    train_p: f64,
    seeds: Vec<u64>,
    wasserstein_p: u32,
    out: Option<PathBuf>,
    solver: SolverConfig,
    policy: Option<PathBuf>,
}

impl ExperimentConfig {
    fn resolve(args: &CommonArgs) -> Result<Self, CliFailure> {
        if args.tol <= 0.0 || !args.tol.is_finite() {
            return Err(usage(format!("--tol must be positive, got {}", args.tol)));
        }
        if !(0.0..=1.0).contains(&args.train_p) {
            return Err(usage(format!("--train-p {} outside [0, 1]", args.train_p)));
        }
        if args.wasserstein_p < 1 {
            return Err(usage("--wasserstein-p must be >= 1"));
        }
        let mut divergences = Vec::new();
        for name in &args.divergence {
            let kind = DivergenceKind::from_str(name).map_err(|e| usage(e.to_string()))?;
            if !divergences.contains(&kind) {
                divergences.push(kind);
            }
        }
        for &r in &args.rho {
            if r < 0.0 || !r.is_finite() {
                return Err(usage(format!("--rho {r} must be finite and nonnegative")));
            }
        }
        for &tp in &args.test_p {
            if !(0.0..=1.0).contains(&tp) {
                return Err(usage(format!("--test-p {tp} outside [0, 1]")));
            }
        }
        let mut seeds = args.seed.clone();
        let before = seeds.len();
        seeds.dedup();
        if seeds.len() != before {
            return Err(usage("--seed values must be distinct"));
        }
        let source = match &args.model {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading model {}", path.display()))
                    .map_err(CliFailure::Runtime)?;
                let model =
                    TabularModel::from_json(&text).map_err(|e| CliFailure::Runtime(e.into()))?;
                model
                    .validate()
                    .map_err(|e| CliFailure::Runtime(e.into()))?;
                ModelSource::File(model)
            }
            None if args.env == "gamblers" => ModelSource::Gamblers(GamblersConfig {
                heads_prob: args.train_p,
                ..GamblersConfig::default()
            }),
            None => return Err(usage(format!("unknown --env {:?}", args.env))),
        };
        Ok(Self {
            source,
            divergences,
            rho_grid: args.rho.clone(),
            n_grid: args.n.clone(),
            test_p_grid: args.test_p.clone(),
            train_p: args.train_p,
            seeds,
            wasserstein_p: args.wasserstein_p,
            out: args.out.clone(),
            solver: SolverConfig {
                tol: args.tol,
                ..SolverConfig::default()
            },
            policy: args.policy.clone(),
        })
    }

    fn spec(
        &self,
        kind: DivergenceKind,
        rho: f64,
        model: &TabularModel,
    ) -> Result<UncertaintySpec, CliFailure> {
        let spec = match kind {
            DivergenceKind::Tv => UncertaintySpec::tv(rho),
            DivergenceKind::Chi2 => UncertaintySpec::chi2(rho),
            DivergenceKind::Kl => UncertaintySpec::kl(rho),
            DivergenceKind::Wasserstein => UncertaintySpec::wasserstein(
                rho,
                self.wasserstein_p,
                DistanceMetric::line(model.num_states),
            ),
        };
        spec.map_err(|e| CliFailure::Runtime(e.into()))
    }

    fn require_divergences(&self) -> Result<(), CliFailure> {
        if self.divergences.is_empty() {
            return Err(usage("at least one --divergence is required"));
        }
        Ok(())
    }

    fn first_rho(&self, default: f64) -> f64 {
        self.rho_grid.first().copied().unwrap_or(default)
    }

    fn seeds_or_default(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![1, 2, 3, 4, 5]
        } else {
            self.seeds.clone()
        }
    }
}

/// Policy/value interchange: `policy` holds action ids, `values` decimals,
/// both indexed `[h][s]`.
#[derive(Debug, Serialize, Deserialize)]
struct PolicyValueJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<Vec<Vec<usize>>>,
    values: Vec<Vec<f64>>,
}

fn policy_to_ids(policy: &Policy, model: &TabularModel) -> Vec<Vec<usize>> {
    policy
        .decisions
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(s, &k)| model.actions[s][k])
                .collect()
        })
        .collect()
}

fn policy_from_ids(ids: &[Vec<usize>], model: &TabularModel) -> anyhow::Result<Policy> {
    let mut decisions = Vec::with_capacity(ids.len());
    for (h, row) in ids.iter().enumerate() {
        if row.len() != model.num_states {
            return Err(anyhow!(
                "policy phase {h} has {} states, model has {}",
                row.len(),
                model.num_states
            ));
        }
        let mut dec_row = Vec::with_capacity(row.len());
        for (s, id) in row.iter().enumerate() {
            let k = model.actions[s]
                .iter()
                .position(|a| a == id)
                .ok_or_else(|| anyhow!("action id {id} not available in state {s}"))?;
            dec_row.push(k);
        }
        decisions.push(dec_row);
    }
    Ok(Policy { decisions })
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), CliFailure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliFailure::Runtime),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Solve(args) => run_solve(&ExperimentConfig::resolve(&args)?, false),
        Command::SampleSolve(args) => run_solve(&ExperimentConfig::resolve(&args)?, true),
        Command::Evaluate(args) => run_evaluate(&ExperimentConfig::resolve(&args)?),
        Command::SweepN(args) => {
            let config = ExperimentConfig::resolve(&args)?;
            let result = run_sweep_n(&config)?;
            finish_sweep(&config, result)
        }
        Command::SweepRho(args) => {
            let config = ExperimentConfig::resolve(&args)?;
            let result = run_sweep_rho(&config)?;
            finish_sweep(&config, result)
        }
        Command::SweepTestP(args) => {
            let config = ExperimentConfig::resolve(&args)?;
            let result = run_sweep_test_p(&config)?;
            finish_sweep(&config, result)
        }
    }
}

fn run_solve(config: &ExperimentConfig, sampled: bool) -> Result<(), CliFailure> {
    config.require_divergences()?;
    let model = config.source.build()?;
    let kind = config.divergences[0];
    let rho = config.first_rho(0.2);
    // Zero radius is the nominal-expectation bypass: classical planning for
    // every divergence, including Wasserstein. A sampled run still estimates
    // the model first and plans classically on the estimate.
    let spec = if rho == 0.0 {
        UncertaintySpec::tv(0.0).map_err(|e| CliFailure::Runtime(e.into()))?
    } else {
        config.spec(kind, rho, &model)?
    };
    let plan = if sampled {
        let n = *config
            .n_grid
            .first()
            .ok_or_else(|| usage("sample-solve needs --n"))?;
        let seed = config.seeds_or_default()[0];
        let gm =
            GenerativeModel::new(model.clone(), seed).map_err(|e| CliFailure::Runtime(e.into()))?;
        let budget = SampleBudget::new(n).map_err(|e| CliFailure::Runtime(e.into()))?;
        rpvl(&gm, &budget, &spec, &config.solver).map_err(|e| CliFailure::Runtime(e.into()))?
    } else if rho == 0.0 {
        classical_dp(&model).map_err(|e| CliFailure::Runtime(e.into()))?
    } else {
        robust_dp(&model, &spec, &config.solver).map_err(|e| CliFailure::Runtime(e.into()))?
    };
    let json = PolicyValueJson {
        policy: Some(policy_to_ids(&plan.policy, &model)),
        values: plan.values.values.clone(),
    };
    let text = serde_json::to_string_pretty(&json).expect("serializable");
    write_output(&config.out, &text)?;
    eprintln!(
        "solved ({} inner evaluations, {:.1} ms)",
        plan.stats.total_evaluations,
        plan.stats.wall.as_secs_f64() * 1e3
    );
    Ok(())
}

fn run_evaluate(config: &ExperimentConfig) -> Result<(), CliFailure> {
    let path = config
        .policy
        .as_ref()
        .ok_or_else(|| usage("evaluate needs --policy"))?;
    let model = match config.test_p_grid.first() {
        Some(&tp) => config.source.perturbed(tp)?,
        None => config.source.build()?,
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading policy {}", path.display()))
        .map_err(CliFailure::Runtime)?;
    let parsed: PolicyValueJson = serde_json::from_str(&text)
        .context("policy JSON")
        .map_err(CliFailure::Runtime)?;
    let ids = parsed
        .policy
        .ok_or_else(|| usage("policy file has no `policy` key"))?;
    let policy = policy_from_ids(&ids, &model).map_err(CliFailure::Runtime)?;
    let values = evaluate_under(&policy, &model).map_err(|e| CliFailure::Runtime(e.into()))?;
    let json = PolicyValueJson {
        policy: None,
        values: values.values.clone(),
    };
    write_output(
        &config.out,
        &serde_json::to_string_pretty(&json).expect("serializable"),
    )
}

/// One learning run: phased value learning at budget `n`, with the gap
/// measured against the exact robust plan on the true nominal model.
#[allow(clippy::too_many_arguments)]
fn learning_row(
    config: &ExperimentConfig,
    truth: &TabularModel,
    kind: DivergenceKind,
    spec: &UncertaintySpec,
    vstar: &ValueFunction,
    n: usize,
    seed: u64,
) -> Result<SweepRow, CliFailure> {
    let start = Instant::now();
    let gm =
        GenerativeModel::new(truth.clone(), seed).map_err(|e| CliFailure::Runtime(e.into()))?;
    let budget = SampleBudget::new(n).map_err(|e| CliFailure::Runtime(e.into()))?;
    let learned =
        rpvl(&gm, &budget, spec, &config.solver).map_err(|e| CliFailure::Runtime(e.into()))?;
    let vpi = evaluate_robust(&learned.policy, truth, spec, &config.solver)
        .map_err(|e| CliFailure::Runtime(e.into()))?;
    let gap = suboptimality_gap(vstar, &vpi).map_err(|e| CliFailure::Runtime(e.into()))?;
    let nominal_values =
        evaluate_under(&learned.policy, truth).map_err(|e| CliFailure::Runtime(e.into()))?;
    let phase1 = nominal_values.values[0].clone();
    Ok(SweepRow {
        divergence: kind.as_str().to_string(),
        rho: spec.rho,
        n: n as u64,
        seed,
        test_p: config.train_p,
        gap,
        gap_normalized: 0.0,
        win_prob_avg: config.source.win_average(&phase1),
        win_prob_by_state: phase1,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Convergence of the learned policy as the sample budget grows.
fn run_sweep_n(config: &ExperimentConfig) -> Result<SweepResult, CliFailure> {
    config.require_divergences()?;
    let truth = config.source.build()?;
    let n_grid = if config.n_grid.is_empty() {
        vec![100, 300, 1000, 3000, 5000]
    } else {
        config.n_grid.clone()
    };
    let rho = config.first_rho(0.2);
    let seeds = config.seeds_or_default();

    let mut result = SweepResult::default();
    for &kind in &config.divergences {
        let spec = config.spec(kind, rho, &truth)?;
        let vstar = robust_dp(&truth, &spec, &config.solver)
            .map_err(|e| CliFailure::Runtime(e.into()))?
            .values;
        for &n in &n_grid {
            for &seed in &seeds {
                result
                    .rows
                    .push(learning_row(config, &truth, kind, &spec, &vstar, n, seed)?);
            }
        }
    }
    Ok(result)
}

/// Gap dependence on the uncertainty radius at a fixed sample budget.
fn run_sweep_rho(config: &ExperimentConfig) -> Result<SweepResult, CliFailure> {
    config.require_divergences()?;
    let truth = config.source.build()?;
    let rho_grid = if config.rho_grid.is_empty() {
        vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]
    } else {
        config.rho_grid.clone()
    };
    let n = config.n_grid.first().copied().unwrap_or(100);
    let seeds = config.seeds_or_default();

    let mut result = SweepResult::default();
    for &kind in &config.divergences {
        for &rho in &rho_grid {
            let spec = config.spec(kind, rho, &truth)?;
            let vstar = robust_dp(&truth, &spec, &config.solver)
                .map_err(|e| CliFailure::Runtime(e.into()))?
                .values;
            for &seed in &seeds {
                result
                    .rows
                    .push(learning_row(config, &truth, kind, &spec, &vstar, n, seed)?);
            }
        }
    }
    Ok(result)
}

/// Robustness of exact policies in perturbed test environments: trains the
/// non-robust baseline and one robust policy per divergence at the nominal
/// heads probability, then evaluates each across the test grid.
fn run_sweep_test_p(config: &ExperimentConfig) -> Result<SweepResult, CliFailure> {
    config.require_divergences()?;
    let truth = config.source.build()?;
    let rho = config.first_rho(0.2);
    let test_grid = if config.test_p_grid.is_empty() {
        vec![0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7]
    } else {
        config.test_p_grid.clone()
    };

    let mut policies: Vec<(String, f64, Policy)> = Vec::new();
    let baseline = classical_dp(&truth).map_err(|e| CliFailure::Runtime(e.into()))?;
    policies.push(("nonrobust".to_string(), 0.0, baseline.policy));
    for &kind in &config.divergences {
        let spec = config.spec(kind, rho, &truth)?;
        let plan =
            robust_dp(&truth, &spec, &config.solver).map_err(|e| CliFailure::Runtime(e.into()))?;
        policies.push((kind.as_str().to_string(), rho, plan.policy));
    }

    let mut result = SweepResult::default();
    for (name, rho, policy) in &policies {
        for &test_p in &test_grid {
            let start = Instant::now();
            let test_model = config.source.perturbed(test_p)?;
            let values =
                evaluate_under(policy, &test_model).map_err(|e| CliFailure::Runtime(e.into()))?;
            let phase1 = values.values[0].clone();
            result.rows.push(SweepRow {
                divergence: name.clone(),
                rho: *rho,
                n: 0,
                seed: 0,
                test_p,
                gap: 0.0,
                gap_normalized: 0.0,
                win_prob_avg: config.source.win_average(&phase1),
                win_prob_by_state: phase1,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    Ok(result)
}

fn finish_sweep(config: &ExperimentConfig, mut result: SweepResult) -> Result<(), CliFailure> {
    result.normalize_gaps();
    result.sort_rows();
    match &config.out {
        Some(path) => {
            emit_csv(&result, path)
                .with_context(|| format!("emitting {}", path.display()))
                .map_err(CliFailure::Runtime)?;
            emit_values_json(&result, path)
                .context("emitting per-state values")
                .map_err(CliFailure::Runtime)?;
            eprintln!(
                "{} rows -> {} ({:.1} ms solving)",
                result.rows.len(),
                path.display(),
                result.total_wall_ms()
            );
        }
        None => print!("{}", result.csv_string()),
    }
    Ok(())
}
