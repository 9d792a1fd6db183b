//! Property tests for the worst-case expectation operators: the sandwich
//! bound, monotonicity in the radius, the sup-norm Lipschitz property,
//! translation equivariance, KL support behavior, and agreement between the
//! dual solvers and the independent primal oracles.

use proptest::prelude::*;

use rmdp::duals::{inner, inner_chi2, inner_kl, inner_tv, inner_wasserstein};
use rmdp::oracle::{oracle_simplex_grid, oracle_tv_primal};
use rmdp::{expectation, DistanceMetric, DivergenceKind, SolverConfig, UncertaintySpec};

const HBOUND: f64 = 60.0;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6..1.0f64, n).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        let mut p: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let fix: f64 = 1.0 - p[..p.len() - 1].iter().sum::<f64>();
        let last = p.len() - 1;
        p[last] = fix.max(0.0);
        p
    })
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..50.0f64, n)
}

fn spec_for(kind: DivergenceKind, rho: f64, n: usize) -> UncertaintySpec {
    match kind {
        DivergenceKind::Tv => UncertaintySpec::tv(rho).unwrap(),
        DivergenceKind::Chi2 => UncertaintySpec::chi2(rho).unwrap(),
        DivergenceKind::Kl => UncertaintySpec::kl(rho).unwrap(),
        DivergenceKind::Wasserstein => {
            UncertaintySpec::wasserstein(rho, 1, DistanceMetric::line(n)).unwrap()
        }
    }
}

const ALL_KINDS: [DivergenceKind; 4] = [
    DivergenceKind::Tv,
    DivergenceKind::Chi2,
    DivergenceKind::Kl,
    DivergenceKind::Wasserstein,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_between_min_and_nominal(
        (p, v) in (2usize..6).prop_flat_map(|n| (simplex(n), values(n))),
        rho in 0.01..1.5f64,
    ) {
        let nominal = expectation(&p, &v).unwrap();
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        for kind in ALL_KINDS {
            let spec = spec_for(kind, rho, p.len());
            let got = inner(&spec, &p, &v, HBOUND, &cfg()).unwrap().value;
            prop_assert!(got >= vmin - 1e-8, "{kind:?}: {got} < min {vmin}");
            prop_assert!(got <= nominal + 1e-8, "{kind:?}: {got} > nominal {nominal}");
        }
    }

    #[test]
    fn nonincreasing_in_radius(
        (p, v) in (2usize..6).prop_flat_map(|n| (simplex(n), values(n))),
        rho_lo in 0.01..0.7f64,
        bump in 0.01..0.8f64,
    ) {
        for kind in ALL_KINDS {
            let lo = inner(&spec_for(kind, rho_lo, p.len()), &p, &v, HBOUND, &cfg())
                .unwrap()
                .value;
            let hi = inner(&spec_for(kind, rho_lo + bump, p.len()), &p, &v, HBOUND, &cfg())
                .unwrap()
                .value;
            prop_assert!(hi <= lo + 1e-8, "{kind:?}: inner({}) = {hi} > inner({rho_lo}) = {lo}", rho_lo + bump);
        }
    }

    #[test]
    fn lipschitz_in_values(
        (p, v1, v2) in (2usize..6).prop_flat_map(|n| (simplex(n), values(n), values(n))),
        rho in 0.01..1.0f64,
    ) {
        let dist = v1
            .iter()
            .zip(&v2)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        let tight = SolverConfig { tol: 1e-12, ..SolverConfig::default() };
        for kind in ALL_KINDS {
            let spec = spec_for(kind, rho, p.len());
            let a = inner(&spec, &p, &v1, HBOUND, &tight).unwrap().value;
            let b = inner(&spec, &p, &v2, HBOUND, &tight).unwrap().value;
            prop_assert!(
                (a - b).abs() <= dist + 1e-9,
                "{kind:?}: |{a} - {b}| > {dist} + 1e-9"
            );
        }
    }

    #[test]
    fn translation_equivariance(
        (p, v) in (2usize..6).prop_flat_map(|n| (simplex(n), values(n))),
        rho in 0.05..1.0f64,
        shift in 0.0..5.0f64,
    ) {
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        for kind in ALL_KINDS {
            let spec = spec_for(kind, rho, p.len());
            let base = inner(&spec, &p, &v, HBOUND, &cfg()).unwrap().value;
            let moved = inner(&spec, &p, &shifted, HBOUND + shift, &cfg()).unwrap().value;
            prop_assert!(
                (moved - (base + shift)).abs() < 1e-6,
                "{kind:?}: inner(v + {shift}) = {moved} vs {} + {shift}",
                base
            );
        }
    }

    #[test]
    fn kl_never_below_support_minimum(
        (p, v) in (3usize..6).prop_flat_map(|n| (simplex(n), values(n))),
        rho in 0.01..3.0f64,
        dead in 0usize..3,
    ) {
        // Zero out one coordinate to exercise empirical-style supports.
        let mut p = p;
        let removed = p[dead];
        p[dead] = 0.0;
        let keep = 1.0 - removed;
        for x in &mut p {
            *x /= keep;
        }
        let support_min = p
            .iter()
            .zip(&v)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(_, vi)| *vi)
            .fold(f64::INFINITY, f64::min);
        let got = inner_kl(&p, &v, rho, HBOUND, &cfg()).unwrap().value;
        prop_assert!(got >= support_min - 1e-8, "{got} < support min {support_min}");
    }

    #[test]
    fn tv_dual_matches_greedy_primal(
        (p, v) in (2usize..9).prop_flat_map(|n| (simplex(n), values(n))),
        rho in 0.001..1.0f64,
    ) {
        let dual = inner_tv(&p, &v, rho, HBOUND, &cfg()).unwrap().value;
        let primal = oracle_tv_primal(&p, &v, rho).unwrap();
        prop_assert!((dual - primal).abs() <= 1e-8, "dual {dual} vs primal {primal}");
    }
}

proptest! {
    // The grid oracle is expensive; keep the fuzz budget small. The
    // acceptance suite runs the full pinned instance counts.
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn duals_match_grid_oracle_two_states(
        (p, v) in (2usize..3).prop_flat_map(|n| (simplex(n), values(n))),
        rho in 0.05..1.0f64,
    ) {
        let range = v
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-4 * range + 1e-6;
        let step = 1e-4;

        let chi2 = inner_chi2(&p, &v, rho, HBOUND, &cfg()).unwrap().value;
        let chi2_grid =
            oracle_simplex_grid(&UncertaintySpec::chi2(rho).unwrap(), &p, &v, step).unwrap();
        prop_assert!((chi2 - chi2_grid).abs() <= tol, "chi2 {chi2} vs {chi2_grid}");

        let kl = inner_kl(&p, &v, rho, HBOUND, &cfg()).unwrap().value;
        let kl_grid =
            oracle_simplex_grid(&UncertaintySpec::kl(rho).unwrap(), &p, &v, step).unwrap();
        prop_assert!((kl - kl_grid).abs() <= tol, "kl {kl} vs {kl_grid}");

        let metric = DistanceMetric::line(p.len());
        let w = inner_wasserstein(&p, &v, rho, 1, &metric, HBOUND, &cfg()).unwrap().value;
        let w_spec = UncertaintySpec::wasserstein(rho, 1, metric).unwrap();
        let w_grid = oracle_simplex_grid(&w_spec, &p, &v, step).unwrap();
        prop_assert!((w - w_grid).abs() <= tol, "wasserstein {w} vs {w_grid}");
    }
}
