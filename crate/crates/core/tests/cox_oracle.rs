mod support;

use std::fs::File;

use kstep_core::criterion::numeric_score;
use kstep_core::models::cox_cs::{cox_cs_loglik, cox_cs_npmle, CSDataset, CoxCurrentStatus};
use kstep_core::models::generate::generate_cox_cs;
use kstep_core::models::ModelDataset;
use kstep_core::{ProfiledCriterion, Vector};
use proptest::prelude::*;
use support::{cox_grid_oracle, CoxGridOptimum};

fn fixture(name: &str) -> CSDataset {
    let path = format!("{}/tests/assets/{name}", env!("CARGO_MANIFEST_DIR"));
    match ModelDataset::read_csv(File::open(path).unwrap()).unwrap() {
        ModelDataset::CoxCs(d) => d,
        other => panic!("unexpected model {:?}", other.kind()),
    }
}

fn oracle(data: &CSDataset, theta: f64) -> CoxGridOptimum {
    cox_grid_oracle(data, &[theta], 10.0, 1e-3, 1e-8)
}

fn th(v: f64) -> Vector {
    Vector::from_vec(vec![v])
}

fn check_against_oracle(data: &CSDataset, theta: f64) {
    let fit = cox_cs_npmle(data, &th(theta)).unwrap();
    let best = oracle(data, theta);
    assert!(
        (fit.loglik - best.loglik).abs() < 1e-6,
        "loglik {} vs oracle {}",
        fit.loglik,
        best.loglik
    );
    // The oracle can only approach the supremum from below.
    assert!(fit.loglik >= best.loglik - 1e-12);
    for (t, v) in best.times.iter().zip(&best.values) {
        let got = fit.hazard.evaluate(*t);
        assert!((got - v).abs() < 1e-4, "hazard at {t}: {got} vs oracle {v}");
    }
}

#[test]
fn npmle_matches_grid_oracle_on_fixture() {
    check_against_oracle(&fixture("cox_n4.csv"), 0.5);
}

#[test]
fn npmle_matches_grid_oracle_with_tied_times() {
    let data = fixture("cox_n4_ties.csv");
    for theta in [-0.4, 0.0, 0.5] {
        check_against_oracle(&data, theta);
    }
}

#[test]
fn two_point_boundary_solution() {
    let data = CSDataset::new(vec![1.0, 2.0], vec![false, true], vec![vec![0.0], vec![0.0]]).unwrap();
    let fit = cox_cs_npmle(&data, &th(0.0)).unwrap();
    let best = cox_grid_oracle(&data, &[0.0], 20.0, 0.01, 0.01);
    assert!(fit.boundary);
    assert_eq!(fit.hazard.evaluate(1.0), 0.0);
    assert!(fit.hazard.evaluate(2.0).is_infinite());
    assert_eq!(best.values[0], 0.0);
    assert_eq!(best.values[1], 20.0);
    assert!((fit.loglik - best.loglik).abs() < 1e-6);
}

#[test]
fn criterion_order_matches_oracle() {
    let data = fixture("cox_n4.csv");
    let crit = CoxCurrentStatus::new(data.clone()).unwrap();
    let thetas = [-1.0, -0.2, 0.5, 1.3];
    for a in thetas {
        for b in thetas {
            let (oa, ob) = (oracle(&data, a).loglik, oracle(&data, b).loglik);
            if (oa - ob).abs() < 1e-5 {
                continue;
            }
            let (ca, cb) = (crit.evaluate(&th(a)).unwrap(), crit.evaluate(&th(b)).unwrap());
            assert_eq!(oa < ob, ca < cb, "theta {a} vs {b}");
        }
    }
}

#[test]
fn numeric_score_matches_oracle_difference_quotient() {
    let data = fixture("cox_n4.csv");
    let crit = CoxCurrentStatus::new(data.clone()).unwrap();
    let s = 0.05;
    let got = numeric_score(&crit, &th(0.0), s).unwrap().vector[0];
    let expected = (oracle(&data, s).loglik - oracle(&data, 0.0).loglik) / (4.0 * s);
    assert!((got - expected).abs() < 1e-4, "{got} vs {expected}");
}

#[test]
fn loglik_at_fitted_hazard_is_reported_value() {
    let data = generate_cox_cs(300, &[0.5], 21).unwrap();
    let fit = cox_cs_npmle(&data, &th(0.3)).unwrap();
    let direct = cox_cs_loglik(&data, &th(0.3), &fit.hazard);
    assert!((direct - fit.loglik).abs() < 1e-9 * direct.abs().max(1.0));
}

fn permuted(data: &CSDataset, perm: &[usize]) -> CSDataset {
    CSDataset::new(
        perm.iter().map(|&i| data.y[i]).collect(),
        perm.iter().map(|&i| data.delta[i]).collect(),
        perm.iter().map(|&i| data.z[i].clone()).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evaluate_is_permutation_invariant(
        seed in 0u64..1000,
        theta in -1.5f64..1.5,
        perm in Just((0..60).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let data = generate_cox_cs(60, &[0.5], seed).unwrap();
        let a = CoxCurrentStatus::new(data.clone()).unwrap().evaluate(&th(theta)).unwrap();
        let b = CoxCurrentStatus::new(permuted(&data, &perm)).unwrap().evaluate(&th(theta)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn npmle_is_monotone_and_beats_perturbations(
        seed in 0u64..1000,
        theta in -1.5f64..1.5,
        bump in 0.01f64..0.5,
        at in 0usize..60,
    ) {
        let data = generate_cox_cs(60, &[0.5], seed).unwrap();
        let fit = cox_cs_npmle(&data, &th(theta)).unwrap();
        prop_assert!(fit.hazard.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(fit.hazard.values.iter().all(|v| *v >= 0.0));
        // Raising the hazard from any knot onwards keeps it monotone, so it
        // cannot improve the likelihood.
        let finite: Vec<usize> = (0..fit.hazard.values.len())
            .filter(|&j| fit.hazard.values[j].is_finite())
            .collect();
        prop_assume!(!finite.is_empty());
        let from = finite[at % finite.len()];
        let mut up = fit.hazard.clone();
        for v in up.values.iter_mut().skip(from) {
            *v += bump;
        }
        prop_assert!(cox_cs_loglik(&data, &th(theta), &up) <= fit.loglik + 1e-9);
        let mut down = fit.hazard.clone();
        for v in down.values.iter_mut().take(from + 1) {
            *v = (*v - bump).max(0.0);
        }
        prop_assert!(cox_cs_loglik(&data, &th(theta), &down) <= fit.loglik + 1e-9);
    }
}
