mod support;

use kstep_core::criterion::{analytic_info, numeric_info};
use kstep_core::models::cem::{cem_nuisance, CemCriterion, CemVariant, KernelSpec};
use kstep_core::models::generate::{cem_exponential_eta0, cem_normal_eta0, generate_cem};
use kstep_core::rates::{kernel_rates, KernelRateInputs};
use kstep_core::{q, ProfiledCriterion, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{cem_nuisance_direct, simpson};

const THETA0: [f64; 2] = [1.0, -0.5];
const VARIANTS: [CemVariant; 2] = [CemVariant::ConditionalNormal, CemVariant::ConditionalExponential];

#[test]
fn nuisance_matches_direct_weighted_average() {
    let spec = KernelSpec::default();
    for variant in VARIANTS {
        let data = generate_cem(variant, 50, &THETA0, 11).unwrap();
        for z in [0.5, 0.05, 0.93] {
            for theta in [THETA0.to_vec(), vec![0.7, 0.1]] {
                let got = cem_nuisance(&data, &spec, &Vector::from_vec(theta.clone()), z).unwrap();
                let want = cem_nuisance_direct(&data, &spec, &theta, z);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{variant:?} z={z}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn gradient_matches_central_differences_at_random_points() {
    let spec = KernelSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for variant in VARIANTS {
        let data = generate_cem(variant, 50, &THETA0, 7).unwrap();
        let crit = CemCriterion::new(data, spec.clone()).unwrap();
        for _ in 0..10 {
            let theta = Vector::from_iterator(2, THETA0.iter().map(|t| t + rng.random_range(-0.3..0.3)));
            let g = crit.gradient(&theta).unwrap();
            let h = 1e-5;
            for j in 0..2 {
                let mut up = theta.clone();
                let mut down = theta.clone();
                up[j] += h;
                down[j] -= h;
                let fd = (crit.evaluate(&up).unwrap() - crit.evaluate(&down).unwrap()) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6, "{variant:?} coord {j}: {fd} vs {}", g[j]);
            }
        }
    }
}

#[test]
fn numeric_information_close_to_analytic() {
    let n = 50;
    let (g, _) = kernel_rates(&KernelRateInputs {
        alpha: q(1, 5),
        q: 28,
        epsilon: q(1, 600),
    })
    .unwrap();
    let bound = 10.0 * (n as f64).powf(-g.to_f64());
    let data = generate_cem(CemVariant::ConditionalNormal, n, &THETA0, 7).unwrap();
    let crit = CemCriterion::new(data, KernelSpec::default()).unwrap();
    let theta = Vector::from_row_slice(&THETA0);
    let t = (n as f64).powf(-1.0 / 8.0);
    let numeric = numeric_info(&crit, &theta, t).unwrap().as_matrix();
    let analytic = analytic_info(&crit, &theta).unwrap().as_matrix();
    let dev = (&numeric - &analytic).abs().max();
    assert!(dev <= bound, "max deviation {dev} exceeds {bound}");
}

#[test]
fn normalized_criterion_approaches_population_value() {
    let n = 2000;
    let spec = KernelSpec::default();
    // E log lik(θ0, η0) without the 2π constant
    let normal = -0.5 * (1.0 + simpson(|z| cem_normal_eta0(z).ln(), 0.0, 1.0, 200));
    let exponential = -1.0 - simpson(cem_exponential_eta0, 0.0, 1.0, 200);
    for (variant, population) in [
        (CemVariant::ConditionalNormal, normal),
        (CemVariant::ConditionalExponential, exponential),
    ] {
        let data = generate_cem(variant, n, &THETA0, 31).unwrap();
        let crit = CemCriterion::new(data, spec.clone()).unwrap();
        let value = crit.evaluate(&Vector::from_row_slice(&THETA0)).unwrap() / n as f64;
        assert!((value - population).abs() < 0.05, "{variant:?}: {value} vs {population}");
    }
}

#[test]
fn analytic_information_approaches_submodel_information() {
    let n = 1600;
    let reps = 4;
    let spec = KernelSpec::default();
    // W ~ N(0, I) independent of Z: E[WW'/η0(Z)] and E[WW'].
    let normal_scale = simpson(|z| 1.0 / cem_normal_eta0(z), 0.0, 1.0, 200);
    for (variant, scale) in [
        (CemVariant::ConditionalNormal, normal_scale),
        (CemVariant::ConditionalExponential, 1.0),
    ] {
        let mut avg = kstep_core::Matrix::zeros(2, 2);
        for rep in 0..reps {
            let data = generate_cem(variant, n, &THETA0, 500 + rep).unwrap();
            let crit = CemCriterion::new(data, spec.clone()).unwrap();
            avg += analytic_info(&crit, &Vector::from_row_slice(&THETA0)).unwrap().as_matrix();
        }
        avg /= reps as f64;
        let target = kstep_core::Matrix::identity(2, 2) * scale;
        let rel = (&avg - &target).norm() / target.norm();
        assert!(rel < 0.1, "{variant:?}: relative deviation {rel}, average {avg}");
    }
}
