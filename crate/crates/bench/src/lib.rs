//! Fixtures shared by the benchmarks.

use kstep_core::models::cem::{CEMDataset, CemCriterion, CemVariant, KernelSpec};
use kstep_core::models::cox_cs::CSDataset;
use kstep_core::models::generate::{generate_cem, generate_cox_cs};

pub fn cox_data(n: usize) -> CSDataset {
    generate_cox_cs(n, &[0.5], 1).expect("cox fixture")
}

pub fn cem_data(n: usize) -> CEMDataset {
    generate_cem(CemVariant::ConditionalNormal, n, &[1.0, -0.5], 1).expect("cem fixture")
}

pub fn cem_criterion(n: usize) -> CemCriterion {
    CemCriterion::new(cem_data(n), KernelSpec::default()).expect("cem criterion")
}

/// Evenly spread design points on the unit interval.
pub fn design(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}
