//! K-step Newton estimation for semiparametric criteria.

pub mod criterion;
pub mod engine;
pub mod error;
pub mod fit;
pub mod init;
pub mod models;
pub mod rates;
pub mod rational;
pub mod sim;

pub use criterion::{Matrix, ProfiledCriterion, Vector};
pub use error::{Error, Result};
pub use rational::{q, Rational};
