//! Data-poisoning attacks on a low-rank collaborative-filtering recommender.
//!
//! The crate covers the full pipeline: MovieLens-format ingestion and
//! experimental splits ([`dataset`]), the oblivious alternating-minimization
//! recommender ([`recommender`]), fake-profile generation that matches the
//! real rating distribution ([`generator`]), distributional
//! indistinguishability metrics ([`distmetrics`]), the adversarial intent
//! library ([`objectives`]), the zeroth-order projected-descent attacker
//! ([`attacker`]), and a config-driven experiment harness ([`harness`]).
//!
//! All continuous math is generic over [`scalar::Scalar`]; the `f64` aliases
//! below are what the CLI and harness use.

pub mod attacker;
pub mod dataset;
pub mod distmetrics;
pub mod error;
pub mod generator;
pub mod harness;
pub mod linalg;
pub mod objectives;
pub mod recommender;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar used by the CLI and the experiment harness.
pub type DefaultScalar = f64;

pub type FactorModel = recommender::FactorModel<DefaultScalar>;
pub type FactorModelF32 = recommender::FactorModel<f32>;
pub type TrainSet = recommender::TrainSet<DefaultScalar>;
pub type FakeProfileMatrix = generator::FakeProfileMatrix<DefaultScalar>;
pub type FakeProfileMatrixF32 = generator::FakeProfileMatrix<f32>;
pub type GeneratorModel = generator::GeneratorModel<DefaultScalar>;
pub type AttackTrace = attacker::AttackTrace<DefaultScalar>;
pub type AttackOutcome = attacker::AttackOutcome<DefaultScalar>;
pub type EigenSummary = distmetrics::EigenSummary<DefaultScalar>;
pub type ObjectiveValue = objectives::ObjectiveValue<DefaultScalar>;
