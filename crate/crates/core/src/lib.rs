//! Invariance-constrained optimization over multi-environment linear
//! prediction problems.
//!
//! The crate provides the pieces of a small laboratory for studying
//! out-of-distribution generalization with linear predictors:
//!
//! * [`model`] — losses, link functions, predictors, and risk/accuracy
//!   evaluation over sampled data, exact discrete laws, and population
//!   moments;
//! * [`envgen`] — environment specifications, seeded samplers for the
//!   synthetic suites, closed-form moments, and dataset export;
//! * [`wave`] — the planar-wave image exporter;
//! * [`invariance`] — constraint residuals (per-environment and
//!   between-environment families) with exact Jacobians;
//! * [`optimize`] — penalty and augmented-Lagrangian training over
//!   full-batch gradient descent, plus landscape grids;
//! * [`oracle`] — closed-form solution sets, exact enumeration, brute-force
//!   constrained minimization, and the moment-rank verifier.
//!
//! All numerics are generic over the scalar type ([`scalar::Real`], `f32` or
//! `f64`); the `*64` aliases below fix the double-precision instantiations
//! the CLI uses.

pub mod envgen;
pub mod error;
pub mod invariance;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod scalar;
mod textio;
pub mod wave;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Weights64 = model::Weights<f64>;
pub type EnvSpec64 = envgen::EnvSpec<f64>;
pub type EnvSuite64 = envgen::EnvSuite<f64>;
pub type Dataset64 = envgen::Dataset<f64>;
pub type PopulationMoments64 = envgen::PopulationMoments<f64>;
pub type SuiteData64 = model::SuiteData<f64>;
pub type EnvData64 = model::EnvData<f64>;
pub type Constraint64 = invariance::Constraint<f64>;
pub type TrainConfig64 = optimize::TrainConfig<f64>;
pub type Trajectory64 = optimize::Trajectory<f64>;
pub type GridSpec64 = optimize::GridSpec<f64>;
pub type SolutionSet64 = oracle::SolutionSet<f64>;
pub type MomentMatrix64 = oracle::MomentMatrix<f64>;
pub type WaveImage64 = wave::WaveImage<f64>;
