//! Joint sparse recovery from multiple measurement vectors.
//!
//! The crate provides the semi-supervised MUSIC solver ([`ss_music`]), plain
//! MUSIC, five comparison algorithms, a noisy-data front end and a seeded
//! Monte-Carlo harness for recovery experiments.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod noise;
pub mod solver;

#[cfg(test)]
mod testutil;

pub use error::{JsrError, Result};
pub use harness::{Algorithm, EnsembleSpec, SweepOptions, SweepResult, TrialRecord};
pub use linalg::{RealMatrix, SubspaceBasis};
pub use model::{AtomSet, Dictionary, JsrProblem, LabelConfig, MmvMatrix};
pub use noise::{ss_music_noisy, NoisyEstimate};
pub use solver::{music, ss_music, SolveResult, SsMusicConfig};
