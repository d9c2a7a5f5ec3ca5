//! Exact verification of negative dependence in tournament score vectors.
//!
//! Tournament models are compiled into finite joint laws over exact
//! rationals ([`exactdist`], [`models`], [`staged`]); the [`depcheck`]
//! module then decides lower/upper orthant dependence and negative
//! association exhaustively, returning a checkable witness on failure.
//! [`montecarlo`] samples the same models for sizes beyond enumeration, and
//! [`scenario`] bundles the named end-to-end experiments.

pub mod config;
pub mod depcheck;
pub mod error;
pub mod exactdist;
pub mod gen;
pub mod models;
pub mod montecarlo;
pub mod rational;
pub mod report;
pub mod scenario;
pub mod staged;
pub mod table;

pub use depcheck::{CheckResult, Limits, Property, Verdict, Witness};
pub use error::{Error, Result};
pub use exactdist::{convolve, JointDist, OrthantMode, Outcome, DEFAULT_ATOM_BUDGET};
pub use rational::{q, Rational};
