//! Online selection with interdependent values: a single item, `n` agents
//! arriving one at a time, each holding a private non-negative signal while
//! every agent's value may depend on the whole signal profile.
//!
//! The crate provides:
//!
//! - [`valuations`]: signal profiles, the closed family of valuation forms,
//!   and empirical property checkers (monotone, subadditive, submodular,
//!   single-crossing);
//! - [`distributions`]: signal priors with seeded, stream-splittable
//!   randomness;
//! - [`instances`]: prophet / secretary instances, the named hard
//!   constructions, random benchmark suites, and dummy-agent padding;
//! - [`rules`]: the stopping rules (guarded threshold, randomized posted
//!   price, skip-then-best secretary rules, sample-bar mechanism) plus a
//!   naive threshold baseline;
//! - [`mechanisms`]: critical-value payments and exhaustive ex-post
//!   incentive-compatibility checks;
//! - [`oracles`]: exact enumeration and closed-form references;
//! - [`harness`]: Monte Carlo campaigns, ratio estimation, and the
//!   registered verification suites.

pub mod distributions;
pub mod error;
pub mod harness;
pub mod instances;
pub mod mechanisms;
pub mod oracles;
pub mod rules;
pub mod valuations;

pub use error::{Error, Result};
