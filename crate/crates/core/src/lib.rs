//! Worst-case binary logistic regression datasets for deterministic
//! first-order methods.
//!
//! * [`wcgen`] builds the datasets and their `O(k)` matrix-vector products.
//! * [`logloss`] evaluates the loss, its gradient and the first-order oracle.
//! * [`analytic`] holds the closed-form optimum and the lower-bound formulas.
//! * [`optimizers`] runs GD, AGD, heavy ball and a span-violating probe.
//! * [`resist`] is the rotating adversary for methods outside the span class.
//! * [`bench`] drives the experiments behind the `hardlogit` binary.

pub mod analytic;
pub mod bench;
pub mod error;
pub mod linalg;
pub mod logloss;
pub mod optimizers;
pub mod resist;
pub mod wcgen;

pub use error::{Error, Result};
