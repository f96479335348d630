//! Deterministic and statistical network calculus on piecewise-linear curves,
//! with trace analysis and a Monte-Carlo checker for the statistical bounds.

pub mod error;
pub mod scalar;
pub mod curve;
pub mod algebra;
pub mod catalog;
pub mod det;
pub mod stat;
pub mod trace;
pub mod sim;

pub use curve::{Curve, Segment};
pub use error::{CalcError, CurveError, SimError, TraceError};
pub use scalar::{Ext, Rational, Scalar};
