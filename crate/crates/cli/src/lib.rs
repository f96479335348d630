//! Scenario files and the `analyze`, `simulate` and `sweep` commands.

pub mod analyze;
pub mod scenario;
pub mod simulate;

pub use analyze::{analyze, sweep, BoundRow, Param};
pub use scenario::Scenario;
pub use simulate::simulate;
