//! Set-point regulation of linear time-invariant systems from the
//! asynchronous events of a dynamic vision sensor (DVS).
//!
//! The pipeline: a plant with pixel-wise luminosity outputs ([`plant`]), a
//! logarithmic event sensor ([`dvs`]), a zero-order-hold output estimator
//! with certified relative-error bounds ([`estimator`]), H-infinity output
//! feedback synthesis and event-threshold certification ([`synthesis`]),
//! and an exact closed-loop hybrid simulation ([`sim`]). [`config`],
//! [`pipeline`] and [`output`] tie them together for the command-line
//! driver.

pub mod linalg;
pub mod plant;
pub mod dvs;
pub mod estimator;
pub mod synthesis;
pub mod sim;
pub mod config;
pub mod pipeline;
pub mod output;
