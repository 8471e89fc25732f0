//! Macro/femto cellular simulator with fractional frequency reuse in the
//! macro layer and load-spillage power control for femto links.

pub mod channel;
pub mod error;
pub mod harness;
pub mod femto_control;
pub mod macro_layer;
pub mod pipeline;
pub mod radio;
pub mod rate_model;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
