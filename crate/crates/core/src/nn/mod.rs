//! Trainable parameters and everything that updates or stores them.

mod adam;
pub mod checkpoint;
mod layers;
mod params;

pub use adam::{adam_step, AdamState, OptimizerConfig};
pub use layers::{kaiming_uniform, linear, linear_forward};
pub use params::{average_weights, BoundParams, ParamSet};
