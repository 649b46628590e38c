pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod model;
mod io;
pub mod nn;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
