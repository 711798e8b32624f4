pub mod cli;
pub mod dataset;
pub mod error;
pub mod evalsel;
pub mod experiment;
pub mod features;
pub mod forest;
pub mod gripper;
pub mod io;
pub mod pipeline;
pub mod presets;
pub mod rng;
pub mod scene;
pub mod serve;
pub mod tof;
pub mod zoo;

pub use error::{Error, Result};
