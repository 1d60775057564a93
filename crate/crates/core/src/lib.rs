pub mod adapt;
pub mod assembly;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod mesh;
pub mod problems;
pub mod solve;
pub mod space;

pub use error::{Error, Result};
