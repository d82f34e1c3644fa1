pub mod error;
pub mod gaussianize;
pub mod inference;
pub mod model;
pub mod mvn;
pub mod numeric;
pub mod par;
pub mod rng;
pub mod symfunc;
pub mod tvlab;

pub use error::{Error, Result};
