pub mod error;
pub mod evolution;
pub mod gates;
pub mod metrics;
pub mod protocol;
pub mod sweep;
pub mod tensor_core;

pub use error::{Error, Result};
