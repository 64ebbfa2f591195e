pub mod error;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
pub mod data;
pub mod curriculum;
pub mod mixup;
pub mod adaptation;
pub mod experiment;
