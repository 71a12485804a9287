pub mod aoa;
pub mod csi;
pub mod entropy;
pub mod error;
pub mod locator;
pub mod prep;
pub mod sim;

pub use error::{Error, Result};
