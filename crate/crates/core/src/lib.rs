pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod families;
pub mod functional;
pub mod geometry;
pub mod linalg;
pub mod quad;

pub use error::{Result, WimError};
