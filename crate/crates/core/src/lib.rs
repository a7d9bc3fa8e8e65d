//! Ray-based phase construction and enriched interior-penalty DG for the
//! high-frequency wave equation on the periodic unit square.

pub mod assembly;
pub mod driver;
pub mod error;
pub mod marching;
pub mod medium;
pub mod offline;
pub mod par;
pub mod quadrature;
pub mod reference;
pub mod separation;
pub mod tracker;

pub use error::{Error, Result};
pub use medium::{Medium, Mesh, Point};
