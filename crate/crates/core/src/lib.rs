//! Measure-valued local functionals on finite convex functions.
//!
//! The crate evaluates Monge-Ampère type operators and their relatives on
//! symbolic convex functions on ℝⁿ (n <= 3), decomposes black-box
//! functionals into homogeneous and translative components, and runs
//! falsification suites for their structural properties.

pub mod convexfn;
pub mod decompose;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod linalg;
pub mod measure;
pub mod verify;

pub use error::{Error, Result};
