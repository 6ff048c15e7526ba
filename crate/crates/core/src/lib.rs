//! Lie groups of point and generalized equivalence transformations for
//! families of differential equations.

pub mod determining;
pub mod error;
pub mod flows;
pub mod linalg;
pub mod problem;
pub mod prolong;
pub mod report;
pub mod solver;
pub mod symbolic;
pub mod verify;

pub use error::{Error, Result};
