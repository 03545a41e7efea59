//! Exact computations with decreasing rearrangements, Hardy-Littlewood-Polya
//! submajorization and orbits in symmetric function and sequence spaces.

pub mod concave;
pub mod error;
pub mod majorization;
pub mod operators;
pub mod orbit;
pub mod rational;
pub mod spaces;
pub mod stepfn;

pub use error::{Error, Result};
pub use rational::Rational;
