//! Rational noncommutative torus: twisted Laurent polynomials, (q,r)-Weyl
//! bundle representations, Hofstadter band structure, and lattice Chern
//! numbers for the classical and generalized TKNN equations.

pub mod algebra;
pub mod arithmetic;
pub mod chern;
pub mod error;
pub mod format;
pub mod representations;
pub mod spectral;

pub use error::{Error, Result};
