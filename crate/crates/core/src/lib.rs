//! Numerical tools for Riesz characteristics, Riesz-kernel densities and
//! Perron-type harmonic functions attached to cone subequations.

pub mod error;
pub mod grid;
pub mod kernel;
pub mod solver;
pub mod subeq;
pub mod symmat;
pub mod valuecone;

pub use error::{Error, Result};
pub use subeq::{Gauge, SubequationKind, SubequationSpec};
pub use symmat::{SymMatrix, UnitVector};
