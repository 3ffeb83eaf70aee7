//! Spectral Galerkin solver for the homogeneous FENE dumbbell Fokker–Planck
//! equation, plus the closure models that approximate its second moment.

pub mod error;
pub mod special;

pub use error::{Error, Result};
pub mod banded;
pub mod radial;
pub mod angular;
pub mod layout;
pub mod transform;
pub mod tensor;
pub mod solver;
pub mod field;
pub mod mms;
pub mod closures;
pub mod benchmark;
