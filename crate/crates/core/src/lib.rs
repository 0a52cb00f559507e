//! Linear and Birkhoff normalization about L4 of the photogravitational
//! restricted three-body problem with an oblate primary and radiation drag.

pub mod birkhoff;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod expansion;
pub mod linear_normal_form;
pub mod params;
pub mod poisson_series;
mod taylor;
pub mod verify;

pub use error::{Error, Result};
pub use params::{DerivedParams, PerturbationParams};
