//! Samplers and estimators for SLE / Liouville quantum gravity experiments.

pub mod error;
pub mod field;
pub mod gmc;
pub mod loewner;
pub mod mot;
pub mod params;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use params::LqgParams;
