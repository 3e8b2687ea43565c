pub mod acoustic_model;
pub mod error;
pub mod kappa_bounds;
pub mod linalg;
pub mod perturbation_check;
pub mod profile;
pub mod quadrature;
pub mod spectral_model;
pub mod truncation_verify;

pub use error::{Error, Result};
