// BLAS/LAPACK for the interior-point solver's PSD cone.
extern crate openblas_src;

pub mod adaptive;
pub mod error;
pub mod icc;
pub mod linalg;
pub mod measure;
pub mod mle;
pub mod runner;
pub mod schemes;
pub mod sdp;
pub mod state;

pub use error::{Result, TomoError};
