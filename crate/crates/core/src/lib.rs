//! Invertible coupling-block classifiers whose decision boundary can be
//! mapped exactly between the input and feature domains, with per-sample
//! explanations, dataset-level feature rankings and a regression harness for
//! checking selected feature subsets.

pub mod data;
pub mod error;
pub mod interpret;
pub mod io;
pub mod linalg;
pub mod net;
pub mod rng;
pub mod validation;

pub use error::{Error, ErrorKind, Result};
pub use linalg::{DenseMatrix, DenseVector};
pub use rng::SeededRng;
