//! Differentially private release of k-way parities and marginals.
//!
//! The pipeline adds Gaussian noise to the weighted parity answers, projects
//! the noisy vector onto a scaled vector relaxation of the parity polytope
//! with Frank-Wolfe, and optionally compresses the result into a bit-bounded
//! synopsis. Boosting turns the average-error release into worst-case answers.

pub mod boosting;
pub mod error;
pub mod frank_wolfe;
pub mod geometry;
pub mod io;
pub mod noise;
pub mod projection;
pub mod queries;
pub mod rng;
pub mod sdp;
pub mod synopsis;

pub use error::{Error, Result};
