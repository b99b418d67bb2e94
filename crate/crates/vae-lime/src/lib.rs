//! VAE-LIME: local interpretability for black-box regressors.
//!
//! A variational autoencoder learns the data manifold; explanations for a
//! test instance are built by sampling its latent neighborhood, weighting
//! samples by the complement of the Gower distance, decoding, querying the
//! black box, and fitting a weighted linear surrogate whose coefficients are
//! the variable importances. A classic tabular LIME baseline (independent
//! Gaussian perturbations with an exponential kernel) is included for
//! head-to-head benchmarking.

pub mod blackbox;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod linalg;
pub mod nnet;
pub mod sampler;
pub mod surrogate;
pub mod vae;

pub use error::{Error, Result};
