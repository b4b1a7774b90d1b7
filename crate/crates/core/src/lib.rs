//! Natural type selection for lossy source coding.
//!
//! The crate provides finite-order Markov sources, single-letter distortion
//! measures, lazily generated random codebooks with d-match search, the
//! stochastic NTS iterations, a deterministic rate-distortion oracle and the
//! sub-stream decomposition used to evaluate Markov codebooks.

pub mod codebook;
pub mod distortion;
pub mod experiment;
pub mod error;
pub mod info;
pub mod markov;
pub mod nts;
pub mod rd;
pub mod seed;
pub mod substream;

pub use error::{NtsError, Result};
