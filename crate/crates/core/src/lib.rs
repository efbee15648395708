//! Isolated-word recognition from lip images and speech.
//!
//! Visual words are described by Zernike moment magnitudes of a binarized
//! lip region, acoustic words by mel-frequency cepstral coefficients. Each
//! modality is projected into a PCA eigenspace and classified by the nearest
//! training projection.

pub mod classifier;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod media;
pub mod mfcc;
pub mod pca;
pub mod pipeline;
pub mod roi;
pub mod synth;
pub mod util;
pub mod zernike;

pub use error::{Error, Result};
