//! Linear latent-space brain decoding.
//!
//! The pipeline: latent face codes (built-in PCA codec or externally
//! supplied) become parametric regressors of an HRF-convolved GLM design;
//! a voxel-wise linear encoding model `W` is fitted from design to BOLD
//! and inverted to decode latent codes from new activity patterns.
//! Recognition, gender classification, variance partitioning and the
//! nonparametric test battery quantify the result, and a synthetic-subject
//! simulator provides ground truth for end-to-end validation.

pub mod decoder;
pub mod design;
pub mod error;
pub mod eval;
pub mod io;
pub mod latent;
mod rng;
pub mod sim;
pub mod stats;
pub mod voxels;

pub use error::{Error, Result};

pub use decoder::{BoldPatterns, DecodeResult, EncodingModel, GlmFitStats};
pub use design::{Condition, DesignMatrix, Hrf, Trial, TrialTable};
pub use eval::{RecognitionReport, VariancePartition};
pub use latent::{AttributeVector, LatentTable, PcaCodec};
pub use sim::{SimConfig, SimGroundTruth, SimOutput};
pub use stats::{TestMethod, TestResult};
pub use voxels::{Region, SegmentAxis, VoxelSet};

/// Dense double-precision matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense double-precision column vector.
pub type Vector = nalgebra::DVector<f64>;
