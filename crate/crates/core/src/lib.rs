//! Left-ventricle segmentation in short-axis cardiac MRI.
//!
//! Slices are first classified as basal, mid-ventricular or apical by a
//! random forest over DAISY descriptors and a slice-position feature. Each
//! slice is then segmented by a local Gaussian distribution active contour
//! whose parameters depend on the predicted class.

pub mod class;
pub mod classifier;
pub mod error;
pub mod features;
pub mod filter;
pub mod grid;
pub mod lgdacm;
pub mod maskgen;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod scalar;
pub mod volume;

pub use class::SliceClass;
pub use error::{Error, ErrorKind, Result};
pub use grid::{BinaryMask, Grid};
pub use scalar::Real;

/// Concrete single-precision aliases.
pub type SliceImageF32 = volume::SliceImage<f32>;
pub type CmrVolumeF32 = volume::CmrVolume<f32>;
pub type FeatureVectorF32 = features::FeatureVector<f32>;
pub type RandomForestModelF32 = classifier::RandomForestModel<f32>;
pub type LevelSetFieldF32 = lgdacm::LevelSetField<f32>;
pub type StudyCaseF32 = pipeline::StudyCase<f32>;

/// Concrete double-precision aliases.
pub type SliceImageF64 = volume::SliceImage<f64>;
pub type CmrVolumeF64 = volume::CmrVolume<f64>;
pub type FeatureVectorF64 = features::FeatureVector<f64>;
pub type RandomForestModelF64 = classifier::RandomForestModel<f64>;
pub type LevelSetFieldF64 = lgdacm::LevelSetField<f64>;
pub type StudyCaseF64 = pipeline::StudyCase<f64>;
