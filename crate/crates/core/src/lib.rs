//! Histopathology slide pipeline: tissue segmentation, patch extraction,
//! stain normalization, feature reduction, classic classifiers, and
//! evaluation, built around deterministic seeded runs.
//!
//! Numeric code is generic over the scalar type through [`num::Real`];
//! [`Scalar`] fixes the default precision used by the CLI.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod learn;
pub mod num;
pub mod pipeline;
pub mod pyramid;
pub mod raster;
pub mod rng;
pub mod segment;
pub mod stain;
pub mod synth;
pub mod tile;

/// Default scalar precision for pipeline runs.
pub type Scalar = f64;
