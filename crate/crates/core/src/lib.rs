//! Adaptive action-grid tokenizer for 7-DoF robot actions.
//!
//! Continuous actions are normalized, the translation is converted to
//! spherical coordinates, and each of the six continuous axes is split into
//! bins of equal probability under a fitted Gaussian. One action step then
//! becomes three tokens: translation, rotation and gripper.
//!
//! The crate also carries the pieces around that codec:
//!
//! * [`artifact`] serializes a fitted codec bit-exactly,
//! * [`adapt`] re-targets a grid to a new action distribution and initializes
//!   the new token embeddings by trilinear interpolation,
//! * [`report`] measures quantization error and [`verify`] checks a grid's
//!   invariants,
//! * [`ego3d`] computes egocentric 3D position embeddings from depth maps.
//!
//! ```
//! use spatok::{fit_artifact, GridSpec, RepresentativeMode};
//! use spatok::synthetic::{gaussian_dataset, SyntheticConfig};
//!
//! let samples = gaussian_dataset(&SyntheticConfig::default(), 1_000, 0);
//! let art = fit_artifact(&samples, &GridSpec::default(), (0.01, 0.99), RepresentativeMode::TruncatedMean)?;
//! assert_eq!(art.grid.vocab_size(), 8194);
//!
//! let norm = spatok::normalize(&samples[0], &art.normalization);
//! let tokens = art.grid.encode(&norm);
//! let decoded = art.grid.decode(tokens)?;
//! assert_eq!(art.grid.encode(&decoded), tokens);
//! # Ok::<(), spatok::Error>(())
//! ```

// Negated float comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod artifact;
pub mod binfile;
pub mod cli;
pub mod ego3d;
pub mod error;
mod exact;
pub mod gaussian;
pub mod grid;
pub mod report;
pub mod stats;
pub mod synthetic;
pub mod tokens;
pub mod verify;

pub use adapt::{adapt_embeddings, trilinear_weights, AdaptationPlan, EmbeddingTable};
pub use artifact::{fit_artifact, GridArtifact};
pub use error::{Error, Result};
pub use gaussian::{gaussian_cdf, gaussian_ppf};
pub use grid::{
    build_action_grid, build_action_grid_with, build_axis_partition, digitize, ActionGrid, Axis, AxisPartition,
    GridSpec, RepresentativeMode, TokenTriple,
};
pub use report::{quantization_report, QuantizationReport};
pub use stats::{
    cartesian_to_polar, compute_normalizer, denormalize, fit_gaussians, load_dataset, load_dataset_file, normalize,
    polar_to_cartesian, ActionSample, GaussianParams, NormalizationSpec, PolarTranslation,
};
