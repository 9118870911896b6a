//! Self-describing grid artifact: normalizer, fitted Gaussians, partitions and
//! token layout in one JSON document.
//!
//! Every real number is written with 17 significant digits, so a read followed
//! by a write reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{build_action_grid_with, ActionGrid, AxisPartition, GridSpec, RepresentativeMode, TokenLayout};
use crate::stats::{compute_normalizer, fit_gaussians, ActionSample, GaussianParams, NormalizationSpec};

pub const GRID_FORMAT: &str = "spatok-grid";
pub const GRID_FORMAT_VERSION: u32 = 1;

/// A complete codec instance: how to normalize raw actions and how to tokenize them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridArtifact {
    pub normalization: NormalizationSpec,
    pub gaussians: GaussianParams,
    pub grid: ActionGrid,
}

#[derive(Serialize, Deserialize)]
struct Partitions {
    theta: AxisPartition,
    phi: AxisPartition,
    r: AxisPartition,
    roll: AxisPartition,
    pitch: AxisPartition,
    yaw: AxisPartition,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    vocab_size: u32,
    grid_spec: GridSpec,
    representative: RepresentativeMode,
    layout: TokenLayout,
    normalization: NormalizationSpec,
    gaussians: GaussianParams,
    partitions: Partitions,
}

/// Fits normalizer and Gaussians on `samples` and builds the grid.
pub fn fit_artifact(
    samples: &[ActionSample],
    spec: &GridSpec,
    quantiles: (f64, f64),
    mode: RepresentativeMode,
) -> Result<GridArtifact> {
    let normalization = compute_normalizer(samples, quantiles.0, quantiles.1)?;
    let gaussians = fit_gaussians(samples, &normalization)?;
    let grid = build_action_grid_with(&gaussians, spec, mode)?;
    Ok(GridArtifact {
        normalization,
        gaussians,
        grid,
    })
}

impl GridArtifact {
    pub fn to_json(&self) -> Result<String> {
        let [theta, phi, r, roll, pitch, yaw] = self.grid.partitions.clone();
        let doc = Document {
            format: GRID_FORMAT.into(),
            version: GRID_FORMAT_VERSION,
            vocab_size: self.grid.vocab_size(),
            grid_spec: self.grid.spec,
            representative: self.grid.mode,
            layout: self.grid.layout,
            normalization: self.normalization.clone(),
            gaussians: self.gaussians.clone(),
            partitions: Partitions {
                theta,
                phi,
                r,
                roll,
                pitch,
                yaw,
            },
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != GRID_FORMAT {
            return Err(Error::Format(format!("not a grid artifact (format {:?})", doc.format)));
        }
        if doc.version != GRID_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported grid artifact version {} (expected {GRID_FORMAT_VERSION})",
                doc.version
            )));
        }
        doc.normalization.validate()?;
        let p = doc.partitions;
        let grid = ActionGrid::from_parts(
            doc.grid_spec,
            doc.representative,
            [p.theta, p.phi, p.r, p.roll, p.pitch, p.yaw],
        )?;
        if grid.layout != doc.layout {
            return Err(Error::Format("token layout does not match the grid spec".into()));
        }
        if grid.vocab_size() != doc.vocab_size {
            return Err(Error::Format(format!(
                "vocab_size {} does not match the grid spec ({})",
                doc.vocab_size,
                grid.vocab_size()
            )));
        }
        Ok(GridArtifact {
            normalization: doc.normalization,
            gaussians: doc.gaussians,
            grid,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::from(e).in_file(path))
    }

    /// SHA-256 of the serialized artifact, hex encoded.
    pub fn digest(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
