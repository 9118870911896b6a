//! Quantization error of the codec on a dataset.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ActionGrid;
use crate::stats::{normalize, ActionSample, NormalizationSpec};

pub const CONTINUOUS_AXES: [&str; 6] = ["x", "y", "z", "roll", "pitch", "yaw"];

/// Error statistics of one normalized action component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisError {
    pub axis: &'static str,
    pub mse: f64,
    pub max_abs_error: f64,
    pub max_sq_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationReport {
    pub samples: usize,
    pub vocab_size: u32,
    /// Errors in normalized units for x, y, z, roll, pitch, yaw.
    pub axes: Vec<AxisError>,
    pub grip_mse: f64,
    /// Number of times each token ID was emitted.
    pub occupancy: Vec<u64>,
}

impl QuantizationReport {
    pub fn mse(&self) -> [f64; 6] {
        std::array::from_fn(|i| self.axes[i].mse)
    }

    /// Token IDs that were used at least once.
    pub fn used_tokens(&self) -> usize {
        self.occupancy.iter().filter(|&&c| c > 0).count()
    }
}

/// Compares every normalized action with `decode(encode(action))`.
pub fn quantization_report(
    samples: &[ActionSample],
    spec: &NormalizationSpec,
    grid: &ActionGrid,
) -> Result<QuantizationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum_sq = [0.0; 6];
    let mut max_abs = [0.0f64; 6];
    let mut grip_sq = 0.0;
    let mut occupancy = vec![0u64; grid.vocab_size() as usize];
    for s in samples {
        let a = normalize(s, spec);
        let t = grid.encode(&a);
        let d = grid.decode(t)?;
        for i in 0..6 {
            let e = d[i] - a[i];
            sum_sq[i] += e * e;
            max_abs[i] = max_abs[i].max(e.abs());
        }
        grip_sq += (d[6] - a[6]).powi(2);
        for id in t.to_array() {
            occupancy[id as usize] += 1;
        }
    }
    let n = samples.len() as f64;
    let axes = CONTINUOUS_AXES
        .iter()
        .enumerate()
        .map(|(i, &axis)| AxisError {
            axis,
            mse: sum_sq[i] / n,
            max_abs_error: max_abs[i],
            max_sq_error: max_abs[i] * max_abs[i],
        })
        .collect();
    Ok(QuantizationReport {
        samples: samples.len(),
        vocab_size: grid.vocab_size(),
        axes,
        grip_mse: grip_sq / n,
        occupancy,
    })
}
