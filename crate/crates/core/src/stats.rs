//! Episode ingestion, action normalization, polar translation and per-axis
//! Gaussian fitting.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clipping quantiles for [`compute_normalizer`].
pub const DEFAULT_QUANTILES: (f64, f64) = (0.01, 0.99);
/// Half-width applied to a variable whose quantile range collapses to a point.
pub const DEGENERATE_WIDENING: f64 = 1e-6;
/// Lower bound on every fitted standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Below this magnitude polar angles are undefined and reported as zero.
pub const POLAR_EPS: f64 = 1e-9;

/// One 7-DoF delta action step.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    pub episode_id: String,
    pub step: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub grip: f64,
}

impl ActionSample {
    pub fn new(episode_id: impl Into<String>, step: u64, action: [f64; 7]) -> Self {
        let [x, y, z, roll, pitch, yaw, grip] = action;
        ActionSample {
            episode_id: episode_id.into(),
            step,
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
            grip,
        }
    }

    /// The action in `x, y, z, roll, pitch, yaw, grip` order.
    pub fn action(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw, self.grip]
    }

    fn continuous(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }
}

/// Reads line-delimited episode records.
///
/// Each non-empty line is an object with `episode_id` (string), `step`
/// (non-negative integer) and `action` (seven numbers: x, y, z, roll, pitch,
/// yaw, grip). Blank lines are skipped; line numbers in errors are 1-based.
pub fn load_dataset<R: BufRead>(reader: R) -> Result<Vec<ActionSample>> {
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(parse_record(&line, idx + 1)?);
    }
    Ok(samples)
}

pub fn load_dataset_file(path: impl AsRef<Path>) -> Result<Vec<ActionSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    load_dataset(BufReader::new(file)).map_err(|e| e.in_file(path))
}

fn parse_record(text: &str, line: usize) -> Result<ActionSample> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        line,
        message: "record is not an object".into(),
    })?;
    let field = |name: &'static str| obj.get(name).ok_or(Error::MissingField { line, field: name });
    let parse_err = |message: String| Error::Parse { line, message };

    let episode_id = field("episode_id")?
        .as_str()
        .ok_or_else(|| parse_err("`episode_id` must be a string".into()))?
        .to_owned();
    let step = field("step")?
        .as_u64()
        .ok_or_else(|| parse_err("`step` must be a non-negative integer".into()))?;
    let raw = field("action")?
        .as_array()
        .ok_or_else(|| parse_err("`action` must be an array".into()))?;
    if raw.len() != 7 {
        return Err(parse_err(format!("`action` must hold 7 numbers, found {}", raw.len())));
    }
    const NAMES: [&str; 7] = ["x", "y", "z", "roll", "pitch", "yaw", "grip"];
    let mut action = [0.0; 7];
    for (slot, (v, name)) in action.iter_mut().zip(raw.iter().zip(NAMES)) {
        *slot = v
            .as_f64()
            .ok_or_else(|| parse_err(format!("action component `{name}` is not a number: {v}")))?;
        if !slot.is_finite() {
            return Err(Error::Validation {
                line,
                message: format!("action component `{name}` is not finite"),
            });
        }
    }
    if !(0.0..=1.0).contains(&action[6]) {
        return Err(Error::Validation {
            line,
            message: format!("grip {} outside [0, 1]", action[6]),
        });
    }
    Ok(ActionSample::new(episode_id, step, action))
}

/// Raw-unit clipping interval of one action variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(with = "crate::exact")]
    pub lo: f64,
    #[serde(with = "crate::exact")]
    pub hi: f64,
}

impl Bounds {
    pub fn normalize(&self, v: f64) -> f64 {
        (2.0 * (v - self.lo) / (self.hi - self.lo) - 1.0).clamp(-1.0, 1.0)
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.lo + (v + 1.0) * (self.hi - self.lo) / 2.0
    }
}

/// Per-variable affine map from raw action units onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    #[serde(with = "crate::exact")]
    pub q_low: f64,
    #[serde(with = "crate::exact")]
    pub q_high: f64,
    pub x: Bounds,
    pub y: Bounds,
    pub z: Bounds,
    pub roll: Bounds,
    pub pitch: Bounds,
    pub yaw: Bounds,
}

impl NormalizationSpec {
    /// Bounds in `x, y, z, roll, pitch, yaw` order.
    pub fn bounds(&self) -> [Bounds; 6] {
        [self.x, self.y, self.z, self.roll, self.pitch, self.yaw]
    }

    pub fn from_bounds(q_low: f64, q_high: f64, b: [Bounds; 6]) -> Result<Self> {
        let [x, y, z, roll, pitch, yaw] = b;
        let spec = NormalizationSpec {
            q_low,
            q_high,
            x,
            y,
            z,
            roll,
            pitch,
            yaw,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        check_quantiles(self.q_low, self.q_high)?;
        for b in self.bounds() {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
                return Err(Error::InvalidArgument(format!(
                    "normalization bounds [{}, {}] are not a proper interval",
                    b.lo, b.hi
                )));
            }
        }
        Ok(())
    }
}

fn check_quantiles(q_low: f64, q_high: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q_low) && (0.0..=1.0).contains(&q_high) && q_low < q_high {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "quantiles must satisfy 0 <= q_low < q_high <= 1, got {q_low}, {q_high}"
        )))
    }
}

/// Linear-interpolation quantile of an ascending slice.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Empirical `q_low` / `q_high` quantiles of every continuous variable.
pub fn compute_normalizer(samples: &[ActionSample], q_low: f64, q_high: f64) -> Result<NormalizationSpec> {
    check_quantiles(q_low, q_high)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut bounds = [Bounds { lo: 0.0, hi: 0.0 }; 6];
    let mut column = Vec::with_capacity(samples.len());
    for (var, b) in bounds.iter_mut().enumerate() {
        column.clear();
        column.extend(samples.iter().map(|s| s.continuous()[var]));
        column.sort_by(f64::total_cmp);
        let (mut lo, mut hi) = (sorted_quantile(&column, q_low), sorted_quantile(&column, q_high));
        if lo >= hi {
            let centre = lo;
            lo = centre - DEGENERATE_WIDENING;
            hi = centre + DEGENERATE_WIDENING;
        }
        *b = Bounds { lo, hi };
    }
    NormalizationSpec::from_bounds(q_low, q_high, bounds)
}

/// Maps the six continuous variables onto `[-1, 1]`; grip passes through.
pub fn normalize(sample: &ActionSample, spec: &NormalizationSpec) -> [f64; 7] {
    let mut out = [0.0; 7];
    for ((o, v), b) in out.iter_mut().zip(sample.continuous()).zip(spec.bounds()) {
        *o = b.normalize(v);
    }
    out[6] = sample.grip;
    out
}

/// Inverse of [`normalize`] on `[lo, hi]`; values outside `[-1, 1]` extrapolate linearly.
pub fn denormalize(v: &[f64; 7], spec: &NormalizationSpec) -> [f64; 7] {
    let mut out = [0.0; 7];
    for ((o, &x), b) in out.iter_mut().zip(v.iter()).zip(spec.bounds()) {
        *o = b.denormalize(x);
    }
    out[6] = v[6];
    out
}

/// Translation in spherical form: azimuth, inclination, radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarTranslation {
    pub phi: f64,
    pub theta: f64,
    pub r: f64,
}

pub fn cartesian_to_polar(x: f64, y: f64, z: f64) -> PolarTranslation {
    let r = (x * x + y * y + z * z).sqrt();
    // atan2 form of arccos(z / r), well conditioned near the poles.
    let theta = if r > POLAR_EPS { x.hypot(y).atan2(z) } else { 0.0 };
    let phi = if x.hypot(y) > POLAR_EPS {
        let a = y.atan2(x);
        // atan2 may return -pi for y = -0.0; keep the half-open range (-pi, pi].
        if a <= -PI {
            PI
        } else {
            a
        }
    } else {
        0.0
    };
    PolarTranslation { phi, theta, r }
}

pub fn polar_to_cartesian(p: PolarTranslation) -> [f64; 3] {
    let (st, ct) = p.theta.sin_cos();
    let (sp, cp) = p.phi.sin_cos();
    [p.r * st * cp, p.r * st * sp, p.r * ct]
}

/// Mean and standard deviation of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisGaussian {
    #[serde(with = "crate::exact")]
    pub mu: f64,
    #[serde(with = "crate::exact")]
    pub sigma: f64,
}

/// Diagonal Gaussian fitted to normalized actions, per grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub theta: AxisGaussian,
    pub phi: AxisGaussian,
    pub r: AxisGaussian,
    pub roll: AxisGaussian,
    pub pitch: AxisGaussian,
    pub yaw: AxisGaussian,
    pub sample_count: u64,
}

impl GaussianParams {
    pub fn get(&self, axis: crate::grid::Axis) -> AxisGaussian {
        use crate::grid::Axis;
        match axis {
            Axis::Theta => self.theta,
            Axis::Phi => self.phi,
            Axis::R => self.r,
            Axis::Roll => self.roll,
            Axis::Pitch => self.pitch,
            Axis::Yaw => self.yaw,
        }
    }

    /// Builds parameters from per-axis Gaussians in [`crate::grid::Axis::ALL`] order.
    pub fn from_axes(axes: [AxisGaussian; 6], sample_count: u64) -> Self {
        let [theta, phi, r, roll, pitch, yaw] = axes;
        GaussianParams {
            theta,
            phi,
            r,
            roll,
            pitch,
            yaw,
            sample_count,
        }
    }
}

/// Normalized action projected onto the six grid axes, in
/// [`crate::grid::Axis::ALL`] order (theta, phi, r, roll, pitch, yaw).
pub fn grid_coordinates(norm: &[f64; 7]) -> [f64; 6] {
    let p = cartesian_to_polar(norm[0], norm[1], norm[2]);
    [p.theta, p.phi, p.r, norm[3], norm[4], norm[5]]
}

/// Population mean and standard deviation per grid axis.
///
/// Each axis is summed in sorted order so the result does not depend on the
/// order of `samples`.
pub fn fit_gaussians(samples: &[ActionSample], spec: &NormalizationSpec) -> Result<GaussianParams> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let coords: Vec<[f64; 6]> = samples.iter().map(|s| grid_coordinates(&normalize(s, spec))).collect();
    let n = coords.len() as f64;
    let mut axes = [AxisGaussian { mu: 0.0, sigma: 0.0 }; 6];
    let mut column = Vec::with_capacity(coords.len());
    for (a, out) in axes.iter_mut().enumerate() {
        column.clear();
        column.extend(coords.iter().map(|c| c[a]));
        column.sort_by(f64::total_cmp);
        let mu = column.iter().sum::<f64>() / n;
        let mut dev: Vec<f64> = column.iter().map(|v| (v - mu) * (v - mu)).collect();
        dev.sort_by(f64::total_cmp);
        let var = dev.iter().sum::<f64>() / n;
        *out = AxisGaussian {
            mu,
            sigma: var.sqrt().max(SIGMA_FLOOR),
        };
    }
    Ok(GaussianParams::from_axes(axes, samples.len() as u64))
}
