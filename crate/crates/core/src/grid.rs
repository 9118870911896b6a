//! Equal-probability action grids and the three-token action codec.
//!
//! Every axis is split into bins of equal mass under its fitted Gaussian,
//! truncated to the axis range. Translation bins (theta, phi, r) and rotation
//! bins (roll, pitch, yaw) are each flattened row-major into one block of token
//! IDs; the vocabulary is laid out as
//!
//! ```text
//! [0, M_trans)                      translation
//! [M_trans, M_trans + M_rot)        rotation
//! M_trans + M_rot + {0, 1}          gripper closed / open
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{bisect, std_cdf, std_interval_mass, std_sf, truncated_mean};
use crate::stats::{grid_coordinates, polar_to_cartesian, GaussianParams, PolarTranslation};

/// Number of gripper tokens.
pub const GRIPPER_TOKENS: u32 = 2;
/// Grip values strictly above this threshold encode as "open".
pub const GRIP_THRESHOLD: f64 = 0.5;

/// The six discretized axes, in linearization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Theta,
    Phi,
    R,
    Roll,
    Pitch,
    Yaw,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::Theta, Axis::Phi, Axis::R, Axis::Roll, Axis::Pitch, Axis::Yaw];
    pub const TRANSLATION: [Axis; 3] = [Axis::Theta, Axis::Phi, Axis::R];
    pub const ROTATION: [Axis; 3] = [Axis::Roll, Axis::Pitch, Axis::Yaw];

    /// Fixed value range of the axis in normalized / polar units.
    pub fn range(self) -> (f64, f64) {
        match self {
            Axis::Theta => (0.0, PI),
            Axis::Phi => (-PI, PI),
            Axis::R => (0.0, 3f64.sqrt()),
            Axis::Roll | Axis::Pitch | Axis::Yaw => (-1.0, 1.0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Theta => "theta",
            Axis::Phi => "phi",
            Axis::R => "r",
            Axis::Roll => "roll",
            Axis::Pitch => "pitch",
            Axis::Yaw => "yaw",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bin counts per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m_phi: u32,
    pub m_theta: u32,
    pub m_r: u32,
    pub m_roll: u32,
    pub m_pitch: u32,
    pub m_yaw: u32,
}

impl Default for GridSpec {
    /// 16 inclination, 32 azimuth and 8 radius bins; 16 bins per rotation axis.
    fn default() -> Self {
        GridSpec {
            m_phi: 32,
            m_theta: 16,
            m_r: 8,
            m_roll: 16,
            m_pitch: 16,
            m_yaw: 16,
        }
    }
}

impl GridSpec {
    /// Every axis split into `m` bins.
    pub fn uniform(m: u32) -> Self {
        GridSpec {
            m_phi: m,
            m_theta: m,
            m_r: m,
            m_roll: m,
            m_pitch: m,
            m_yaw: m,
        }
    }

    pub fn bins(&self, axis: Axis) -> u32 {
        match axis {
            Axis::Theta => self.m_theta,
            Axis::Phi => self.m_phi,
            Axis::R => self.m_r,
            Axis::Roll => self.m_roll,
            Axis::Pitch => self.m_pitch,
            Axis::Yaw => self.m_yaw,
        }
    }

    pub fn trans_tokens(&self) -> u64 {
        self.m_theta as u64 * self.m_phi as u64 * self.m_r as u64
    }

    pub fn rot_tokens(&self) -> u64 {
        self.m_roll as u64 * self.m_pitch as u64 * self.m_yaw as u64
    }

    /// Total vocabulary size `M_trans + M_rot + 2`.
    pub fn vocab_size(&self) -> u64 {
        self.trans_tokens() + self.rot_tokens() + GRIPPER_TOKENS as u64
    }

    pub fn validate(&self) -> Result<()> {
        if Axis::ALL.iter().any(|&a| self.bins(a) == 0) {
            return Err(Error::InvalidArgument("every axis needs at least one bin".into()));
        }
        if self.vocab_size() > u32::MAX as u64 {
            return Err(Error::InvalidArgument(format!(
                "vocabulary of {} tokens does not fit 32-bit token IDs",
                self.vocab_size()
            )));
        }
        Ok(())
    }
}

/// Parses `"mphi,mtheta,mr,mroll,mpitch,myaw"`.
impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("grid spec {s:?}: {e}")))?;
        let [m_phi, m_theta, m_r, m_roll, m_pitch, m_yaw] = parts[..] else {
            return Err(Error::InvalidArgument(format!(
                "grid spec {s:?} must list 6 bin counts (phi,theta,r,roll,pitch,yaw)"
            )));
        };
        let spec = GridSpec {
            m_phi,
            m_theta,
            m_r,
            m_roll,
            m_pitch,
            m_yaw,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.m_phi, self.m_theta, self.m_r, self.m_roll, self.m_pitch, self.m_yaw
        )
    }
}

/// How a bin is mapped back to a single value when decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentativeMode {
    /// Conditional mean of the truncated Gaussian within the bin.
    #[default]
    #[serde(rename = "truncmean")]
    TruncatedMean,
    Midpoint,
}

impl FromStr for RepresentativeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncmean" => Ok(RepresentativeMode::TruncatedMean),
            "midpoint" => Ok(RepresentativeMode::Midpoint),
            _ => Err(Error::InvalidArgument(format!(
                "representative mode must be `truncmean` or `midpoint`, got {s:?}"
            ))),
        }
    }
}

/// Equal-mass split of one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisPartition {
    #[serde(with = "crate::exact")]
    pub mu: f64,
    #[serde(with = "crate::exact")]
    pub sigma: f64,
    /// `M + 1` ascending edges from the range minimum to the range maximum.
    #[serde(with = "crate::exact::vec")]
    pub boundaries: Vec<f64>,
    /// One strictly interior value per bin.
    #[serde(with = "crate::exact::vec")]
    pub representatives: Vec<f64>,
}

impl AxisPartition {
    pub fn bins(&self) -> usize {
        self.representatives.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.boundaries[0],
            *self.boundaries.last().expect("non-empty boundaries"),
        )
    }

    /// Structural invariants: strictly increasing edges, interior representatives.
    pub fn validate(&self) -> Result<()> {
        let m = self.representatives.len();
        if m == 0 || self.boundaries.len() != m + 1 {
            return Err(Error::Format(format!(
                "partition has {} boundaries for {} representatives",
                self.boundaries.len(),
                m
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Format(format!("partition sigma {} is not positive", self.sigma)));
        }
        for (i, w) in self.boundaries.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(Error::Format(format!("boundaries not strictly increasing at bin {i}")));
            }
            let rep = self.representatives[i];
            if !(w[0] < rep && rep < w[1]) {
                return Err(Error::Format(format!(
                    "representative {rep} of bin {i} outside ({}, {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Builds the equal-mass partition of `[range_lo, range_hi]` into `m` bins
/// under `N(mu, sigma²)` truncated to the range.
pub fn build_axis_partition(
    mu: f64,
    sigma: f64,
    range_lo: f64,
    range_hi: f64,
    m: u32,
    mode: RepresentativeMode,
) -> Result<AxisPartition> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !(range_lo < range_hi) || !range_lo.is_finite() || !range_hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "invalid range [{range_lo}, {range_hi}]"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    if !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be finite, got {mu}")));
    }
    let m_us = m as usize;
    let (a, b) = ((range_lo - mu) / sigma, (range_hi - mu) / sigma);

    let mut boundaries = vec![range_lo; m_us + 1];
    boundaries[m_us] = range_hi;
    let interior_ok = if std_interval_mass(a, b) > 0.0 {
        // Edge i sits at mass fraction i/m. Ranges lying wholly above the mean
        // are inverted through the survival function to keep tail precision.
        let upper_tail = a > 0.0;
        let (p_lo, p_hi) = if upper_tail {
            (-std_sf(a), -std_sf(b))
        } else {
            (std_cdf(a), std_cdf(b))
        };
        for (i, edge) in boundaries.iter_mut().enumerate().take(m_us).skip(1) {
            let p = p_lo + (p_hi - p_lo) * i as f64 / m as f64;
            let z = if upper_tail {
                bisect(|z| -std_sf(z), p, a, b)
            } else {
                bisect(std_cdf, p, a, b)
            };
            *edge = (mu + sigma * z).clamp(range_lo, range_hi);
        }
        boundaries.windows(2).all(|w| w[0] < w[1])
    } else {
        false
    };
    if !interior_ok {
        // The range carries no representable mass: fall back to even spacing.
        let width = range_hi - range_lo;
        for (i, edge) in boundaries.iter_mut().enumerate().take(m_us).skip(1) {
            *edge = range_lo + width * i as f64 / m as f64;
        }
    }

    let representatives = boundaries
        .windows(2)
        .map(|w| {
            let mid = w[0] + 0.5 * (w[1] - w[0]);
            match mode {
                RepresentativeMode::Midpoint => mid,
                RepresentativeMode::TruncatedMean => match truncated_mean(mu, sigma, w[0], w[1]) {
                    Some(t) if w[0] < t && t < w[1] => t,
                    _ => mid,
                },
            }
        })
        .collect();

    let partition = AxisPartition {
        mu,
        sigma,
        boundaries,
        representatives,
    };
    partition.validate()?;
    Ok(partition)
}

/// Bin index of `value`: half-open bins `[b_i, b_{i+1})`, the last bin closed,
/// out-of-range values clamped to the nearest bin.
pub fn digitize(value: f64, partition: &AxisPartition) -> usize {
    let m = partition.bins();
    let inner = &partition.boundaries[1..m];
    inner.partition_point(|&b| b <= value).min(m - 1)
}

/// Gripper token meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gripper {
    Closed = 0,
    Open = 1,
}

/// Token IDs for one action step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenTriple {
    pub trans: u32,
    pub rot: u32,
    pub grip: u32,
}

impl TokenTriple {
    pub fn to_array(self) -> [u32; 3] {
        [self.trans, self.rot, self.grip]
    }
}

/// Block offsets of the flat vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLayout {
    pub translation_order: [Axis; 3],
    pub rotation_order: [Axis; 3],
    pub translation_offset: u32,
    pub rotation_offset: u32,
    pub gripper_offset: u32,
    pub gripper_closed: u32,
    pub gripper_open: u32,
    pub vocab_size: u32,
}

impl TokenLayout {
    pub fn for_spec(spec: &GridSpec) -> Self {
        let trans = spec.trans_tokens() as u32;
        let rot = spec.rot_tokens() as u32;
        TokenLayout {
            translation_order: Axis::TRANSLATION,
            rotation_order: Axis::ROTATION,
            translation_offset: 0,
            rotation_offset: trans,
            gripper_offset: trans + rot,
            gripper_closed: Gripper::Closed as u32,
            gripper_open: Gripper::Open as u32,
            vocab_size: trans + rot + GRIPPER_TOKENS,
        }
    }
}

/// Row-major flattening of a 3D bin index with extents `dims`.
pub fn linearize(idx: [usize; 3], dims: [u32; 3]) -> Result<u32> {
    for (&i, &d) in idx.iter().zip(&dims) {
        if i >= d as usize {
            return Err(Error::IndexOutOfRange {
                what: "grid axis",
                index: i as u64,
                limit: d as u64,
            });
        }
    }
    Ok(((idx[0] as u32 * dims[1] + idx[1] as u32) * dims[2]) + idx[2] as u32)
}

/// Inverse of [`linearize`].
pub fn delinearize(id: u32, dims: [u32; 3]) -> Result<[usize; 3]> {
    let total = dims.iter().map(|&d| d as u64).product::<u64>();
    if id as u64 >= total {
        return Err(Error::IndexOutOfRange {
            what: "local token",
            index: id as u64,
            limit: total,
        });
    }
    let k = id % dims[2];
    let rest = id / dims[2];
    Ok([(rest / dims[1]) as usize, (rest % dims[1]) as usize, k as usize])
}

/// A fitted, immutable action tokenizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionGrid {
    pub spec: GridSpec,
    pub mode: RepresentativeMode,
    /// One partition per axis, in [`Axis::ALL`] order.
    pub partitions: [AxisPartition; 6],
    pub layout: TokenLayout,
}

/// Builds a grid with truncated-mean representatives.
pub fn build_action_grid(params: &GaussianParams, spec: &GridSpec) -> Result<ActionGrid> {
    build_action_grid_with(params, spec, RepresentativeMode::TruncatedMean)
}

pub fn build_action_grid_with(
    params: &GaussianParams,
    spec: &GridSpec,
    mode: RepresentativeMode,
) -> Result<ActionGrid> {
    spec.validate()?;
    let build = |axis: Axis| {
        let g = params.get(axis);
        let (lo, hi) = axis.range();
        build_axis_partition(g.mu, g.sigma, lo, hi, spec.bins(axis), mode)
    };
    let partitions = [
        build(Axis::Theta)?,
        build(Axis::Phi)?,
        build(Axis::R)?,
        build(Axis::Roll)?,
        build(Axis::Pitch)?,
        build(Axis::Yaw)?,
    ];
    Ok(ActionGrid {
        spec: *spec,
        mode,
        partitions,
        layout: TokenLayout::for_spec(spec),
    })
}

impl ActionGrid {
    /// Assembles a grid from stored partitions, checking them against `spec`.
    pub fn from_parts(spec: GridSpec, mode: RepresentativeMode, partitions: [AxisPartition; 6]) -> Result<Self> {
        spec.validate()?;
        for (axis, p) in Axis::ALL.into_iter().zip(&partitions) {
            p.validate().map_err(|e| Error::Format(format!("axis {axis}: {e}")))?;
            if p.bins() != spec.bins(axis) as usize {
                return Err(Error::Format(format!(
                    "axis {axis}: {} bins stored, spec says {}",
                    p.bins(),
                    spec.bins(axis)
                )));
            }
        }
        Ok(ActionGrid {
            spec,
            mode,
            partitions,
            layout: TokenLayout::for_spec(&spec),
        })
    }

    pub fn partition(&self, axis: Axis) -> &AxisPartition {
        &self.partitions[axis.index()]
    }

    pub fn vocab_size(&self) -> u32 {
        self.layout.vocab_size
    }

    pub fn trans_dims(&self) -> [u32; 3] {
        Axis::TRANSLATION.map(|a| self.spec.bins(a))
    }

    pub fn rot_dims(&self) -> [u32; 3] {
        Axis::ROTATION.map(|a| self.spec.bins(a))
    }

    pub fn linearize_trans(&self, idx: [usize; 3]) -> Result<u32> {
        linearize(idx, self.trans_dims())
    }

    pub fn delinearize_trans(&self, id: u32) -> Result<[usize; 3]> {
        delinearize(id, self.trans_dims())
    }

    pub fn linearize_rot(&self, idx: [usize; 3]) -> Result<u32> {
        linearize(idx, self.rot_dims())
    }

    pub fn delinearize_rot(&self, id: u32) -> Result<[usize; 3]> {
        delinearize(id, self.rot_dims())
    }

    /// Per-axis bin indices of a normalized action, in [`Axis::ALL`] order.
    pub fn bin_indices(&self, norm: &[f64; 7]) -> [usize; 6] {
        let coords = grid_coordinates(norm);
        let mut out = [0; 6];
        for ((o, c), p) in out.iter_mut().zip(coords).zip(&self.partitions) {
            *o = digitize(c, p);
        }
        out
    }

    /// Encodes a normalized action (six entries in `[-1, 1]`, grip in `[0, 1]`).
    pub fn encode(&self, norm: &[f64; 7]) -> TokenTriple {
        let b = self.bin_indices(norm);
        let trans = linearize([b[0], b[1], b[2]], self.trans_dims()).expect("digitized indices in range");
        let rot = linearize([b[3], b[4], b[5]], self.rot_dims()).expect("digitized indices in range");
        let grip = if norm[6] > GRIP_THRESHOLD {
            Gripper::Open
        } else {
            Gripper::Closed
        };
        TokenTriple {
            trans: self.layout.translation_offset + trans,
            rot: self.layout.rotation_offset + rot,
            grip: self.layout.gripper_offset + grip as u32,
        }
    }

    /// Checks that each token lies in its own block.
    pub fn check_tokens(&self, t: TokenTriple) -> Result<()> {
        let l = &self.layout;
        if t.trans >= l.rotation_offset {
            return Err(Error::Layout(format!(
                "translation token {} not in [0, {})",
                t.trans, l.rotation_offset
            )));
        }
        if !(l.rotation_offset..l.gripper_offset).contains(&t.rot) {
            return Err(Error::Layout(format!(
                "rotation token {} not in [{}, {})",
                t.rot, l.rotation_offset, l.gripper_offset
            )));
        }
        if !(l.gripper_offset..l.vocab_size).contains(&t.grip) {
            return Err(Error::Layout(format!(
                "gripper token {} not in [{}, {})",
                t.grip, l.gripper_offset, l.vocab_size
            )));
        }
        Ok(())
    }

    /// Representative value of every axis for the given tokens, in [`Axis::ALL`] order.
    pub fn representatives(&self, t: TokenTriple) -> Result<[f64; 6]> {
        self.check_tokens(t)?;
        let ti = self.delinearize_trans(t.trans - self.layout.translation_offset)?;
        let ri = self.delinearize_rot(t.rot - self.layout.rotation_offset)?;
        let idx = [ti[0], ti[1], ti[2], ri[0], ri[1], ri[2]];
        let mut out = [0.0; 6];
        for ((o, i), p) in out.iter_mut().zip(idx).zip(&self.partitions) {
            *o = p.representatives[i];
        }
        Ok(out)
    }

    /// Decodes tokens to a normalized action with Cartesian translation.
    pub fn decode(&self, t: TokenTriple) -> Result<[f64; 7]> {
        let [theta, phi, r, roll, pitch, yaw] = self.representatives(t)?;
        let [x, y, z] = polar_to_cartesian(PolarTranslation { phi, theta, r });
        let grip = if t.grip - self.layout.gripper_offset == Gripper::Open as u32 {
            1.0
        } else {
            0.0
        };
        Ok([x, y, z, roll, pitch, yaw, grip])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::AxisGaussian;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn params(mu_sigma: [(f64, f64); 6]) -> GaussianParams {
        GaussianParams::from_axes(mu_sigma.map(|(mu, sigma)| AxisGaussian { mu, sigma }), 1)
    }

    fn typical_params() -> GaussianParams {
        params([
            (1.4, 0.6),
            (0.3, 1.7),
            (0.35, 0.25),
            (0.05, 0.3),
            (-0.1, 0.25),
            (0.0, 0.4),
        ])
    }

    #[test]
    fn two_bin_symmetric_partition() {
        let p = build_axis_partition(0.0, 1.0, -1.0, 1.0, 2, RepresentativeMode::TruncatedMean).unwrap();
        assert_eq!(p.boundaries[0], -1.0);
        assert!(p.boundaries[1].abs() < 1e-15);
        assert_eq!(p.boundaries[2], 1.0);
    }

    #[test]
    fn single_bin_partition() {
        let p = build_axis_partition(0.0, 1.0, -1.0, 1.0, 1, RepresentativeMode::TruncatedMean).unwrap();
        assert_eq!(p.boundaries, vec![-1.0, 1.0]);
        assert_eq!(p.representatives, vec![0.0]);
    }

    #[test]
    fn four_bin_partition_matches_monte_carlo_quartiles() {
        use rand_distr::{Distribution, Normal};
        // Oracle: rejection-sample N(0,1) on [-1, 1] and take empirical quartiles.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut draws: Vec<f64> = std::iter::repeat_with(|| normal.sample(&mut rng))
            .filter(|x: &f64| x.abs() <= 1.0)
            .take(400_000)
            .collect();
        draws.sort_by(f64::total_cmp);
        let q = |f: f64| draws[(f * draws.len() as f64) as usize];
        let p = build_axis_partition(0.0, 1.0, -1.0, 1.0, 4, RepresentativeMode::TruncatedMean).unwrap();
        for (i, f) in [(1, 0.25), (2, 0.5), (3, 0.75)] {
            assert!(
                (p.boundaries[i] - q(f)).abs() < 5e-3,
                "edge {i}: {} vs {}",
                p.boundaries[i],
                q(f)
            );
        }
        assert!((p.boundaries[1] + 0.442).abs() < 1e-3);
        assert!((p.boundaries[3] - 0.442).abs() < 1e-3);
    }

    #[test]
    fn bins_carry_equal_truncated_mass() {
        for (mu, sigma, lo, hi, m) in [
            (0.0, 1.0, -1.0, 1.0, 16),
            (0.3, 0.2, -1.0, 1.0, 16),
            (1.4, 0.6, 0.0, PI, 16),
            (0.2, 1.5, -PI, PI, 32),
            (0.05, 0.1, 0.0, 3f64.sqrt(), 8),
            (0.0, 1e-6, 0.0, 3f64.sqrt(), 8),
            (0.9, 0.05, -1.0, 1.0, 16),
            (3.0, 0.5, -1.0, 1.0, 8),
        ] {
            let p = build_axis_partition(mu, sigma, lo, hi, m, RepresentativeMode::TruncatedMean).unwrap();
            let total = std_interval_mass((lo - mu) / sigma, (hi - mu) / sigma);
            for w in p.boundaries.windows(2) {
                let mass = std_interval_mass((w[0] - mu) / sigma, (w[1] - mu) / sigma) / total;
                assert!((mass - 1.0 / m as f64).abs() < 1e-9, "mu={mu} sigma={sigma}: {mass}");
            }
        }
    }

    #[test]
    fn underflowing_range_falls_back_to_even_spacing() {
        let p = build_axis_partition(100.0, 0.01, -1.0, 1.0, 4, RepresentativeMode::TruncatedMean).unwrap();
        assert_eq!(p.boundaries, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        p.validate().unwrap();
    }

    #[test]
    fn partition_rejects_bad_arguments() {
        let m = RepresentativeMode::TruncatedMean;
        assert!(build_axis_partition(0.0, 0.0, -1.0, 1.0, 4, m).is_err());
        assert!(build_axis_partition(0.0, 1.0, 1.0, -1.0, 4, m).is_err());
        assert!(build_axis_partition(0.0, 1.0, -1.0, 1.0, 0, m).is_err());
    }

    #[test]
    fn midpoint_mode() {
        let p = build_axis_partition(0.0, 1.0, -1.0, 1.0, 2, RepresentativeMode::Midpoint).unwrap();
        assert!((p.representatives[0] + 0.5).abs() < 1e-15);
        assert!((p.representatives[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn vocabulary_sizes() {
        assert_eq!(GridSpec::default().vocab_size(), 8194);
        assert_eq!(GridSpec::uniform(8).vocab_size(), 1026);
        let g = build_action_grid(&typical_params(), &GridSpec::default()).unwrap();
        assert_eq!(g.vocab_size(), 8194);
        for axis in Axis::ALL {
            assert_eq!(g.partition(axis).representatives.len(), g.spec.bins(axis) as usize);
        }
        let g = build_action_grid(&typical_params(), &GridSpec::uniform(8)).unwrap();
        assert_eq!(g.vocab_size(), 1026);
    }

    #[test]
    fn spec_string_parsing() {
        let s: GridSpec = "32,16,8,16,16,16".parse().unwrap();
        assert_eq!(s, GridSpec::default());
        assert_eq!(s.to_string(), "32,16,8,16,16,16");
        assert!("1,2,3".parse::<GridSpec>().is_err());
        assert!("1,2,3,4,5,0".parse::<GridSpec>().is_err());
        assert!("a,2,3,4,5,6".parse::<GridSpec>().is_err());
    }

    #[test]
    fn digitize_examples() {
        let p = AxisPartition {
            mu: 0.0,
            sigma: 1.0,
            boundaries: vec![-1.0, -0.442, 0.0, 0.442, 1.0],
            representatives: vec![-0.7, -0.2, 0.2, 0.7],
        };
        // Linear-scan oracle.
        let scan = |v: f64| {
            let mut bin = 0;
            for (i, w) in p.boundaries.windows(2).enumerate() {
                if v >= w[0] {
                    bin = i;
                }
            }
            bin
        };
        assert_eq!(digitize(-1.0, &p), 0);
        assert_eq!(digitize(1.0, &p), 3);
        assert_eq!(digitize(0.1, &p), 2);
        assert_eq!(scan(0.1), 2);
        assert_eq!(digitize(0.0, &p), 2);
        assert_eq!(digitize(-5.0, &p), 0);
        assert_eq!(digitize(5.0, &p), 3);
        for i in 0..=400 {
            let v = -1.0 + i as f64 / 200.0;
            assert_eq!(digitize(v, &p), scan(v), "{v}");
        }
    }

    #[test]
    fn linearize_examples() {
        let dims = [16, 32, 8];
        assert_eq!(linearize([0, 0, 0], dims).unwrap(), 0);
        assert_eq!(linearize([15, 31, 7], dims).unwrap(), 4095);
        assert_eq!(linearize([1, 2, 3], dims).unwrap(), 275);
        assert_eq!(delinearize(0, dims).unwrap(), [0, 0, 0]);
        assert_eq!(delinearize(4095, dims).unwrap(), [15, 31, 7]);
        assert_eq!(delinearize(275, dims).unwrap(), [1, 2, 3]);
        assert!(linearize([16, 0, 0], dims).is_err());
        assert!(delinearize(4096, dims).is_err());
    }

    #[test]
    fn linearize_enumeration_is_bijective_and_ordered() {
        let dims = [16u32, 32, 8];
        let mut expected = 0u32;
        for i in 0..16 {
            for j in 0..32 {
                for k in 0..8 {
                    assert_eq!(linearize([i, j, k], dims).unwrap(), expected);
                    assert_eq!(delinearize(expected, dims).unwrap(), [i, j, k]);
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 4096);
    }

    #[test]
    fn gripper_threshold_is_strict() {
        let g = build_action_grid(&typical_params(), &GridSpec::default()).unwrap();
        let off = g.layout.gripper_offset;
        assert_eq!(g.encode(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7]).grip, off + 1);
        assert_eq!(g.encode(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]).grip, off);
        assert_eq!(
            g.decode(TokenTriple {
                trans: 0,
                rot: 4096,
                grip: off + 1
            })
            .unwrap()[6],
            1.0
        );
        assert_eq!(
            g.decode(TokenTriple {
                trans: 0,
                rot: 4096,
                grip: off
            })
            .unwrap()[6],
            0.0
        );
    }

    #[test]
    fn zero_translation_token() {
        let g = build_action_grid(&typical_params(), &GridSpec::default()).unwrap();
        let t = g.encode(&[0.0; 7]);
        let theta_bin = digitize(0.0, g.partition(Axis::Theta));
        let phi_bin = digitize(0.0, g.partition(Axis::Phi));
        assert_eq!(theta_bin, 0);
        assert_eq!(t.trans, linearize([theta_bin, phi_bin, 0], [16, 32, 8]).unwrap());
        assert_eq!(t, g.encode(&[0.0; 7]));
    }

    #[test]
    fn decode_uses_truncated_mean() {
        let p = params([(1.5, 1.0), (0.0, 1.0), (0.5, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]);
        let spec = GridSpec {
            m_roll: 2,
            ..GridSpec::uniform(1)
        };
        let g = build_action_grid(&p, &spec).unwrap();
        assert_eq!(g.partition(Axis::Roll).boundaries.len(), 3);
        let rot = g.layout.rotation_offset + g.linearize_rot([1, 0, 0]).unwrap();
        let out = g
            .decode(TokenTriple {
                trans: 0,
                rot,
                grip: g.layout.gripper_offset,
            })
            .unwrap();
        let oracle = crate::gaussian::tests::simpson(|x| x * (-0.5 * x * x).exp(), 0.0, 1.0, 4000)
            / crate::gaussian::tests::simpson(|x| (-0.5 * x * x).exp(), 0.0, 1.0, 4000);
        assert!((out[3] - oracle).abs() < 1e-12);
        assert!((out[3] - 0.4598).abs() < 1e-4);
    }

    #[test]
    fn layout_violations_rejected() {
        let g = build_action_grid(&typical_params(), &GridSpec::default()).unwrap();
        for t in [
            TokenTriple {
                trans: 4096,
                rot: 4096,
                grip: 8192,
            },
            TokenTriple {
                trans: 0,
                rot: 0,
                grip: 8192,
            },
            TokenTriple {
                trans: 0,
                rot: 8192,
                grip: 8192,
            },
            TokenTriple {
                trans: 0,
                rot: 4096,
                grip: 8194,
            },
            TokenTriple {
                trans: 0,
                rot: 4096,
                grip: 4096,
            },
        ] {
            assert!(matches!(g.decode(t), Err(Error::Layout(_))), "{t:?}");
        }
    }

    #[test]
    fn codec_fixed_point_exhaustive() {
        let g = build_action_grid(&typical_params(), &GridSpec::default()).unwrap();
        let off = g.layout;
        for id in 0..4096u32 {
            for grip in [off.gripper_offset, off.gripper_offset + 1] {
                let t = TokenTriple {
                    trans: id,
                    rot: off.rotation_offset + (id * 7 + 3) % 4096,
                    grip,
                };
                let back = g.encode(&g.decode(t).unwrap());
                assert_eq!(back, t);
            }
        }
    }

    proptest! {
        #[test]
        fn decode_stays_in_source_bin(x in -1.0f64..=1.0, y in -1.0f64..=1.0, z in -1.0f64..=1.0,
                                      roll in -1.0f64..=1.0, pitch in -1.0f64..=1.0, yaw in -1.0f64..=1.0,
                                      grip in 0.0f64..=1.0) {
            let g = build_action_grid(&typical_params(), &GridSpec::default()).unwrap();
            let a = [x, y, z, roll, pitch, yaw, grip];
            let t = g.encode(&a);
            let d = g.decode(t).unwrap();
            prop_assert_eq!(g.bin_indices(&a), g.bin_indices(&d));
            prop_assert_eq!(g.encode(&d), t);
            prop_assert_eq!(g.decode(g.encode(&d)).unwrap(), d);
        }

        #[test]
        fn vocab_formula(m in proptest::array::uniform6(1u32..20)) {
            let spec = GridSpec { m_phi: m[0], m_theta: m[1], m_r: m[2], m_roll: m[3], m_pitch: m[4], m_yaw: m[5] };
            let layout = TokenLayout::for_spec(&spec);
            prop_assert_eq!(layout.vocab_size as u64, (m[0] * m[1] * m[2] + m[3] * m[4] * m[5] + 2) as u64);
        }

        #[test]
        fn partition_invariants(mu in -1.5f64..1.5, log_sigma in -6.0f64..1.0, m in 1u32..40) {
            let sigma = 10f64.powf(log_sigma);
            let p = build_axis_partition(mu, sigma, -1.0, 1.0, m, RepresentativeMode::TruncatedMean).unwrap();
            prop_assert!(p.validate().is_ok());
            prop_assert_eq!(p.boundaries[0], -1.0);
            prop_assert_eq!(p.boundaries[m as usize], 1.0);
        }
    }

    #[test]
    fn random_actions_keep_bins() {
        let g = build_action_grid(&typical_params(), &GridSpec::uniform(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let a: [f64; 7] = std::array::from_fn(|i| {
                if i < 6 {
                    rng.random_range(-1.0..=1.0)
                } else {
                    rng.random()
                }
            });
            let d = g.decode(g.encode(&a)).unwrap();
            assert_eq!(g.bin_indices(&a), g.bin_indices(&d));
        }
    }
}
