//! Egocentric 3D position embeddings.
//!
//! Depth is back-projected through pinhole intrinsics into camera-frame
//! points, each point is expanded into sinusoidal features, features are
//! averaged per image patch, and a `Linear -> LayerNorm -> ReLU -> Linear`
//! head maps each patch to the width of the visual features it is added to.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binfile::{BinArray, BinFile, Dtype};
use crate::error::{Error, Result};

pub const DEFAULT_PATCH: usize = 14;
pub const DEFAULT_FREQUENCIES: usize = 34;
pub const DEFAULT_HIDDEN: usize = 1152;
pub const LAYER_NORM_EPS: f64 = 1e-6;
const DEPTH_MAGIC: &str = "EGO3D-DEPTH v1";

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid camera intrinsics {self:?}")))
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let k: CameraIntrinsics = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))?;
        k.validate().map_err(|e| e.in_file(path))?;
        Ok(k)
    }
}

/// Row-major depth image in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape {
                expected: format!("{width} x {height} depth values"),
                actual: data.len().to_string(),
            });
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..width * height).map(|i| f(i % width, i / width)).collect();
        DepthMap { width, height, data }
    }

    /// `EGO3D-DEPTH v1 <width> <height>\n` followed by little-endian f32 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{DEPTH_MAGIC} {} {}\n", self.width, self.height).into_bytes();
        for &d in &self.data {
            out.extend_from_slice(&(d as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("depth file lacks a header line".into()))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::Format(e.to_string()))?;
        let rest = header
            .strip_prefix(DEPTH_MAGIC)
            .ok_or_else(|| Error::Format(format!("bad depth header {header:?}")))?;
        let dims: Vec<usize> = rest
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("bad depth header {header:?}: {e}")))?;
        let [width, height] = dims[..] else {
            return Err(Error::Format(format!("bad depth header {header:?}")));
        };
        let payload = &bytes[nl + 1..];
        if payload.len() != width * height * 4 {
            return Err(Error::Format(format!(
                "depth payload holds {} bytes, expected {}",
                payload.len(),
                width * height * 4
            )));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect();
        DepthMap::new(width, height, data)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_bytes(&bytes).map_err(|e| e.in_file(path))
    }
}

/// Camera-frame points per pixel; invalid pixels hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    pub width: usize,
    pub height: usize,
    pub points: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl PointMap {
    pub fn point(&self, u: usize, v: usize) -> Option<[f64; 3]> {
        let i = v * self.width + u;
        self.valid[i].then_some(self.points[i])
    }

    pub fn to_bin(&self) -> BinFile {
        BinFile::new("point-map", Dtype::F64)
            .with_array(BinArray::new(
                "points",
                vec![self.height, self.width, 3],
                self.points.iter().flatten().copied().collect(),
            ))
            .with_array(BinArray::new(
                "valid",
                vec![self.height, self.width],
                self.valid.iter().map(|&v| v as u8 as f64).collect(),
            ))
    }
}

/// Pinhole back-projection: `x = (u - cx) d / fx`, `y = (v - cy) d / fy`, `z = d`.
///
/// Non-positive or non-finite depths are flagged invalid.
pub fn back_project(depth: &DepthMap, k: &CameraIntrinsics) -> Result<PointMap> {
    k.validate()?;
    if depth.width != k.width || depth.height != k.height {
        return Err(Error::Shape {
            expected: format!("{} x {} depth map", k.width, k.height),
            actual: format!("{} x {}", depth.width, depth.height),
        });
    }
    let mut points = Vec::with_capacity(depth.data.len());
    let mut valid = Vec::with_capacity(depth.data.len());
    for (i, &d) in depth.data.iter().enumerate() {
        let (u, v) = ((i % depth.width) as f64, (i / depth.width) as f64);
        if d.is_finite() && d > 0.0 {
            points.push([(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d]);
            valid.push(true);
        } else {
            points.push([0.0; 3]);
            valid.push(false);
        }
    }
    Ok(PointMap {
        width: depth.width,
        height: depth.height,
        points,
        valid,
    })
}

/// Geometric frequency bands `base^k * pi` for `k = 0..num_freqs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidalConfig {
    pub num_freqs: usize,
    pub base: f64,
}

impl Default for SinusoidalConfig {
    fn default() -> Self {
        SinusoidalConfig {
            num_freqs: DEFAULT_FREQUENCIES,
            base: 2.0,
        }
    }
}

impl SinusoidalConfig {
    /// `3 * 2 * num_freqs`.
    pub fn dim(&self) -> usize {
        6 * self.num_freqs
    }

    /// Encodes one point. Layout: per coordinate x, y, z, per band k,
    /// `sin(base^k pi c), cos(base^k pi c)`.
    pub fn encode_point(&self, p: [f64; 3], out: &mut [f64]) {
        let mut i = 0;
        for c in p {
            let mut freq = PI;
            for _ in 0..self.num_freqs {
                let (s, co) = (freq * c).sin_cos();
                out[i] = s;
                out[i + 1] = co;
                i += 2;
                freq *= self.base;
            }
        }
    }
}

/// A `rows x cols` grid of `dim`-wide feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * dim {
            return Err(Error::Shape {
                expected: format!("{rows} x {cols} x {dim} values"),
                actual: data.len().to_string(),
            });
        }
        Ok(FeatureGrid { rows, cols, dim, data })
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        FeatureGrid {
            rows,
            cols,
            dim,
            data: vec![0.0; rows * cols * dim],
        }
    }

    pub fn cell(&self, r: usize, c: usize) -> &[f64] {
        let i = (r * self.cols + c) * self.dim;
        &self.data[i..i + self.dim]
    }

    fn cell_mut(&mut self, r: usize, c: usize) -> &mut [f64] {
        let i = (r * self.cols + c) * self.dim;
        &mut self.data[i..i + self.dim]
    }

    fn shape(&self) -> String {
        format!("{} x {} x {}", self.rows, self.cols, self.dim)
    }

    pub fn to_bin(&self, dtype: Dtype) -> BinFile {
        BinFile::new("features", dtype).with_array(BinArray::new(
            "features",
            vec![self.rows, self.cols, self.dim],
            self.data.clone(),
        ))
    }

    pub fn from_bin(f: &BinFile) -> Result<Self> {
        f.expect_kind("features")?;
        let a = f.array("features")?;
        let [rows, cols, dim] = a.shape[..] else {
            return Err(Error::Format(format!("features must be 3-D, got {:?}", a.shape)));
        };
        FeatureGrid::new(rows, cols, dim, a.data.clone())
    }
}

/// Per-pixel sinusoidal features; invalid pixels are all zero.
pub fn sinusoidal_encode(points: &PointMap, cfg: &SinusoidalConfig) -> Result<FeatureGrid> {
    if cfg.num_freqs == 0 {
        return Err(Error::InvalidArgument("at least one frequency band is required".into()));
    }
    let mut out = FeatureGrid::zeros(points.height, points.width, cfg.dim());
    for v in 0..points.height {
        for u in 0..points.width {
            if let Some(p) = points.point(u, v) {
                cfg.encode_point(p, out.cell_mut(v, u));
            }
        }
    }
    Ok(out)
}

/// Patch-averaged features plus a flag for patches without valid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEncoding {
    pub patch: usize,
    pub features: FeatureGrid,
    pub empty: Vec<bool>,
}

/// Mean of the valid pixels' features in each `patch x patch` cell, summed in
/// row-major order.
pub fn patch_average(features: &FeatureGrid, valid: &[bool], patch: usize) -> Result<PatchEncoding> {
    if patch == 0 || !features.rows.is_multiple_of(patch) || !features.cols.is_multiple_of(patch) {
        return Err(Error::InvalidArgument(format!(
            "image {} x {} is not divisible into {patch}-pixel patches",
            features.cols, features.rows
        )));
    }
    if valid.len() != features.rows * features.cols {
        return Err(Error::Shape {
            expected: format!("{} validity flags", features.rows * features.cols),
            actual: valid.len().to_string(),
        });
    }
    let (pr, pc) = (features.rows / patch, features.cols / patch);
    let mut out = FeatureGrid::zeros(pr, pc, features.dim);
    let mut empty = vec![true; pr * pc];
    for r in 0..pr {
        for c in 0..pc {
            let mut count = 0usize;
            let acc = out.cell_mut(r, c);
            for v in r * patch..(r + 1) * patch {
                for u in c * patch..(c + 1) * patch {
                    if !valid[v * features.cols + u] {
                        continue;
                    }
                    count += 1;
                    for (a, x) in acc.iter_mut().zip(features.cell(v, u)) {
                        *a += x;
                    }
                }
            }
            if count > 0 {
                let inv = count as f64;
                acc.iter_mut().for_each(|a| *a /= inv);
                empty[r * pc + c] = false;
            }
        }
    }
    Ok(PatchEncoding {
        patch,
        features: out,
        empty,
    })
}

/// Position-embedding head weights. Matrices are row-major `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub ln_scale: Vec<f64>,
    pub ln_shift: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub const MLP_KIND: &str = "ego3d-mlp";

impl MlpWeights {
    /// All-zero weights: the head outputs zeros, so fusion leaves visual features untouched.
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        MlpWeights {
            input,
            hidden,
            output,
            w1: vec![0.0; input * hidden],
            b1: vec![0.0; hidden],
            ln_scale: vec![0.0; hidden],
            ln_shift: vec![0.0; hidden],
            w2: vec![0.0; hidden * output],
            b2: vec![0.0; output],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = [
            ("w1", self.w1.len(), self.input * self.hidden),
            ("b1", self.b1.len(), self.hidden),
            ("ln_scale", self.ln_scale.len(), self.hidden),
            ("ln_shift", self.ln_shift.len(), self.hidden),
            ("w2", self.w2.len(), self.hidden * self.output),
            ("b2", self.b2.len(), self.output),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Shape {
                    expected: format!("{name} with {want} values"),
                    actual: got.to_string(),
                });
            }
        }
        let all = [&self.w1, &self.b1, &self.ln_scale, &self.ln_shift, &self.w2, &self.b2];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidArgument("MLP weights must be finite".into()));
        }
        Ok(())
    }

    pub fn to_bin(&self, dtype: Dtype) -> BinFile {
        BinFile::new(MLP_KIND, dtype)
            .with_array(BinArray::new("w1", vec![self.input, self.hidden], self.w1.clone()))
            .with_array(BinArray::new("b1", vec![self.hidden], self.b1.clone()))
            .with_array(BinArray::new("ln_scale", vec![self.hidden], self.ln_scale.clone()))
            .with_array(BinArray::new("ln_shift", vec![self.hidden], self.ln_shift.clone()))
            .with_array(BinArray::new("w2", vec![self.hidden, self.output], self.w2.clone()))
            .with_array(BinArray::new("b2", vec![self.output], self.b2.clone()))
    }

    pub fn from_bin(f: &BinFile) -> Result<Self> {
        f.expect_kind(MLP_KIND)?;
        let w1 = f.array("w1")?;
        let [input, hidden] = w1.shape[..] else {
            return Err(Error::Format(format!("w1 must be 2-D, got {:?}", w1.shape)));
        };
        let w2 = f.array("w2")?;
        let [_, output] = w2.shape[..] else {
            return Err(Error::Format(format!("w2 must be 2-D, got {:?}", w2.shape)));
        };
        let w = MlpWeights {
            input,
            hidden,
            output,
            w1: w1.data.clone(),
            b1: f.array("b1")?.expect_shape(&[hidden])?.to_vec(),
            ln_scale: f.array("ln_scale")?.expect_shape(&[hidden])?.to_vec(),
            ln_shift: f.array("ln_shift")?.expect_shape(&[hidden])?.to_vec(),
            w2: w2.expect_shape(&[hidden, output])?.to_vec(),
            b2: f.array("b2")?.expect_shape(&[output])?.to_vec(),
        };
        w.validate()?;
        Ok(w)
    }

    /// One patch through `Linear -> LayerNorm -> ReLU -> Linear`.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let mut h = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w1[i * self.hidden..(i + 1) * self.hidden];
            for (hj, w) in h.iter_mut().zip(row) {
                *hj += xi * w;
            }
        }
        let n = self.hidden as f64;
        let mean = h.iter().sum::<f64>() / n;
        let var = h.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for ((hj, g), b) in h.iter_mut().zip(&self.ln_scale).zip(&self.ln_shift) {
            *hj = ((*hj - mean) * inv_std * g + b).max(0.0);
        }
        out.copy_from_slice(&self.b2);
        for (j, &hj) in h.iter().enumerate() {
            if hj == 0.0 {
                continue;
            }
            let row = &self.w2[j * self.output..(j + 1) * self.output];
            for (o, w) in out.iter_mut().zip(row) {
                *o += hj * w;
            }
        }
    }
}

/// Applies the head to every patch.
pub fn mlp_forward(enc: &FeatureGrid, w: &MlpWeights) -> Result<FeatureGrid> {
    w.validate()?;
    if enc.dim != w.input {
        return Err(Error::Shape {
            expected: format!("{}-wide patch features", w.input),
            actual: enc.dim.to_string(),
        });
    }
    let mut out = FeatureGrid::zeros(enc.rows, enc.cols, w.output);
    for r in 0..enc.rows {
        for c in 0..enc.cols {
            let x = enc.cell(r, c).to_vec();
            w.forward(&x, out.cell_mut(r, c));
        }
    }
    Ok(out)
}

/// `visual + pos`, elementwise.
pub fn fuse_features(visual: &FeatureGrid, pos: &FeatureGrid) -> Result<FeatureGrid> {
    if (visual.rows, visual.cols, visual.dim) != (pos.rows, pos.cols, pos.dim) {
        return Err(Error::Shape {
            expected: visual.shape(),
            actual: pos.shape(),
        });
    }
    let data = visual.data.iter().zip(&pos.data).map(|(x, p)| x + p).collect();
    FeatureGrid::new(visual.rows, visual.cols, visual.dim, data)
}

/// Depth map to per-patch sinusoidal encoding.
pub fn encode_depth(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    cfg: &SinusoidalConfig,
    patch: usize,
) -> Result<PatchEncoding> {
    let points = back_project(depth, k)?;
    let features = sinusoidal_encode(&points, cfg)?;
    patch_average(&features, &points.valid, patch)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intrinsics(w: usize, h: usize) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 200.0,
            fy: 180.0,
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
            width: w,
            height: h,
        }
    }

    #[test]
    fn back_projection_examples() {
        let k = CameraIntrinsics {
            fx: 10.0,
            fy: 12.0,
            cx: 4.0,
            cy: 3.0,
            width: 20,
            height: 8,
        };
        let depth = DepthMap::from_fn(20, 8, |u, v| if (u, v) == (0, 0) { -1.0 } else { 2.0 });
        let pts = back_project(&depth, &k).unwrap();
        assert_eq!(pts.point(4, 3), Some([0.0, 0.0, 2.0]));
        assert_eq!(pts.point(14, 3), Some([2.0, 0.0, 2.0]));
        assert_eq!(pts.point(0, 0), None);
        assert_eq!(pts.points[0], [0.0; 3]);
        let flat = back_project(&DepthMap::from_fn(20, 8, |_, _| 1.0), &k).unwrap();
        assert!(flat.points.iter().all(|p| p[2] == 1.0));
        assert!(matches!(
            back_project(&DepthMap::from_fn(19, 8, |_, _| 1.0), &k),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn nan_depth_is_invalid() {
        let k = intrinsics(4, 4);
        let pts = back_project(&DepthMap::from_fn(4, 4, |u, _| if u == 1 { f64::NAN } else { 1.0 }), &k).unwrap();
        assert_eq!(pts.valid.iter().filter(|v| !**v).count(), 4);
    }

    #[test]
    fn sinusoid_examples() {
        let cfg = SinusoidalConfig::default();
        assert_eq!(cfg.dim(), 204);
        let mut f = vec![0.0; 204];
        cfg.encode_point([0.0; 3], &mut f);
        for pair in f.chunks(2) {
            assert_eq!(pair, [0.0, 1.0]);
        }
        cfg.encode_point([0.5, 0.0, 0.0], &mut f);
        assert!((f[0] - 1.0).abs() < 1e-15);
        assert!(f[1].abs() < 1e-15);
        // k = 1 band: sin(pi) = 0, cos(pi) = -1.
        assert!(f[2].abs() < 1e-15 && (f[3] + 1.0).abs() < 1e-15);
        // y slot starts after 2L entries.
        assert_eq!(f[68], 0.0);
        assert_eq!(f[69], 1.0);
    }

    #[test]
    fn patch_average_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 5;
        let feats = FeatureGrid::new(
            28,
            28,
            dim,
            (0..28 * 28 * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let valid: Vec<bool> = (0..28 * 28).map(|_| rng.random::<f64>() > 0.2).collect();
        let enc = patch_average(&feats, &valid, 14).unwrap();
        assert_eq!((enc.features.rows, enc.features.cols), (2, 2));
        for pr in 0..2 {
            for pc in 0..2 {
                let mut sum = vec![0.0; dim];
                let mut n = 0.0;
                for v in 0..14 {
                    for u in 0..14 {
                        let (y, x) = (pr * 14 + v, pc * 14 + u);
                        if valid[y * 28 + x] {
                            n += 1.0;
                            for d in 0..dim {
                                sum[d] += feats.data[(y * 28 + x) * dim + d];
                            }
                        }
                    }
                }
                for d in 0..dim {
                    assert!((enc.features.cell(pr, pc)[d] - sum[d] / n).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn patch_average_edge_cases() {
        let f = FeatureGrid::new(4, 4, 2, [0.3, -0.7].repeat(16)).unwrap();
        let enc = patch_average(&f, &[true; 16], 2).unwrap();
        assert!(enc.features.data.chunks(2).all(|c| c == [0.3, -0.7]));
        // One valid pixel per patch.
        let mut valid = [false; 16];
        valid[0] = true;
        let mut g = f.clone();
        g.data[0] = 0.9;
        let enc = patch_average(&g, &valid, 2).unwrap();
        assert_eq!(enc.features.cell(0, 0), [0.9, -0.7]);
        assert_eq!(enc.empty, vec![false, true, true, true]);
        assert_eq!(enc.features.cell(1, 1), [0.0, 0.0]);
        assert!(patch_average(&f, &[true; 16], 3).is_err());
    }

    #[test]
    fn mlp_zero_and_constant_head() {
        let enc = FeatureGrid::new(1, 2, 4, vec![0.1, 0.2, 0.3, 0.4, -1.0, 0.0, 1.0, 0.5]).unwrap();
        let w = MlpWeights::zeros(4, 6, 3);
        assert!(mlp_forward(&enc, &w).unwrap().data.iter().all(|&x| x == 0.0));
        let mut w = MlpWeights::zeros(4, 6, 3);
        w.w1.iter_mut().for_each(|x| *x = 0.5);
        w.b2 = vec![1.0, -2.0, 3.0];
        let out = mlp_forward(&enc, &w).unwrap();
        assert_eq!(out.data, [1.0, -2.0, 3.0].repeat(2));
        assert!(matches!(
            mlp_forward(&enc, &MlpWeights::zeros(5, 6, 3)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn mlp_matches_step_by_step_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (i, h, o) = (6, 5, 3);
        let mut r = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let w = MlpWeights {
            input: i,
            hidden: h,
            output: o,
            w1: r(i * h),
            b1: r(h),
            ln_scale: r(h),
            ln_shift: r(h),
            w2: r(h * o),
            b2: r(o),
        };
        let x = r(i);
        // Straight-line recomputation.
        let mut pre = vec![0.0; h];
        for j in 0..h {
            pre[j] = w.b1[j];
            for k in 0..i {
                pre[j] += x[k] * w.w1[k * h + j];
            }
        }
        let mean = pre.iter().sum::<f64>() / h as f64;
        let var = pre.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / h as f64;
        let act: Vec<f64> = (0..h)
            .map(|j| ((pre[j] - mean) / (var + 1e-6).sqrt() * w.ln_scale[j] + w.ln_shift[j]).max(0.0))
            .collect();
        let expect: Vec<f64> = (0..o)
            .map(|k| w.b2[k] + (0..h).map(|j| act[j] * w.w2[j * o + k]).sum::<f64>())
            .collect();
        let enc = FeatureGrid::new(1, 1, i, x).unwrap();
        let out = mlp_forward(&enc, &w).unwrap();
        for (a, b) in out.data.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = FeatureGrid::new(2, 2, 3, (0..12).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        let p = FeatureGrid::new(2, 2, 3, (0..12).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
        assert_eq!(fuse_features(&x, &FeatureGrid::zeros(2, 2, 3)).unwrap(), x);
        assert_eq!(fuse_features(&FeatureGrid::zeros(2, 2, 3), &p).unwrap(), p);
        let o = fuse_features(&x, &p).unwrap();
        for i in 0..12 {
            assert_eq!(o.data[i] - x.data[i], p.data[i]);
        }
        assert!(fuse_features(&x, &FeatureGrid::zeros(2, 3, 3)).is_err());
    }

    #[test]
    fn depth_file_round_trip() {
        let d = DepthMap::from_fn(3, 2, |u, v| (u + 10 * v) as f64 * 0.25);
        let bytes = d.to_bytes();
        assert!(bytes.starts_with(b"EGO3D-DEPTH v1 3 2\n"));
        assert_eq!(DepthMap::from_bytes(&bytes).unwrap(), d);
        assert!(DepthMap::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(DepthMap::from_bytes(b"DEPTH 1 1\n\0\0\0\0").is_err());
    }

    #[test]
    fn mlp_file_round_trip() {
        let mut w = MlpWeights::zeros(2, 3, 2);
        w.w1 = vec![0.5, 1.0, -1.0, 0.25, 2.0, 3.0];
        let back =
            MlpWeights::from_bin(&BinFile::from_bytes(&w.to_bin(Dtype::F32).to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn features_bounded() {
        let k = intrinsics(28, 28);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let depth = DepthMap::from_fn(28, 28, |_, _| rng.random_range(-0.2..3.0));
        let enc = encode_depth(&depth, &k, &SinusoidalConfig::default(), 14).unwrap();
        assert!(enc.features.data.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(enc.features.dim, 204);
    }
}
