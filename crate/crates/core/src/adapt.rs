//! Embedding adaptation between two action grids.
//!
//! Each new translation (rotation) token takes its centroid from the new
//! grid's per-axis representatives and is initialized as the trilinear blend
//! of the old tokens whose representatives enclose that centroid. Gripper rows
//! are copied.

use std::path::Path;

use serde::Serialize;

use crate::artifact::GridArtifact;
use crate::binfile::{BinArray, BinFile, Dtype};
use crate::error::{Error, Result};
use crate::grid::{linearize, ActionGrid, Axis, AxisPartition, GRIPPER_TOKENS};

pub const TABLE_KIND: &str = "embedding-table";

/// `V x d` token embeddings, row-major, indexed by token ID.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if data.len() != rows * dim {
            return Err(Error::Shape {
                expected: format!("{rows} x {dim} = {} values", rows * dim),
                actual: data.len().to_string(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("embedding entry {i} is not finite")));
        }
        Ok(EmbeddingTable { dim, data })
    }

    pub fn from_fn(rows: usize, dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows * dim).map(|i| f(i / dim, i % dim)).collect();
        Self::new(rows, dim, data)
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.data[token * self.dim..(token + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn check_grid(&self, grid: &ActionGrid) -> Result<()> {
        if self.rows() != grid.vocab_size() as usize {
            return Err(Error::Shape {
                expected: format!("{} embedding rows (grid vocabulary)", grid.vocab_size()),
                actual: self.rows().to_string(),
            });
        }
        Ok(())
    }

    /// Container with the owning artifact's digest recorded in the header.
    pub fn to_bin(&self, artifact: &GridArtifact, dtype: Dtype) -> Result<BinFile> {
        self.check_grid(&artifact.grid)?;
        let mut f = BinFile::new(TABLE_KIND, dtype).with_array(BinArray::new(
            "table",
            vec![self.rows(), self.dim],
            self.data.clone(),
        ));
        f.meta.insert("grid_sha256".into(), artifact.digest()?.into());
        f.meta.insert("vocab_size".into(), self.rows().into());
        f.meta.insert("dim".into(), self.dim.into());
        Ok(f)
    }

    /// Reads a table and checks it belongs to `artifact`.
    pub fn from_bin(f: &BinFile, artifact: &GridArtifact) -> Result<Self> {
        f.expect_kind(TABLE_KIND)?;
        let digest = artifact.digest()?;
        match f.meta.get("grid_sha256").and_then(|v| v.as_str()) {
            Some(h) if h == digest => {}
            Some(h) => return Err(Error::Format(format!("table was built for grid {h}, not {digest}"))),
            None => return Err(Error::Format("table header lacks grid_sha256".into())),
        }
        let a = f.array("table")?;
        let [rows, dim] = a.shape[..] else {
            return Err(Error::Format(format!("table must be 2-D, got shape {:?}", a.shape)));
        };
        let meta_usize = |k: &str| f.meta.get(k).and_then(|v| v.as_u64()).map(|v| v as usize);
        if meta_usize("vocab_size") != Some(rows) || meta_usize("dim") != Some(dim) {
            return Err(Error::Format("table header V/d disagree with the payload shape".into()));
        }
        let table = EmbeddingTable::new(rows, dim, a.data.clone())?;
        table.check_grid(&artifact.grid)?;
        Ok(table)
    }

    pub fn write(&self, path: impl AsRef<Path>, artifact: &GridArtifact, dtype: Dtype) -> Result<()> {
        self.to_bin(artifact, dtype)?.write(path)
    }

    pub fn read(path: impl AsRef<Path>, artifact: &GridArtifact) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bin(&BinFile::read(path)?, artifact).map_err(|e| e.in_file(path))
    }
}

pub const SLICES_KIND: &str = "embedding-slices";

/// Raw cross-sections of a table for inspection. For every axis, that axis is
/// held at its middle bin and the rows over the other two axes of its block
/// are dumped as an `n1 x n2 x d` array named after the held axis.
pub fn cross_sections(table: &EmbeddingTable, grid: &ActionGrid) -> Result<BinFile> {
    table.check_grid(grid)?;
    let d = table.dim();
    let mut f = BinFile::new(SLICES_KIND, Dtype::F32);
    for (axes, offset) in [
        (Axis::TRANSLATION, grid.layout.translation_offset),
        (Axis::ROTATION, grid.layout.rotation_offset),
    ] {
        let dims = axes.map(|a| grid.spec.bins(a));
        for held in 0..3 {
            let mid = dims[held] as usize / 2;
            let free: Vec<usize> = (0..3).filter(|&a| a != held).collect();
            let (n1, n2) = (dims[free[0]] as usize, dims[free[1]] as usize);
            let mut data = Vec::with_capacity(n1 * n2 * d);
            for i in 0..n1 {
                for j in 0..n2 {
                    let mut idx = [0; 3];
                    idx[held] = mid;
                    idx[free[0]] = i;
                    idx[free[1]] = j;
                    data.extend_from_slice(table.row((offset + linearize(idx, dims)?) as usize));
                }
            }
            let name = axes[held].name();
            f.meta.insert(format!("{name}_index"), mid.into());
            f = f.with_array(BinArray::new(name, vec![n1, n2, d], data));
        }
    }
    Ok(f)
}

/// Interpolation stencil of one centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    /// Old bin-index triples and their weights; zero weights are omitted.
    pub neighbors: Vec<([usize; 3], f64)>,
    /// Whether any coordinate fell outside the old representatives' span.
    pub clamped: bool,
}

/// Locates `c` among ascending `reps`: lower index, fraction towards the next, clamped flag.
fn axis_segment(c: f64, reps: &[f64]) -> (usize, f64, bool) {
    let last = reps.len() - 1;
    if c <= reps[0] {
        return (0, 0.0, c < reps[0]);
    }
    if c >= reps[last] {
        return (last, 0.0, c > reps[last]);
    }
    let j = reps.partition_point(|&r| r <= c) - 1;
    (j, (c - reps[j]) / (reps[j + 1] - reps[j]), false)
}

/// Trilinear weights of `centroid` over the old representatives of three axes.
pub fn trilinear_weights(centroid: [f64; 3], old: [&AxisPartition; 3]) -> Stencil {
    let mut clamped = false;
    let per_axis: Vec<Vec<(usize, f64)>> = centroid
        .iter()
        .zip(old)
        .map(|(&c, p)| {
            let (j, f, cl) = axis_segment(c, &p.representatives);
            clamped |= cl;
            [(j, 1.0 - f), (j + 1, f)]
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .collect()
        })
        .collect();
    let mut neighbors = Vec::with_capacity(8);
    for &(i, wi) in &per_axis[0] {
        for &(j, wj) in &per_axis[1] {
            for &(k, wk) in &per_axis[2] {
                neighbors.push(([i, j, k], wi * wj * wk));
            }
        }
    }
    Stencil { neighbors, clamped }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanEntry {
    pub new_token: u32,
    /// `(old token, weight)` pairs.
    pub neighbors: Vec<(u32, f64)>,
    pub clamped: bool,
}

/// Weighted old-token neighborhoods of every new translation and rotation token.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaptationPlan {
    pub entries: Vec<PlanEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub tokens: usize,
    /// `neighbor_histogram[k]` counts tokens with `k` neighbors.
    pub neighbor_histogram: [usize; 9],
    pub min_weight: f64,
    pub max_weight: f64,
    pub max_weight_sum_error: f64,
    pub clamped_tokens: usize,
}

impl AdaptationPlan {
    pub fn summary(&self) -> PlanSummary {
        let mut s = PlanSummary {
            tokens: self.entries.len(),
            neighbor_histogram: [0; 9],
            min_weight: f64::INFINITY,
            max_weight: f64::NEG_INFINITY,
            max_weight_sum_error: 0.0,
            clamped_tokens: 0,
        };
        for e in &self.entries {
            s.neighbor_histogram[e.neighbors.len().min(8)] += 1;
            let mut sum = 0.0;
            for &(_, w) in &e.neighbors {
                s.min_weight = s.min_weight.min(w);
                s.max_weight = s.max_weight.max(w);
                sum += w;
            }
            s.max_weight_sum_error = s.max_weight_sum_error.max((sum - 1.0).abs());
            s.clamped_tokens += e.clamped as usize;
        }
        s
    }
}

fn plan_block(
    old: &ActionGrid,
    new: &ActionGrid,
    axes: [Axis; 3],
    old_offset: u32,
    new_offset: u32,
    entries: &mut Vec<PlanEntry>,
) {
    let old_parts = axes.map(|a| old.partition(a));
    let new_parts = axes.map(|a| new.partition(a));
    let old_dims = axes.map(|a| old.spec.bins(a));
    let [n0, n1, n2] = axes.map(|a| new.spec.bins(a) as usize);
    // Row-major over the new block, so entries come out in token order.
    for i in 0..n0 {
        for j in 0..n1 {
            for k in 0..n2 {
                let centroid = [
                    new_parts[0].representatives[i],
                    new_parts[1].representatives[j],
                    new_parts[2].representatives[k],
                ];
                let stencil = trilinear_weights(centroid, old_parts);
                let local = ((i * n1 + j) * n2 + k) as u32;
                entries.push(PlanEntry {
                    new_token: new_offset + local,
                    neighbors: stencil
                        .neighbors
                        .iter()
                        .map(|&(idx, w)| {
                            (
                                old_offset + linearize(idx, old_dims).expect("stencil indices in range"),
                                w,
                            )
                        })
                        .collect(),
                    clamped: stencil.clamped,
                });
            }
        }
    }
}

/// Plan for initializing `new` tokens from `old` ones.
pub fn plan_adaptation(old: &ActionGrid, new: &ActionGrid) -> Result<AdaptationPlan> {
    if old.layout.translation_order != new.layout.translation_order
        || old.layout.rotation_order != new.layout.rotation_order
    {
        return Err(Error::Layout("grids use different linearization orders".into()));
    }
    let mut entries = Vec::with_capacity((new.layout.gripper_offset) as usize);
    plan_block(
        old,
        new,
        Axis::TRANSLATION,
        old.layout.translation_offset,
        new.layout.translation_offset,
        &mut entries,
    );
    plan_block(
        old,
        new,
        Axis::ROTATION,
        old.layout.rotation_offset,
        new.layout.rotation_offset,
        &mut entries,
    );
    Ok(AdaptationPlan { entries })
}

/// Initializes the embedding table of `new_grid` from `old_table`.
pub fn adapt_embeddings(
    old_grid: &ActionGrid,
    old_table: &EmbeddingTable,
    new_grid: &ActionGrid,
) -> Result<(EmbeddingTable, AdaptationPlan)> {
    old_table.check_grid(old_grid)?;
    let plan = plan_adaptation(old_grid, new_grid)?;
    let d = old_table.dim();
    let mut data = vec![0.0; new_grid.vocab_size() as usize * d];
    for e in &plan.entries {
        let out = &mut data[e.new_token as usize * d..(e.new_token as usize + 1) * d];
        for &(old, w) in &e.neighbors {
            for (o, x) in out.iter_mut().zip(old_table.row(old as usize)) {
                *o += w * x;
            }
        }
    }
    for g in 0..GRIPPER_TOKENS {
        let src = old_table.row((old_grid.layout.gripper_offset + g) as usize);
        let dst = (new_grid.layout.gripper_offset + g) as usize;
        data[dst * d..(dst + 1) * d].copy_from_slice(src);
    }
    Ok((EmbeddingTable::new(new_grid.vocab_size() as usize, d, data)?, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_action_grid, GridSpec};
    use crate::stats::{AxisGaussian, GaussianParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(shift: f64, scale: f64) -> GaussianParams {
        let g = |mu: f64, sigma: f64| AxisGaussian {
            mu: mu + shift,
            sigma: sigma * scale,
        };
        GaussianParams::from_axes(
            [
                g(1.5, 0.6),
                g(0.2, 1.5),
                g(0.4, 0.3),
                g(0.0, 0.3),
                g(0.1, 0.2),
                g(-0.1, 0.4),
            ],
            100,
        )
    }

    fn random_table(rows: usize, dim: usize, seed: u64) -> EmbeddingTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EmbeddingTable::from_fn(rows, dim, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn part(reps: Vec<f64>) -> AxisPartition {
        let mut boundaries = vec![-10.0];
        for w in reps.windows(2) {
            boundaries.push(0.5 * (w[0] + w[1]));
        }
        boundaries.push(10.0);
        AxisPartition {
            mu: 0.0,
            sigma: 1.0,
            boundaries,
            representatives: reps,
        }
    }

    #[test]
    fn weights_identity_case() {
        let (a, b, c) = (
            part(vec![0.0, 1.0, 2.0]),
            part(vec![-1.0, 1.0]),
            part(vec![0.1, 0.2, 0.4]),
        );
        let s = trilinear_weights([1.0, -1.0, 0.4], [&a, &b, &c]);
        assert_eq!(s.neighbors, vec![([1, 0, 2], 1.0)]);
        assert!(!s.clamped);
    }

    #[test]
    fn weights_midpoint_case() {
        let (a, b, c) = (
            part(vec![0.0, 1.0, 2.0]),
            part(vec![-1.0, 1.0]),
            part(vec![0.1, 0.2, 0.4]),
        );
        let s = trilinear_weights([2.0, 1.0, 0.3], [&a, &b, &c]);
        assert_eq!(s.neighbors.len(), 2);
        assert_eq!(s.neighbors[0].0, [2, 1, 1]);
        assert_eq!(s.neighbors[1].0, [2, 1, 2]);
        for (_, w) in &s.neighbors {
            assert!((w - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_general_case_matches_brute_force() {
        let reps = [vec![0.0, 0.5, 2.0], vec![-1.0, 0.0, 1.0, 3.0], vec![0.1, 0.2, 0.4]];
        let parts = [part(reps[0].clone()), part(reps[1].clone()), part(reps[2].clone())];
        let c = [0.3, 2.2, 0.25];
        let s = trilinear_weights(c, [&parts[0], &parts[1], &parts[2]]);
        assert_eq!(s.neighbors.len(), 8);
        // Brute force: explicit enclosing cell and fractions.
        let cells = [(0usize, 0.3 / 0.5), (2, 1.2 / 2.0), (1, 0.05 / 0.2)];
        let mut total = 0.0;
        for (idx, w) in &s.neighbors {
            let mut expect = 1.0;
            for ax in 0..3 {
                let (lo, f) = cells[ax];
                expect *= if idx[ax] == lo {
                    1.0 - f
                } else {
                    assert_eq!(idx[ax], lo + 1);
                    f
                };
            }
            assert!((w - expect).abs() < 1e-14);
            total += w;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_clamp_outside_span() {
        let (a, b, c) = (part(vec![0.0, 1.0]), part(vec![0.0, 1.0]), part(vec![0.0, 1.0]));
        let s = trilinear_weights([-0.5, 0.25, 9.0], [&a, &b, &c]);
        assert!(s.clamped);
        assert_eq!(s.neighbors.len(), 2);
        assert!(s.neighbors.iter().all(|(i, _)| i[0] == 0 && i[2] == 1));
    }

    #[test]
    fn identity_adaptation_reproduces_table() {
        let grid = build_action_grid(&params(0.0, 1.0), &GridSpec::default()).unwrap();
        let table = random_table(8194, 8, 1);
        let (out, plan) = adapt_embeddings(&grid, &table, &grid.clone()).unwrap();
        assert_eq!(out, table);
        assert!(plan
            .entries
            .iter()
            .all(|e| e.neighbors.len() == 1 && e.neighbors[0] == (e.new_token, 1.0)));
    }

    #[test]
    fn constant_table_stays_constant() {
        let old = build_action_grid(&params(0.0, 1.0), &GridSpec::uniform(6)).unwrap();
        let new = build_action_grid(&params(0.05, 0.7), &GridSpec::uniform(9)).unwrap();
        let v = [0.25, -3.0, 7.5];
        let table = EmbeddingTable::from_fn(old.vocab_size() as usize, 3, |_, j| v[j]).unwrap();
        let (out, _) = adapt_embeddings(&old, &table, &new).unwrap();
        for t in 0..out.rows() {
            for (x, y) in out.row(t).iter().zip(v) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_two_cube_matches_brute_force() {
        let old = build_action_grid(&params(0.0, 1.0), &GridSpec::uniform(2)).unwrap();
        let new = build_action_grid(&params(0.03, 0.8), &GridSpec::uniform(3)).unwrap();
        // Row of old token = its (i, j, k) index triple within the block.
        let table = EmbeddingTable::from_fn(old.vocab_size() as usize, 3, |t, c| {
            let local = if t < 8 {
                t
            } else if t < 16 {
                t - 8
            } else {
                return 0.0;
            };
            [(local / 4) as f64, ((local / 2) % 2) as f64, (local % 2) as f64][c]
        })
        .unwrap();
        let (out, plan) = adapt_embeddings(&old, &table, &new).unwrap();
        for e in &plan.entries {
            let (axes, offset) = if e.new_token < 27 {
                (Axis::TRANSLATION, 0)
            } else {
                (Axis::ROTATION, 27)
            };
            let local = (e.new_token - offset) as usize;
            let idx = [local / 9, (local / 3) % 3, local % 3];
            for c in 0..3 {
                let x = new.partition(axes[c]).representatives[idx[c]];
                let r = &old.partition(axes[c]).representatives;
                let expect = ((x - r[0]) / (r[1] - r[0])).clamp(0.0, 1.0);
                assert!((out.row(e.new_token as usize)[c] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_table_rejected() {
        let grid = build_action_grid(&params(0.0, 1.0), &GridSpec::uniform(2)).unwrap();
        let table = random_table(17, 4, 0);
        assert!(matches!(
            adapt_embeddings(&grid, &table, &grid),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gripper_rows_copied() {
        let old = build_action_grid(&params(0.0, 1.0), &GridSpec::uniform(3)).unwrap();
        let new = build_action_grid(&params(0.0, 1.0), &GridSpec::uniform(4)).unwrap();
        let table = random_table(old.vocab_size() as usize, 5, 2);
        let (out, _) = adapt_embeddings(&old, &table, &new).unwrap();
        assert_eq!(out.row(128), table.row(54));
        assert_eq!(out.row(129), table.row(55));
    }

    #[test]
    fn cross_sections_hold_middle_bin() {
        let spec: GridSpec = "3,4,2,5,2,3".parse().unwrap();
        let grid = build_action_grid(&params(0.0, 1.0), &spec).unwrap();
        let table = EmbeddingTable::from_fn(grid.vocab_size() as usize, 2, |r, c| (r * 2 + c) as f64).unwrap();
        let f = cross_sections(&table, &grid).unwrap();
        assert_eq!(f.arrays.len(), 6);

        // theta (4 bins) held at 2; free axes phi (3) and r (2).
        let theta = f.array("theta").unwrap().expect_shape(&[3, 2, 2]).unwrap();
        for phi in 0..3 {
            for r in 0..2 {
                let token = (2 * 3 + phi) * 2 + r;
                let at = (phi * 2 + r) * 2;
                assert_eq!(theta[at..at + 2], [(token * 2) as f64, (token * 2 + 1) as f64]);
            }
        }
        // yaw (3 bins) held at 1; free axes roll (5) and pitch (2).
        let yaw = f.array("yaw").unwrap().expect_shape(&[5, 2, 2]).unwrap();
        let token = 24 + (4 * 2 + 1) * 3 + 1;
        assert_eq!(yaw[(4 * 2 + 1) * 2], (token * 2) as f64);
        assert_eq!(f.meta["yaw_index"], 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn plan_properties(shift in -0.2f64..0.2, scale in 0.3f64..2.0, m_old in 1u32..6, m_new in 1u32..7,
                           alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in any::<u64>()) {
            let old = build_action_grid(&params(0.0, 1.0), &GridSpec::uniform(m_old)).unwrap();
            let new = build_action_grid(&params(shift, scale), &GridSpec::uniform(m_new)).unwrap();
            let rows = old.vocab_size() as usize;
            let e1 = random_table(rows, 4, seed);
            let e2 = random_table(rows, 4, seed ^ 0xabcd);
            let combo = EmbeddingTable::from_fn(rows, 4, |r, c| alpha * e1.row(r)[c] + beta * e2.row(r)[c]).unwrap();
            let (a1, plan) = adapt_embeddings(&old, &e1, &new).unwrap();
            let (a2, _) = adapt_embeddings(&old, &e2, &new).unwrap();
            let (ac, _) = adapt_embeddings(&old, &combo, &new).unwrap();
            let trans_old = old.layout.rotation_offset;
            let trans_new = new.layout.rotation_offset;
            for e in &plan.entries {
                let sum: f64 = e.neighbors.iter().map(|n| n.1).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(e.neighbors.iter().all(|n| n.1 >= 0.0));
                prop_assert!(e.neighbors.len() <= 8 && !e.neighbors.is_empty());
                // Translation tokens draw only on translation rows, rotation on rotation.
                let is_trans = e.new_token < trans_new;
                prop_assert!(e.neighbors.iter().all(|n| (n.0 < trans_old) == is_trans));
                for c in 0..4 {
                    let row = a1.row(e.new_token as usize)[c];
                    let lo = e.neighbors.iter().map(|n| e1.row(n.0 as usize)[c]).fold(f64::INFINITY, f64::min);
                    let hi = e.neighbors.iter().map(|n| e1.row(n.0 as usize)[c]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(row >= lo - 1e-12 && row <= hi + 1e-12);
                }
            }
            for r in 0..ac.rows() {
                for c in 0..4 {
                    let lin = alpha * a1.row(r)[c] + beta * a2.row(r)[c];
                    prop_assert!((ac.row(r)[c] - lin).abs() < 1e-10);
                }
            }
        }
    }
}
