//! Depth map to egocentric 3D position embeddings, fused with visual features.

use spatok::ego3d::{
    back_project, encode_depth, fuse_features, mlp_forward, CameraIntrinsics, DepthMap, FeatureGrid, MlpWeights,
    SinusoidalConfig, DEFAULT_PATCH,
};

fn main() -> spatok::Result<()> {
    let k = CameraIntrinsics {
        fx: 100.0,
        fy: 100.0,
        cx: 55.5,
        cy: 55.5,
        width: 112,
        height: 112,
    };
    // A tilted floor, with a hole of missing depth in one corner.
    let depth = DepthMap::from_fn(112, 112, |u, v| {
        if u < 20 && v < 20 {
            0.0
        } else {
            1.0 / (0.5 + 0.004 * v as f64)
        }
    });

    let points = back_project(&depth, &k)?;
    let valid = points.valid.iter().filter(|v| **v).count();
    println!(
        "back-projected {valid} of {} pixels; centre {:?}",
        points.valid.len(),
        points.point(56, 56)
    );

    let cfg = SinusoidalConfig::default();
    let enc = encode_depth(&depth, &k, &cfg, DEFAULT_PATCH)?;
    let f = &enc.features;
    println!(
        "{}x{} patches, {} features each (L = {})",
        f.rows, f.cols, f.dim, cfg.num_freqs
    );
    println!("empty patches: {}", enc.empty.iter().filter(|e| **e).count());

    let hidden = 256;
    let pos = mlp_forward(f, &MlpWeights::zeros(f.dim, hidden, hidden))?;
    let visual = FeatureGrid::new(
        f.rows,
        f.cols,
        hidden,
        (0..f.rows * f.cols * hidden).map(|i| (i % 13) as f64).collect(),
    )?;
    let fused = fuse_features(&visual, &pos)?;
    println!(
        "zero-initialized head leaves visual features unchanged: {}",
        fused == visual
    );
    Ok(())
}
