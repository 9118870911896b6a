//! Fit a grid on a synthetic dataset, print each axis, and save the artifact.
//!
//! ```text
//! cargo run --example fit_grid -- [OUT.json]
//! ```

use spatok::synthetic::{gaussian_dataset, SyntheticConfig};
use spatok::{fit_artifact, Axis, GridSpec, RepresentativeMode};

fn main() -> spatok::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "grid.json".into());
    let samples = gaussian_dataset(&SyntheticConfig::default(), 20_000, 0);
    let art = fit_artifact(
        &samples,
        &GridSpec::default(),
        (0.01, 0.99),
        RepresentativeMode::TruncatedMean,
    )?;

    println!("{} samples, vocabulary {}", samples.len(), art.grid.vocab_size());
    for axis in Axis::ALL {
        let p = art.grid.partition(axis);
        let edges = &p.boundaries;
        println!(
            "{:>6}: {:>2} bins  mu {:+.4}  sigma {:.4}  first edges {:.4} {:.4} {:.4}",
            axis.name(),
            p.bins(),
            p.mu,
            p.sigma,
            edges[0],
            edges[1],
            edges[2]
        );
    }
    art.write(&out)?;
    println!("wrote {out} (sha256 {})", art.digest()?);
    Ok(())
}
