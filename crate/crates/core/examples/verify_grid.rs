//! Run the grid invariant checks, then break one edge and run them again.

use spatok::synthetic::{gaussian_dataset, SyntheticConfig};
use spatok::verify::verify_grid;
use spatok::{fit_artifact, Axis, GridSpec, RepresentativeMode};

fn main() -> spatok::Result<()> {
    let data = gaussian_dataset(&SyntheticConfig::default(), 20_000, 0);
    let mut art = fit_artifact(
        &data,
        &GridSpec::default(),
        (0.01, 0.99),
        RepresentativeMode::TruncatedMean,
    )?;

    for label in ["fitted", "corrupted"] {
        let report = verify_grid(&art.grid, 200_000, 0);
        println!("{label} grid: {}", if report.passed() { "pass" } else { "FAIL" });
        for c in &report.checks {
            println!(
                "  {:<22} {:<5} {:.3e} (limit {:.0e})",
                c.check, c.passed, c.statistic, c.threshold
            );
        }
        let p = &mut art.grid.partitions[Axis::Yaw.index()];
        p.boundaries[5] += 0.8 * (p.representatives[5] - p.boundaries[5]);
    }
    Ok(())
}
