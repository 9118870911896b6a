//! Compare per-axis quantization error of a coarse and a fine grid.

use spatok::synthetic::{gaussian_dataset, SyntheticConfig};
use spatok::{build_action_grid, compute_normalizer, fit_gaussians, quantization_report, GridSpec};

fn main() -> spatok::Result<()> {
    let data = gaussian_dataset(&SyntheticConfig::default(), 50_000, 0);
    let norm = compute_normalizer(&data, 0.01, 0.99)?;
    let params = fit_gaussians(&data, &norm)?;

    let specs = [GridSpec::uniform(8), GridSpec::default()];
    let reports = specs
        .iter()
        .map(|s| quantization_report(&data, &norm, &build_action_grid(&params, s)?))
        .collect::<spatok::Result<Vec<_>>>()?;

    println!(
        "{:>6} {:>14} {:>14}",
        "axis",
        format!("V={}", reports[0].vocab_size),
        format!("V={}", reports[1].vocab_size)
    );
    for (c, f) in reports[0].axes.iter().zip(&reports[1].axes) {
        println!("{:>6} {:>14.3e} {:>14.3e}", c.axis, c.mse, f.mse);
    }
    for r in &reports {
        println!(
            "V={}: {} of {} tokens used",
            r.vocab_size,
            r.used_tokens(),
            r.vocab_size
        );
    }
    Ok(())
}
