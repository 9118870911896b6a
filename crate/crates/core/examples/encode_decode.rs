//! Tokenize a short action chunk and map the tokens back to raw actions.

use spatok::synthetic::{gaussian_dataset, SyntheticConfig};
use spatok::{denormalize, fit_artifact, normalize, GridSpec, RepresentativeMode};

fn main() -> spatok::Result<()> {
    let cfg = SyntheticConfig::default();
    let train = gaussian_dataset(&cfg, 10_000, 0);
    let art = fit_artifact(
        &train,
        &GridSpec::default(),
        (0.01, 0.99),
        RepresentativeMode::TruncatedMean,
    )?;

    let chunk = gaussian_dataset(&cfg, 4, 1);
    let mut stream = Vec::new();
    for s in &chunk {
        let t = art.grid.encode(&normalize(s, &art.normalization));
        stream.extend(t.to_array());
        let back = denormalize(&art.grid.decode(t)?, &art.normalization);
        println!("action  {:+.4?}", s.action());
        println!("tokens  {:?}", t.to_array());
        println!("decoded {:+.4?}\n", back);
    }
    println!(
        "{} steps -> {} tokens from a vocabulary of {}",
        chunk.len(),
        stream.len(),
        art.grid.vocab_size()
    );
    Ok(())
}
