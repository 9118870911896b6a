//! Re-fit the grid on a shifted action distribution and initialize the new
//! token embeddings from the old ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatok::synthetic::{gaussian_dataset, SyntheticConfig};
use spatok::{adapt_embeddings, fit_artifact, EmbeddingTable, GridSpec, RepresentativeMode};

fn main() -> spatok::Result<()> {
    let spec = GridSpec::default();
    let mode = RepresentativeMode::TruncatedMean;
    let pretrain = gaussian_dataset(&SyntheticConfig::default(), 20_000, 0);
    let old = fit_artifact(&pretrain, &spec, (0.01, 0.99), mode)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let table = EmbeddingTable::from_fn(old.grid.vocab_size() as usize, 64, |_, _| rng.random_range(-0.02..0.02))?;

    let shifted = SyntheticConfig {
        moments: SyntheticConfig::default().moments.map(|(m, s)| (m + 0.01, s * 0.7)),
        ..SyntheticConfig::default()
    };
    let target = gaussian_dataset(&shifted, 20_000, 1);
    let new = fit_artifact(&target, &spec, (0.01, 0.99), mode)?;

    let (new_table, plan) = adapt_embeddings(&old.grid, &table, &new.grid)?;
    let s = plan.summary();
    println!("adapted {} rows of width {}", new_table.rows(), new_table.dim());
    println!("neighbors per token: {:?}", s.neighbor_histogram);
    println!(
        "weights in [{:.4}, {:.4}], max |sum - 1| = {:.1e}",
        s.min_weight, s.max_weight, s.max_weight_sum_error
    );
    println!("{} tokens clamped to the old grid's span", s.clamped_tokens);

    let e = &plan.entries[1234];
    println!("token {} <- {:?}", e.new_token, e.neighbors);

    let (same, _) = adapt_embeddings(&old.grid, &table, &old.grid)?;
    println!("self-adaptation reproduces the table: {}", same == table);
    Ok(())
}
