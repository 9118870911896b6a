//! Reproducible synthetic episode data for examples, tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::stats::ActionSample;

/// Per-variable Gaussian of raw action deltas, plus episode shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// `(mean, std)` for x, y, z, roll, pitch, yaw in raw units.
    pub moments: [(f64, f64); 6],
    /// Probability that the gripper toggles between consecutive steps.
    pub grip_toggle: f64,
    pub episode_len: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            moments: [
                (0.002, 0.010),
                (-0.001, 0.008),
                (0.000, 0.012),
                (0.000, 0.030),
                (0.004, 0.020),
                (-0.002, 0.050),
            ],
            grip_toggle: 0.05,
            episode_len: 50,
        }
    }
}

/// Draws `steps` action steps from independent Gaussians.
pub fn gaussian_dataset(config: &SyntheticConfig, steps: usize, seed: u64) -> Vec<ActionSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dists: Vec<Normal<f64>> = config
        .moments
        .iter()
        .map(|&(m, s)| Normal::new(m, s).expect("finite, non-negative std"))
        .collect();
    let episode_len = config.episode_len.max(1);
    let mut grip = 1.0;
    (0..steps as u64)
        .map(|i| {
            let step = i % episode_len;
            if step == 0 {
                grip = 1.0;
            } else if rng.random::<f64>() < config.grip_toggle {
                grip = 1.0 - grip;
            }
            let mut action = [0.0; 7];
            for (a, d) in action.iter_mut().zip(&dists) {
                *a = d.sample(&mut rng);
            }
            action[6] = grip;
            ActionSample::new(format!("ep{:05}", i / episode_len), step, action)
        })
        .collect()
}

/// Serializes samples in the episode dataset line format.
pub fn to_jsonl(samples: &[ActionSample]) -> String {
    let mut out = String::new();
    for s in samples {
        let line = serde_json::json!({
            "episode_id": s.episode_id,
            "step": s.step,
            "action": s.action().to_vec(),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}
