//! Invariant checks run against a fitted grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::gaussian::{gaussian_cdf, gaussian_ppf, std_cdf, std_interval_mass};
use crate::grid::{delinearize, digitize, linearize, ActionGrid, Axis, AxisPartition, TokenTriple};

pub const DEFAULT_SAMPLES: usize = 200_000;
/// Allowed deviation of a bin count from `n / M`, in binomial standard deviations.
pub const EQUAL_MASS_SIGMAS: f64 = 4.0;
pub const PPF_TOLERANCE: f64 = 1e-10;
const PPF_GRID_POINTS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Draws from `N(mu, sigma²)` truncated to the partition's range.
///
/// Rejection sampling keeps the draws independent of the CDF code under test;
/// ranges with little mass fall back to inverse-CDF sampling.
pub fn truncated_draws(p: &AxisPartition, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (lo, hi) = p.range();
    let (a, b) = ((lo - p.mu) / p.sigma, (hi - p.mu) / p.sigma);
    let mass = std_interval_mass(a, b);
    let mut out = Vec::with_capacity(n);
    if mass >= 0.05 {
        let normal = Normal::new(p.mu, p.sigma).expect("positive sigma");
        while out.len() < n {
            let x = normal.sample(rng);
            if (lo..=hi).contains(&x) {
                out.push(x);
            }
        }
    } else {
        let (p_lo, p_hi) = (std_cdf(a), std_cdf(b));
        while out.len() < n {
            let u = p_lo + (p_hi - p_lo) * rng.random::<f64>();
            if u > 0.0 && u < 1.0 {
                if let Ok(x) = gaussian_ppf(u, p.mu, p.sigma) {
                    out.push(x.clamp(lo, hi));
                }
            }
        }
    }
    out
}

/// Largest |count - n/M| over all bins, in binomial standard deviations.
pub fn equal_mass_statistic(p: &AxisPartition, draws: &[f64]) -> (f64, usize) {
    let m = p.bins();
    if m == 1 {
        return (0.0, 0);
    }
    let mut counts = vec![0usize; m];
    for &x in draws {
        counts[digitize(x, p)] += 1;
    }
    let n = draws.len() as f64;
    let prob = 1.0 / m as f64;
    let sd = (n * prob * (1.0 - prob)).sqrt();
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| ((c as f64 - n * prob).abs() / sd, i))
        .fold((0.0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
}

fn check_equal_mass(grid: &ActionGrid, samples: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, Axis::Theta, 0);
    for axis in Axis::ALL {
        let p = grid.partition(axis);
        let draws = truncated_draws(p, samples, &mut rng);
        let (z, bin) = equal_mass_statistic(p, &draws);
        if z > worst.0 {
            worst = (z, axis, bin);
        }
    }
    CheckResult {
        check: "equal_mass",
        passed: worst.0 <= EQUAL_MASS_SIGMAS,
        statistic: worst.0,
        threshold: EQUAL_MASS_SIGMAS,
        detail: format!(
            "{samples} draws per axis; worst deviation on {} bin {}",
            worst.1, worst.2
        ),
    }
}

/// `1000` probabilities, log-spaced from `1e-6` up to `0.5` and mirrored.
pub fn ppf_probe_grid() -> Vec<f64> {
    let half = PPF_GRID_POINTS / 2;
    let mut ps = Vec::with_capacity(PPF_GRID_POINTS);
    for i in 0..half {
        let t = i as f64 / (half - 1) as f64;
        let p = 10f64.powf(-6.0 + t * (0.5f64.log10() + 6.0));
        ps.push(p);
        ps.push(1.0 - p);
    }
    ps
}

fn check_ppf(grid: &ActionGrid) -> CheckResult {
    let mut worst = (0.0f64, Axis::Theta, 0.5);
    for axis in Axis::ALL {
        let p = grid.partition(axis);
        for prob in ppf_probe_grid() {
            let err = gaussian_ppf(prob, p.mu, p.sigma)
                .and_then(|x| gaussian_cdf(x, p.mu, p.sigma))
                .map(|c| (c - prob).abs())
                .unwrap_or(f64::INFINITY);
            if err > worst.0 {
                worst = (err, axis, prob);
            }
        }
    }
    CheckResult {
        check: "ppf_cdf_roundtrip",
        passed: worst.0 < PPF_TOLERANCE,
        statistic: worst.0,
        threshold: PPF_TOLERANCE,
        detail: format!("worst at axis {} p={:e}", worst.1, worst.2),
    }
}

fn check_bijectivity(grid: &ActionGrid) -> CheckResult {
    let mut failures = 0u64;
    let mut checked = 0u64;
    for dims in [grid.trans_dims(), grid.rot_dims()] {
        let mut expected = 0u32;
        for i in 0..dims[0] as usize {
            for j in 0..dims[1] as usize {
                for k in 0..dims[2] as usize {
                    let ok = linearize([i, j, k], dims).ok() == Some(expected)
                        && delinearize(expected, dims).ok() == Some([i, j, k]);
                    failures += (!ok) as u64;
                    checked += 1;
                    expected += 1;
                }
            }
        }
    }
    CheckResult {
        check: "linearize_bijectivity",
        passed: failures == 0,
        statistic: failures as f64,
        threshold: 0.0,
        detail: format!("{checked} index triples enumerated"),
    }
}

fn check_idempotence(grid: &ActionGrid) -> CheckResult {
    let l = grid.layout;
    let n_trans = l.rotation_offset;
    let n_rot = l.gripper_offset - l.rotation_offset;
    let mut failures = 0u64;
    let mut checked = 0u64;
    let mut first_failure = None;
    let mut probe = |t: TokenTriple| {
        checked += 1;
        let ok = match grid.decode(t) {
            Ok(d) => {
                let re = grid.encode(&d);
                re == t && grid.decode(re).ok() == Some(d)
            }
            Err(_) => false,
        };
        if !ok {
            failures += 1;
            first_failure.get_or_insert(t);
        }
    };
    for id in 0..n_trans.max(n_rot) {
        for g in 0..2 {
            probe(TokenTriple {
                trans: id % n_trans,
                rot: l.rotation_offset + id % n_rot,
                grip: l.gripper_offset + g,
            });
        }
    }
    CheckResult {
        check: "codec_idempotence",
        passed: failures == 0,
        statistic: failures as f64,
        threshold: 0.0,
        detail: match first_failure {
            Some(t) => format!("{checked} triples; first failure {t:?}"),
            None => format!("{checked} triples"),
        },
    }
}

/// Runs every check. `samples` draws per axis feed the equal-mass test.
pub fn verify_grid(grid: &ActionGrid, samples: usize, seed: u64) -> VerifyReport {
    VerifyReport {
        checks: vec![
            check_equal_mass(grid, samples, seed),
            check_ppf(grid),
            check_bijectivity(grid),
            check_idempotence(grid),
        ],
    }
}
