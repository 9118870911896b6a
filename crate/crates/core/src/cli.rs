//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 usage or input error.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::adapt::{adapt_embeddings, cross_sections, EmbeddingTable};
use crate::artifact::{fit_artifact, GridArtifact};
use crate::binfile::{BinFile, Dtype};
use crate::ego3d::{
    back_project, encode_depth, fuse_features, mlp_forward, CameraIntrinsics, DepthMap, FeatureGrid, MlpWeights,
    SinusoidalConfig, DEFAULT_FREQUENCIES, DEFAULT_PATCH,
};
use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec, RepresentativeMode};
use crate::report::quantization_report;
use crate::stats::{denormalize, load_dataset_file, normalize, DEFAULT_QUANTILES};
use crate::tokens::{read_tokens, write_actions, write_tokens};
use crate::verify::{verify_grid, DEFAULT_SAMPLES};

#[derive(Parser, Debug)]
#[command(name = "spatok", version, about = "Adaptive action-grid tokenizer")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file supplying defaults for the flags below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Bin counts "mphi,mtheta,mr,mroll,mpitch,myaw".
    #[arg(long, global = true)]
    pub spec: Option<String>,
    /// Normalization quantiles "q_low,q_high".
    #[arg(long, global = true)]
    pub quantiles: Option<String>,
    /// Bin representative: truncmean or midpoint.
    #[arg(long, global = true)]
    pub representative: Option<String>,
    /// Monte-Carlo draws per axis for `verify`.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit normalizer and Gaussians on a dataset and write a grid artifact.
    Fit {
        dataset: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Encode every action step of a dataset into a token triple.
    Encode {
        dataset: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Decode a token stream into raw-unit actions.
    Decode {
        tokens: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Refit on a new dataset and initialize the new embeddings from the old ones.
    Adapt {
        dataset: PathBuf,
        #[arg(long)]
        old_grid: PathBuf,
        #[arg(long)]
        old_table: PathBuf,
        #[arg(long)]
        out_grid: PathBuf,
        #[arg(long)]
        out_table: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Element type of the written table.
        #[arg(long, default_value = "f32")]
        dtype: String,
        /// Also write raw cross-sections of the new table here.
        #[arg(long)]
        slices: Option<PathBuf>,
    },
    /// Check a grid artifact's invariants.
    Verify { grid: PathBuf },
    /// Quantization error of a grid on a dataset.
    Report {
        dataset: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Egocentric 3D position encoding.
    #[command(subcommand)]
    Ego3d(Ego3dCommand),
}

#[derive(Subcommand, Debug)]
pub enum Ego3dCommand {
    /// Depth map to camera-frame point map.
    Backproject {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Depth map to per-patch position features (MLP output when weights are given).
    EncodePos {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        intrinsics: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PATCH)]
        patch: usize,
        #[arg(long, default_value_t = DEFAULT_FREQUENCIES)]
        freqs: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Add position embeddings to visual features.
    Fuse {
        #[arg(long)]
        visual: PathBuf,
        #[arg(long)]
        pos: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    spec: Option<String>,
    quantiles: Option<String>,
    representative: Option<String>,
    samples: Option<usize>,
}

/// Flags merged over the config file; `None` means "not given anywhere".
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub seed: u64,
    pub spec: Option<GridSpec>,
    pub quantiles: Option<(f64, f64)>,
    pub representative: Option<RepresentativeMode>,
    pub samples: usize,
}

fn parse_quantiles(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("quantiles {s:?}: {e}")))?;
    match parts[..] {
        [lo, hi] if (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo < hi => Ok((lo, hi)),
        _ => Err(Error::InvalidArgument(format!(
            "quantiles {s:?} must be \"q_low,q_high\" with 0 <= q_low < q_high <= 1"
        ))),
    }
}

impl CliConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
                toml::from_str::<ConfigFile>(&text).map_err(|e| Error::Format(e.to_string()).in_file(path))?
            }
            None => ConfigFile::default(),
        };
        let spec = args.spec.clone().or(file.spec);
        let quantiles = args.quantiles.clone().or(file.quantiles);
        let representative = args.representative.clone().or(file.representative);
        Ok(CliConfig {
            seed: args.seed.or(file.seed).unwrap_or(0),
            spec: spec.map(|s| s.parse()).transpose()?,
            quantiles: quantiles.map(|s| parse_quantiles(&s)).transpose()?,
            representative: representative.map(|s| s.parse()).transpose()?,
            samples: args.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES),
        })
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

fn emit(value: serde_json::Value) {
    println!("{value}");
}

fn print_axes(art: &GridArtifact) {
    for axis in Axis::ALL {
        let g = art.gaussians.get(axis);
        emit(json!({
            "record": "axis",
            "axis": axis.name(),
            "bins": art.grid.spec.bins(axis),
            "mu": g.mu,
            "sigma": g.sigma,
        }));
    }
}

fn cmd_fit(cfg: &CliConfig, dataset: &Path, out: &Path) -> Result<()> {
    let samples = load_dataset_file(dataset)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset.in_file(dataset));
    }
    let art = fit_artifact(
        &samples,
        &cfg.spec.unwrap_or_default(),
        cfg.quantiles.unwrap_or(DEFAULT_QUANTILES),
        cfg.representative.unwrap_or_default(),
    )?;
    art.write(out)?;
    emit(json!({
        "record": "fit",
        "samples": samples.len(),
        "vocab_size": art.grid.vocab_size(),
        "spec": art.grid.spec.to_string(),
    }));
    print_axes(&art);
    Ok(())
}

fn cmd_encode(dataset: &Path, grid: &Path, out: &Path) -> Result<()> {
    let art = GridArtifact::read(grid)?;
    let samples = load_dataset_file(dataset)?;
    let tokens: Vec<_> = samples
        .iter()
        .map(|s| art.grid.encode(&normalize(s, &art.normalization)))
        .collect();
    let mut buf = Vec::new();
    write_tokens(&mut buf, &tokens)?;
    write_file(out, &buf)?;
    emit(json!({"record": "encode", "steps": tokens.len(), "tokens": tokens.len() * 3}));
    Ok(())
}

fn cmd_decode(tokens: &Path, grid: &Path, out: &Path) -> Result<()> {
    let art = GridArtifact::read(grid)?;
    let file = fs::File::open(tokens).map_err(|e| Error::from(e).in_file(tokens))?;
    let triples = read_tokens(BufReader::new(file), &art.grid).map_err(|e| e.in_file(tokens))?;
    let actions = triples
        .iter()
        .map(|&t| Ok(denormalize(&art.grid.decode(t)?, &art.normalization)))
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_actions(&mut buf, &actions)?;
    write_file(out, &buf)?;
    emit(json!({"record": "decode", "steps": actions.len()}));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_adapt(
    cfg: &CliConfig,
    dataset: &Path,
    old_grid: &Path,
    old_table: &Path,
    out_grid: &Path,
    out_table: &Path,
    plan_path: &Path,
    dtype: &str,
    slices: Option<&Path>,
) -> Result<()> {
    let dtype = match dtype {
        "f32" => Dtype::F32,
        "f64" => Dtype::F64,
        other => {
            return Err(Error::InvalidArgument(format!(
                "dtype must be f32 or f64, got {other:?}"
            )))
        }
    };
    let old = GridArtifact::read(old_grid)?;
    let table = EmbeddingTable::read(old_table, &old)?;
    let samples = load_dataset_file(dataset)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset.in_file(dataset));
    }
    let new = fit_artifact(
        &samples,
        &cfg.spec.unwrap_or(old.grid.spec),
        cfg.quantiles
            .unwrap_or((old.normalization.q_low, old.normalization.q_high)),
        cfg.representative.unwrap_or(old.grid.mode),
    )?;
    let (new_table, plan) = adapt_embeddings(&old.grid, &table, &new.grid)?;
    new.write(out_grid)?;
    new_table.write(out_table, &new, dtype)?;
    if let Some(path) = slices {
        cross_sections(&new_table, &new.grid)?.write(path)?;
    }

    let summary = plan.summary();
    let mut buf = Vec::new();
    writeln!(buf, "{}", json!({"record": "plan_summary", "summary": summary}))?;
    for e in &plan.entries {
        writeln!(buf, "{}", json!({"record": "token", "entry": e}))?;
    }
    write_file(plan_path, &buf)?;
    emit(json!({
        "record": "adapt",
        "old_vocab_size": old.grid.vocab_size(),
        "new_vocab_size": new.grid.vocab_size(),
        "dim": new_table.dim(),
        "summary": summary,
    }));
    Ok(())
}

fn cmd_verify(cfg: &CliConfig, grid: &Path) -> Result<bool> {
    let art = GridArtifact::read(grid)?;
    let report = verify_grid(&art.grid, cfg.samples, cfg.seed);
    for c in &report.checks {
        emit(json!({"record": "check", "result": c}));
    }
    emit(json!({"record": "verify", "passed": report.passed(), "seed": cfg.seed, "samples": cfg.samples}));
    for c in report.failures() {
        eprintln!(
            "check {} failed: statistic {:e} vs threshold {:e} ({})",
            c.check, c.statistic, c.threshold, c.detail
        );
    }
    Ok(report.passed())
}

fn cmd_report(dataset: &Path, grid: &Path, out: Option<&Path>) -> Result<()> {
    let art = GridArtifact::read(grid)?;
    let samples = load_dataset_file(dataset)?;
    let r = quantization_report(&samples, &art.normalization, &art.grid).map_err(|e| e.in_file(dataset))?;
    let mut lines = vec![json!({
        "record": "report",
        "samples": r.samples,
        "vocab_size": r.vocab_size,
        "grip_mse": r.grip_mse,
        "used_tokens": r.used_tokens(),
    })];
    lines.extend(r.axes.iter().map(|a| json!({"record": "axis_error", "error": a})));
    let l = art.grid.layout;
    for (block, lo, hi) in [
        ("translation", l.translation_offset, l.rotation_offset),
        ("rotation", l.rotation_offset, l.gripper_offset),
        ("gripper", l.gripper_offset, l.vocab_size),
    ] {
        lines.push(json!({
            "record": "occupancy",
            "block": block,
            "first_token": lo,
            "counts": &r.occupancy[lo as usize..hi as usize],
        }));
    }
    match out {
        Some(path) => {
            let mut buf = Vec::new();
            for line in &lines {
                writeln!(buf, "{line}")?;
            }
            write_file(path, &buf)?;
            emit(lines[0].clone());
        }
        None => lines.into_iter().for_each(emit),
    }
    Ok(())
}

fn cmd_ego3d(cmd: &Ego3dCommand) -> Result<()> {
    match cmd {
        Ego3dCommand::Backproject { depth, intrinsics, out } => {
            let k = CameraIntrinsics::read(intrinsics)?;
            let points = back_project(&DepthMap::read(depth)?, &k)?;
            points.to_bin().write(out)?;
            let valid = points.valid.iter().filter(|v| **v).count();
            emit(json!({"record": "backproject", "pixels": points.valid.len(), "valid": valid}));
        }
        Ego3dCommand::EncodePos {
            depth,
            intrinsics,
            weights,
            patch,
            freqs,
            out,
        } => {
            let k = CameraIntrinsics::read(intrinsics)?;
            let cfg = SinusoidalConfig {
                num_freqs: *freqs,
                ..SinusoidalConfig::default()
            };
            let enc = encode_depth(&DepthMap::read(depth)?, &k, &cfg, *patch)?;
            let features = match weights {
                Some(w) => {
                    let f = BinFile::read(w)?;
                    mlp_forward(&enc.features, &MlpWeights::from_bin(&f).map_err(|e| e.in_file(w))?)?
                }
                None => enc.features.clone(),
            };
            features.to_bin(Dtype::F32).write(out)?;
            emit(json!({
                "record": "encode_pos",
                "patches": [features.rows, features.cols],
                "dim": features.dim,
                "empty_patches": enc.empty.iter().filter(|e| **e).count(),
            }));
        }
        Ego3dCommand::Fuse { visual, pos, out } => {
            let read = |p: &PathBuf| -> Result<FeatureGrid> {
                FeatureGrid::from_bin(&BinFile::read(p)?).map_err(|e| e.in_file(p))
            };
            let fused = fuse_features(&read(visual)?, &read(pos)?)?;
            fused.to_bin(Dtype::F32).write(out)?;
            emit(json!({"record": "fuse", "patches": [fused.rows, fused.cols], "dim": fused.dim}));
        }
    }
    Ok(())
}

/// Runs a parsed command line and maps the outcome to an exit code.
pub fn run(cli: Cli) -> ExitCode {
    let outcome = CliConfig::resolve(&cli.global).and_then(|cfg| match &cli.command {
        Command::Fit { dataset, out } => cmd_fit(&cfg, dataset, out).map(|_| true),
        Command::Encode { dataset, grid, out } => cmd_encode(dataset, grid, out).map(|_| true),
        Command::Decode { tokens, grid, out } => cmd_decode(tokens, grid, out).map(|_| true),
        Command::Adapt {
            dataset,
            old_grid,
            old_table,
            out_grid,
            out_table,
            plan,
            dtype,
            slices,
        } => cmd_adapt(
            &cfg,
            dataset,
            old_grid,
            old_table,
            out_grid,
            out_table,
            plan,
            dtype,
            slices.as_deref(),
        )
        .map(|_| true),
        Command::Verify { grid } => cmd_verify(&cfg, grid),
        Command::Report { dataset, grid, out } => cmd_report(dataset, grid, out.as_deref()).map(|_| true),
        Command::Ego3d(cmd) => cmd_ego3d(cmd).map(|_| true),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn main() -> ExitCode {
    run(Cli::parse())
}
