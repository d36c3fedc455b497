//! `tofu reconstruct`: classical depth from stored correlation captures,
//! with per-frame and pooled metrics against the splatted ToF ground truth.

use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tofu_core::io::{encode_raster, Format};
use tofu_core::{depth_valid, phase_valid, Raster, RasterKind};
use tofu_metrics::{compute_metrics, MetricsReport, CSV_HEADER};
use tofu_phase::{
    unambiguous_range_m, unwrap_dual_frequency, unwrap_fixed, unwrap_with_n_map, wrapped_phase,
    DualFreqConfig,
};

use crate::args::{MethodArg, ReconstructArgs};
use crate::dataset::{read_frame, read_raster, Manifest};
use crate::CliError;

pub const RUN_FILE: &str = "recon.json";
pub const METRICS_FILE: &str = "metrics.csv";

/// Provenance of a reconstruction directory, consumed by `tofu eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconRun {
    pub method: String,
    pub fixed_n: u32,
    pub residual_max: f64,
    pub split: String,
}

/// Pools (prediction, ground truth) pairs from many frames into one pair of
/// single-row rasters so split-level metrics are exact, not row averages.
pub fn pooled_rasters(pairs: &[(f32, f32)]) -> Result<(Raster, Raster), CliError> {
    if pairs.is_empty() {
        return Err(CliError::Validation(
            "no ground-truth pixels to evaluate".into(),
        ));
    }
    let preds: Vec<f32> = pairs.iter().map(|p| p.0).collect();
    let gts: Vec<f32> = pairs.iter().map(|p| p.1).collect();
    let n = pairs.len() as u32;
    let pred = Raster::new(RasterKind::DepthM, n, 1, 1, preds)?;
    let gt = Raster::new(RasterKind::DepthM, n, 1, 1, gts)?;
    Ok((pred, gt))
}

/// Per-pixel wrap counts recovered from ground truth; the upper bound for
/// the depth a count can reach keeps garbage truth from exploding n.
fn oracle_n_map(phase: &Raster, gt: &Raster, range: f64, d_max: f64) -> Vec<u32> {
    let n_cap = (d_max / range).ceil().max(1.0);
    phase
        .plane(0)
        .iter()
        .zip(gt.plane(0))
        .map(|(&ph, &g)| {
            if !phase_valid(ph) || !depth_valid(g) {
                return 0;
            }
            let d0 = range * ph as f64 / std::f64::consts::TAU;
            ((g as f64 - d0) / range).round().clamp(0.0, n_cap) as u32
        })
        .collect()
}

fn reconstruct_frame(
    args: &ReconstructArgs,
    manifest: &Manifest,
    id: &str,
) -> Result<(Raster, Raster), CliError> {
    let paths = manifest.paths(&args.data, id);
    let corr = read_frame(&paths.corr)?;
    let gt_tof = read_raster(&paths.gt_tof, RasterKind::DepthM)?;
    let freq = corr.mod_freq_hz as f64;
    let phase = wrapped_phase(&corr);
    let depth = match args.method {
        MethodArg::Wrapped => unwrap_fixed(&phase, 0, freq)?,
        MethodArg::FixedN => unwrap_fixed(&phase, args.fixed_n, freq)?,
        MethodArg::OracleN => {
            let range = unambiguous_range_m(freq)?;
            let n_map = oracle_n_map(&phase, &gt_tof, range, manifest.d_max);
            unwrap_with_n_map(&phase, &n_map, freq)?
        }
        MethodArg::DualFreq => {
            let p2 = paths.corr2.as_ref().ok_or_else(|| {
                CliError::Validation(
                    "dual-freq reconstruction needs a dual-frequency dataset".into(),
                )
            })?;
            let corr2 = read_frame(p2)?;
            let cfg = DualFreqConfig {
                max_range_m: manifest.d_max,
                residual_max_m: args.residual_max,
            };
            unwrap_dual_frequency(
                &phase,
                &wrapped_phase(&corr2),
                freq,
                corr2.mod_freq_hz as f64,
                &cfg,
            )?
            .depth
        }
    };
    Ok((depth, gt_tof))
}

fn split_token(split: crate::args::SplitArg) -> &'static str {
    match split {
        crate::args::SplitArg::Train => "train",
        crate::args::SplitArg::Val => "val",
        crate::args::SplitArg::All => "all",
    }
}

pub fn run(args: &ReconstructArgs) -> Result<(), CliError> {
    let manifest = Manifest::load(&args.data)?;
    if args.method == MethodArg::DualFreq && manifest.freqs_hz.len() < 2 {
        return Err(CliError::Validation(
            "dual-freq reconstruction needs a dual-frequency dataset".into(),
        ));
    }
    if args.residual_max <= 0.0 {
        return Err(CliError::Validation("--residual-max must be positive".into()));
    }
    let entries = manifest.select(args.split);
    if entries.is_empty() {
        return Err(CliError::Validation(format!(
            "no frames in split {:?}",
            split_token(args.split)
        )));
    }
    fs::create_dir_all(&args.out)?;

    let per_frame: Vec<(String, MetricsReport, Vec<(f32, f32)>)> = entries
        .par_iter()
        .map(|entry| -> Result<_, CliError> {
            let (depth, gt) = reconstruct_frame(args, &manifest, &entry.id)?;
            let out_path = args.out.join(format!("pred_{}.pfm", entry.id));
            fs::write(&out_path, encode_raster(&depth, Format::Pfm)?)?;
            let report = compute_metrics(&depth, &gt, None)?;
            let pairs: Vec<(f32, f32)> = depth
                .plane(0)
                .iter()
                .zip(gt.plane(0))
                .filter(|(_, &g)| depth_valid(g))
                .map(|(&p, &g)| (p, g))
                .collect();
            Ok((entry.id.clone(), report, pairs))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = format!("frame,{CSV_HEADER}\n");
    let mut pooled: Vec<(f32, f32)> = Vec::new();
    for (id, report, pairs) in &per_frame {
        csv.push_str(&format!("{id},{}\n", report.csv_row()));
        pooled.extend_from_slice(pairs);
    }
    let (pred, gt) = pooled_rasters(&pooled)?;
    let total = compute_metrics(&pred, &gt, None)?;
    csv.push_str(&format!("all,{}\n", total.csv_row()));
    fs::write(args.out.join(METRICS_FILE), &csv)?;

    let run = ReconRun {
        method: args.method.token().into(),
        fixed_n: args.fixed_n,
        residual_max: args.residual_max,
        split: split_token(args.split).into(),
    };
    let mut text = serde_json::to_string_pretty(&run)?;
    text.push('\n');
    fs::write(args.out.join(RUN_FILE), text)?;

    println!(
        "reconstruct: {} frames, method {} -> rmse {:.4} m over {} pixels",
        per_frame.len(),
        args.method.token(),
        total.rmse,
        total.n_valid
    );
    Ok(())
}
