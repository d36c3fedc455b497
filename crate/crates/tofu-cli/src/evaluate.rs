//! `tofu eval`: pooled depth metrics for trained checkpoints and classical
//! reconstruction runs, one CSV row per model and output branch.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tofu_core::depth_valid;
use tofu_metrics::{compute_metrics, MetricsReport};
use tofu_nn::{checkpoint, FusionKind, FusionNet, Placement};

use crate::args::{EvalArgs, KindArg, PlacementArg, SplitArg, TrainArgs};
use crate::dataset::{load_calibration, read_raster, Manifest};
use crate::reconstruct::{pooled_rasters, ReconRun, RUN_FILE};
use crate::stack::{load_sample, warp_context, StackOptions};
use crate::train::{self, CHECKPOINT_FILE};
use crate::CliError;

pub const EVAL_HEADER: &str = "backbone,fusion,branch,rmse,rel_abs,rel_sqr,delta1,delta2,delta3";

#[derive(Debug, Clone)]
pub struct EvalRow {
    pub backbone: String,
    pub fusion: String,
    pub branch: String,
    pub report: MetricsReport,
}

impl EvalRow {
    pub fn csv(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.3},{:.3},{:.3}",
            self.backbone,
            self.fusion,
            self.branch,
            r.rmse,
            r.rel_abs,
            r.rel_sqr,
            r.delta1,
            r.delta2,
            r.delta3
        )
    }
}

pub fn fusion_token(placement: Placement, kind: FusionKind) -> String {
    match placement {
        Placement::None => "none".into(),
        Placement::Bottleneck => match kind {
            FusionKind::Gated => "bottleneck-gated".into(),
            FusionKind::Attention => "bottleneck-attention".into(),
        },
        Placement::All => match kind {
            FusionKind::Gated => "all-gated".into(),
            FusionKind::Attention => "all-attention".into(),
        },
    }
}

/// Runs a checkpoint over a split and pools both branches' predictions
/// against their ground truths.
pub fn eval_checkpoint(
    data: &Path,
    ckpt: &Path,
    split: SplitArg,
    clip: Option<(f64, f64)>,
    residual_max: f64,
) -> Result<Vec<EvalRow>, CliError> {
    let (config, params, _adam) = checkpoint::load(ckpt)?;
    let manifest = Manifest::load(data)?;
    let calib = load_calibration(data)?;
    let net = FusionNet::new(config)?;
    let ctx = warp_context(&calib);
    let opt = StackOptions {
        d_max: config.d_max,
        residual_max,
    };
    let entries = manifest.select(split);
    if entries.is_empty() {
        return Err(CliError::Validation("no frames in requested split".into()));
    }

    let per_frame: Vec<(Vec<(f32, f32)>, Vec<(f32, f32)>)> = entries
        .par_iter()
        .map(|entry| -> Result<_, CliError> {
            let s = load_sample(data, &manifest, &calib, entry, &opt)?;
            let (pred_rgb, pred_tof) = net.infer(&params, &s.rgb, &s.tof, Some(&ctx))?;
            let rgb_pairs = pair_up(&pred_rgb, &s.gt_rgb);
            let tof_pairs = pair_up(&pred_tof, &s.gt_tof);
            Ok((rgb_pairs, tof_pairs))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rgb_all = Vec::new();
    let mut tof_all = Vec::new();
    for (r, t) in &per_frame {
        rgb_all.extend_from_slice(r);
        tof_all.extend_from_slice(t);
    }
    let token = fusion_token(config.placement, config.kind);
    let mut rows = Vec::new();
    for (branch, pairs) in [("rgb", rgb_all), ("tof", tof_all)] {
        let (pred, gt) = pooled_rasters(&pairs)?;
        let report = compute_metrics(&pred, &gt, clip)?;
        rows.push(EvalRow {
            backbone: "unet".into(),
            fusion: token.clone(),
            branch: branch.into(),
            report,
        });
    }
    Ok(rows)
}

fn pair_up(pred: &tofu_nn::Tensor<f32>, gt: &tofu_nn::Tensor<f32>) -> Vec<(f32, f32)> {
    pred.data()
        .iter()
        .zip(gt.data())
        .filter(|(_, &g)| depth_valid(g))
        .map(|(&p, &g)| (p, g))
        .collect()
}

/// Metrics for a `tofu reconstruct` output directory.
pub fn eval_recon(
    data: &Path,
    recon: &Path,
    split: SplitArg,
    clip: Option<(f64, f64)>,
) -> Result<Vec<EvalRow>, CliError> {
    let manifest = Manifest::load(data)?;
    let run_path = recon.join(RUN_FILE);
    let text = fs::read_to_string(&run_path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", run_path.display())))?;
    let run: ReconRun = serde_json::from_str(&text)?;
    let entries = manifest.select(split);
    if entries.is_empty() {
        return Err(CliError::Validation("no frames in requested split".into()));
    }

    let per_frame: Vec<Vec<(f32, f32)>> = entries
        .par_iter()
        .map(|entry| -> Result<_, CliError> {
            let pred = read_raster(
                &recon.join(format!("pred_{}.pfm", entry.id)),
                tofu_core::RasterKind::DepthM,
            )?;
            let gt = read_raster(
                &manifest.paths(data, &entry.id).gt_tof,
                tofu_core::RasterKind::DepthM,
            )?;
            Ok(pred
                .plane(0)
                .iter()
                .zip(gt.plane(0))
                .filter(|(_, &g)| depth_valid(g))
                .map(|(&p, &g)| (p, g))
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut all = Vec::new();
    for pairs in &per_frame {
        all.extend_from_slice(pairs);
    }
    let (pred, gt) = pooled_rasters(&all)?;
    let report = compute_metrics(&pred, &gt, clip)?;
    Ok(vec![EvalRow {
        backbone: "classical".into(),
        fusion: run.method,
        branch: "tof".into(),
        report,
    }])
}

/// The five fusion variants, trained with identical budget and seed.
pub const SWEEP_VARIANTS: [(PlacementArg, KindArg); 5] = [
    (PlacementArg::None, KindArg::Gated),
    (PlacementArg::Bottleneck, KindArg::Gated),
    (PlacementArg::Bottleneck, KindArg::Attention),
    (PlacementArg::All, KindArg::Gated),
    (PlacementArg::All, KindArg::Attention),
];

pub fn run_sweep(args: &EvalArgs, out_dir: &Path) -> Result<Vec<EvalRow>, CliError> {
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    for (placement, kind) in SWEEP_VARIANTS {
        let token = fusion_token(placement.to_placement(), kind.to_kind());
        let model_dir = out_dir.join(&token);
        let train_args = TrainArgs {
            data: args.data.clone(),
            out: model_dir.clone(),
            placement,
            fusion_kind: kind,
            epochs: args.epochs,
            seed: args.seed,
            lr: args.lr,
            lambda_s: args.lambda_s,
            d_min: args.d_min,
            d_max: args.d_max,
            residual_max: args.residual_max,
        };
        train::run(&train_args)?;
        rows.extend(eval_checkpoint(
            &args.data,
            &model_dir.join(CHECKPOINT_FILE),
            args.split,
            args.range_clip,
            args.residual_max,
        )?);
    }
    Ok(rows)
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    if let Some((lo, hi)) = args.range_clip {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo >= hi {
            return Err(CliError::Validation(format!(
                "bad --range-clip {lo},{hi}"
            )));
        }
    }
    let (rows, csv_path): (Vec<EvalRow>, Option<PathBuf>) = if args.sweep {
        let out = args.out.as_ref().ok_or_else(|| {
            CliError::Validation("--sweep needs --out, a working directory".into())
        })?;
        let rows = run_sweep(args, out)?;
        (rows, Some(out.join("summary.csv")))
    } else {
        match (&args.checkpoint, &args.recon) {
            (Some(ckpt), None) => (
                eval_checkpoint(
                    &args.data,
                    ckpt,
                    args.split,
                    args.range_clip,
                    args.residual_max,
                )?,
                args.out.clone(),
            ),
            (None, Some(recon)) => (
                eval_recon(&args.data, recon, args.split, args.range_clip)?,
                args.out.clone(),
            ),
            _ => {
                return Err(CliError::Validation(
                    "pass exactly one of --checkpoint or --recon (or --sweep)".into(),
                ))
            }
        }
    };

    let mut csv = format!("{EVAL_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.csv());
        csv.push('\n');
    }
    print!("{csv}");
    if let Some(path) = csv_path {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(&path, &csv)?;
    }
    Ok(())
}
