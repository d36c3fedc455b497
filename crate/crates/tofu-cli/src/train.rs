//! `tofu train`: single-sample Adam training of the fusion network with a
//! logged loss curve and a resumable checkpoint.
//!
//! The loop is sequential by design: parameter updates depend on each
//! other, and bitwise reproducibility of the checkpoint matters more here
//! than core count. Only sample loading fans out.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use tofu_nn::{checkpoint, Adam, FusionNet, NetConfig, Tape, Tensor};

use crate::args::{SplitArg, TrainArgs};
use crate::dataset::{load_calibration, Manifest};
use crate::rng::{stream_rng, Domain};
use crate::stack::{load_sample, warp_context, Sample, StackOptions};
use crate::CliError;

pub const CHECKPOINT_FILE: &str = "checkpoint.tofw";
pub const CURVE_FILE: &str = "loss_curve.csv";

/// Brightness and contrast jitter on the color input. The same augmented
/// image also feeds the smoothness term, so the loss stays consistent.
fn augment_rgb(rgb: &Tensor<f32>, rng: &mut rand_chacha::ChaCha8Rng) -> Tensor<f32> {
    let brightness: f32 = rng.gen_range(-0.1..0.1);
    let contrast: f32 = rng.gen_range(0.9..1.1);
    let mut out = rgb.clone();
    for v in out.data_mut() {
        *v = ((*v - 0.5) * contrast + 0.5 + brightness).clamp(0.0, 1.0);
    }
    out
}

pub struct TrainSummary {
    pub steps: u64,
    pub final_loss: f64,
}

pub fn load_split_samples(
    data: &Path,
    manifest: &Manifest,
    split: SplitArg,
    opt: &StackOptions,
) -> Result<Vec<Sample>, CliError> {
    let calib = load_calibration(data)?;
    manifest
        .select(split)
        .par_iter()
        .map(|entry| load_sample(data, manifest, &calib, entry, opt))
        .collect()
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let manifest = Manifest::load(&args.data)?;
    if manifest.width % 32 != 0 || manifest.height % 32 != 0 {
        return Err(CliError::Validation(format!(
            "network input must be a multiple of 32, dataset is {}x{}",
            manifest.width, manifest.height
        )));
    }
    if args.epochs == 0 {
        return Err(CliError::Validation("--epochs must be positive".into()));
    }
    let config = NetConfig {
        placement: args.placement.to_placement(),
        kind: args.fusion_kind.to_kind(),
        d_min: args.d_min,
        d_max: args.d_max,
    };
    config.validate().map_err(CliError::from)?;

    let opt = StackOptions {
        d_max: args.d_max,
        residual_max: args.residual_max,
    };
    let samples = load_split_samples(&args.data, &manifest, SplitArg::Train, &opt)?;
    if samples.is_empty() {
        return Err(CliError::Validation("no training frames in dataset".into()));
    }
    let calib = load_calibration(&args.data)?;
    let ctx = warp_context(&calib);

    fs::create_dir_all(&args.out)?;
    let net = FusionNet::new(config)?;
    let mut params = net.init_params(crate::rng::stream_seed(args.seed, Domain::Init, 0));
    let mut adam = Adam::new(args.lr);
    let mut curve = String::from("step,epoch,frame,loss,lr\n");
    let mut step: u64 = 0;
    let mut last_loss = f64::NAN;

    for epoch in 0..args.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut stream_rng(args.seed, Domain::Shuffle, epoch as u64));
        for idx in order {
            let sample = &samples[idx];
            let rgb = augment_rgb(&sample.rgb, &mut stream_rng(args.seed, Domain::Augment, step));
            let lr_now = adam.lr();

            // Keep the pre-step state so a numerical failure still leaves a
            // usable checkpoint behind.
            let snapshot = (params.clone(), adam.clone());
            let outcome = (|| -> Result<f64, tofu_nn::NnError> {
                let mut tape = Tape::<f32>::new();
                let outs = net.forward(
                    &mut tape,
                    &params,
                    rgb,
                    sample.tof.clone(),
                    Some(&ctx),
                )?;
                let rgb_for_smooth = tape.value(outs.rgb_input).clone();
                let loss = tofu_nn::loss::build_loss(
                    &mut tape,
                    &outs,
                    &sample.gt_rgb,
                    &sample.gt_tof,
                    &rgb_for_smooth,
                    args.lambda_s,
                )?;
                let loss_value = tape.value(loss).data()[0] as f64;
                let grads = tape.backward(loss)?;
                let by_name = outs
                    .params
                    .iter()
                    .map(|(n, id)| {
                        (
                            n.clone(),
                            grads[id].clone().unwrap_or_else(|| {
                                Tensor::zeros(tape.value(id).dims().to_vec())
                            }),
                        )
                    })
                    .collect();
                adam.apply(&mut params, &by_name)?;
                Ok(loss_value)
            })();
            let loss_value = match outcome {
                Ok(v) => v,
                Err(tofu_nn::NnError::NonFinite { what }) => {
                    checkpoint::save(
                        &args.out.join(CHECKPOINT_FILE),
                        &config,
                        &snapshot.0,
                        &snapshot.1,
                    )?;
                    fs::write(args.out.join(CURVE_FILE), &curve)?;
                    return Err(CliError::Numeric(format!(
                        "step {step}: non-finite values in {what}; last good state saved"
                    )));
                }
                Err(e) => return Err(e.into()),
            };
            curve.push_str(&format!(
                "{step},{epoch},{},{loss_value:.6e},{lr_now:.6e}\n",
                sample.id
            ));
            last_loss = loss_value;
            step += 1;
        }
    }

    checkpoint::save(&args.out.join(CHECKPOINT_FILE), &config, &params, &adam)?;
    fs::write(args.out.join(CURVE_FILE), &curve)?;
    println!(
        "train: {} steps over {} epochs, final loss {:.4} -> {}",
        step,
        args.epochs,
        last_loss,
        args.out.display()
    );
    Ok(())
}
