//! `tofu infer`: one frame through a trained checkpoint, writing depth for
//! both branches and optionally the stack and per-scale outputs.

use std::fs;
use std::path::Path;

use tofu_core::io::{encode_raster, Format};
use tofu_core::{Calibration, Raster, RasterKind};
use tofu_nn::{checkpoint, FusionNet, Tape};

use crate::args::InferArgs;
use crate::dataset::{read_frame, read_raster};
use crate::stack::{aligned_rgb, tof_stack, warp_context, StackOptions};
use crate::CliError;

fn write_pfm(path: &Path, raster: &Raster) -> Result<(), CliError> {
    fs::write(path, encode_raster(raster, Format::Pfm)?)?;
    Ok(())
}

pub fn run(args: &InferArgs) -> Result<(), CliError> {
    let (config, params, _adam) = checkpoint::load(&args.checkpoint)?;
    let corr = read_frame(&args.corr)?;
    let corr2 = match &args.corr2 {
        Some(p) => Some(read_frame(p)?),
        None => None,
    };
    let rgb_raw = read_raster(&args.rgb, RasterKind::Rgb)?;
    let calib_text = fs::read_to_string(&args.calib)
        .map_err(|e| CliError::Validation(format!("{}: {e}", args.calib.display())))?;
    let calib = Calibration::from_json(&calib_text)?;

    let (w, h) = (corr.width(), corr.height());
    if (rgb_raw.width(), rgb_raw.height()) != (w, h) {
        return Err(CliError::Validation(format!(
            "rgb is {}x{}, correlation capture is {w}x{h}",
            rgb_raw.width(),
            rgb_raw.height()
        )));
    }
    if w % 32 != 0 || h % 32 != 0 {
        return Err(CliError::Validation(format!(
            "network input must be a multiple of 32, got {w}x{h}"
        )));
    }

    let opt = StackOptions {
        d_max: config.d_max,
        residual_max: args.residual_max,
    };
    let stack = tof_stack(&corr, corr2.as_ref(), &opt)?;
    let rgb = aligned_rgb(&rgb_raw, &calib)?;
    let ctx = warp_context(&calib);

    let net = FusionNet::new(config)?;
    let mut tape = Tape::<f32>::new();
    let outs = net.forward(&mut tape, &params, rgb.clone(), stack.tensor.clone(), Some(&ctx))?;

    fs::create_dir_all(&args.out)?;
    let pred_rgb = tape.value(outs.rgb_full()).to_raster(RasterKind::DepthM)?;
    let pred_tof = tape.value(outs.tof_full()).to_raster(RasterKind::DepthM)?;
    write_pfm(&args.out.join("pred_rgb.pfm"), &pred_rgb)?;
    write_pfm(&args.out.join("pred_tof.pfm"), &pred_tof)?;

    if args.intermediates {
        write_pfm(&args.out.join("stack_depth.pfm"), &stack.depth)?;
        write_pfm(&args.out.join("stack_amplitude.pfm"), &stack.amplitude)?;
        write_pfm(
            &args.out.join("rgb_aligned.pfm"),
            &rgb.to_raster(RasterKind::Rgb)?,
        )?;
        let divisors = [8u32, 4, 2];
        for (branch, scales) in [("rgb", &outs.rgb_scales), ("tof", &outs.tof_scales)] {
            for (i, node) in scales.iter().take(3).enumerate() {
                let r = tape.value(*node).to_raster(RasterKind::DepthM)?;
                write_pfm(
                    &args.out.join(format!("pred_{branch}_div{}.pfm", divisors[i])),
                    &r,
                )?;
            }
        }
        if let Some(aux) = outs.rgb_aux_sixteenth {
            let r = tape.value(aux).to_raster(RasterKind::DepthM)?;
            write_pfm(&args.out.join("pred_rgb_div16.pfm"), &r)?;
        }
    }

    let lo = pred_rgb.data().iter().copied().fold(f32::INFINITY, f32::min);
    let hi = pred_rgb
        .data()
        .iter()
        .copied()
        .fold(f32::NEG_INFINITY, f32::max);
    println!(
        "infer: {}x{} frame, fusion {}, rgb depth in [{lo:.3}, {hi:.3}] m -> {}",
        w,
        h,
        crate::evaluate::fusion_token(config.placement, config.kind),
        args.out.display()
    );
    Ok(())
}
