//! `tofu simulate`: render scenes, synthesize correlation captures and
//! write a complete dataset directory.

use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use tofu_core::io::{encode_frame, encode_raster, Format};
use tofu_core::{depth_valid, Raster, RasterKind};
use tofu_geometry::forward_splat_depth;
use tofu_sensor::{apply_noise, render_scene, simulate_correlations, EmitterConfig, NoiseConfig, SceneSpec};

use crate::args::SimulateArgs;
use crate::dataset::{
    frame_id, frame_paths, save_calibration, FrameEntry, Manifest, SPLIT_TRAIN, SPLIT_VAL,
};
use crate::rng::{stream_rng, stream_seed, Domain};
use crate::scenegen::{default_rig, generate_scene, GenBounds};
use crate::CliError;

pub const DEFAULT_FREQ_HZ: f64 = 20.0e6;

fn write_pfm(path: &Path, raster: &Raster) -> Result<(), CliError> {
    fs::write(path, encode_raster(raster, Format::Pfm)?)?;
    Ok(())
}

fn bits_equal(a: &Raster, b: &Raster) -> bool {
    a.width() == b.width()
        && a.height() == b.height()
        && a.channels() == b.channels()
        && a.data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let freqs = if args.freq_hz.is_empty() {
        vec![DEFAULT_FREQ_HZ]
    } else {
        args.freq_hz.clone()
    };
    if freqs.len() > 2 {
        return Err(CliError::Validation(
            "at most two capture frequencies are supported".into(),
        ));
    }
    for f in &freqs {
        if !f.is_finite() || *f <= 0.0 {
            return Err(CliError::Validation(format!("bad --freq-hz value {f}")));
        }
    }
    if freqs.len() == 2 && freqs[0] == freqs[1] {
        return Err(CliError::Validation(
            "dual-frequency capture needs two distinct frequencies".into(),
        ));
    }
    if args.count == 0 {
        return Err(CliError::Validation("--count must be positive".into()));
    }
    if args.val_every == 0 {
        return Err(CliError::Validation("--val-every must be positive".into()));
    }
    if args.noise_sigma < 0.0 || args.shot_scale < 0.0 {
        return Err(CliError::Validation("noise scales must be >= 0".into()));
    }
    if !(0.0..1.0).contains(&args.dropout) {
        return Err(CliError::Validation("--dropout must be in [0, 1)".into()));
    }
    if args.source_amplitude <= 0.0 {
        return Err(CliError::Validation(
            "--source-amplitude must be positive".into(),
        ));
    }

    let explicit: Option<SceneSpec> = match &args.scene {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            Some(SceneSpec::from_json(&text)?)
        }
        None => None,
    };
    let (width, height, d_min, d_max, calib) = match &explicit {
        Some(s) => (
            s.width,
            s.height,
            s.d_min,
            s.d_max,
            s.calibration.clone(),
        ),
        None => {
            if args.d_min <= 0.0 || args.d_min >= args.d_max || !args.d_max.is_finite() {
                return Err(CliError::Validation(format!(
                    "bad depth range {}..{}",
                    args.d_min, args.d_max
                )));
            }
            (
                args.width,
                args.height,
                args.d_min,
                args.d_max,
                default_rig(args.width, args.height)?,
            )
        }
    };

    fs::create_dir_all(&args.out)?;
    let far_limit = tofu_phase::unambiguous_range_m(freqs[0])?;
    let rgb_to_tof = calib.tof_to_rgb.inverse();

    let stats: Vec<(usize, usize)> = (0..args.count)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize), CliError> {
            // Generated frames jitter the emitter strength, the way auto
            // exposure does on a real rig, so correlation amplitude carries
            // relative contrast but no absolute range. Explicit scenes keep
            // the requested strength exactly.
            let (scene, frame_amplitude) = match &explicit {
                Some(s) => (s.clone(), args.source_amplitude),
                None => {
                    let mut rng = stream_rng(args.seed, Domain::Scene, i as u64);
                    let scene = generate_scene(
                        width,
                        height,
                        d_min,
                        d_max,
                        &calib,
                        &GenBounds::default(),
                        &mut rng,
                    );
                    let third: f64 = 3.0f64.ln();
                    let jitter = rng.gen_range(-third..third).exp();
                    (scene, args.source_amplitude * jitter)
                }
            };
            let views = render_scene(&scene)?;

            // Ground truth on the shared grid: the RGB viewpoint re-rendered
            // with ToF intrinsics, which is the grid the network predicts in.
            let mut shared = scene.clone();
            shared.calibration.rgb = shared.calibration.tof.clone();
            let gt_rgb = render_scene(&shared)?.rgb_depth;
            let gt_tof =
                forward_splat_depth(&gt_rgb, &calib.tof, &calib.tof, &rgb_to_tof, width, height)?;

            let id = frame_id(i);
            let paths = frame_paths(&args.out, &id, freqs.len());

            for (fi, &f) in freqs.iter().enumerate() {
                let emitter = EmitterConfig::new(f, frame_amplitude)?;
                let clean = simulate_correlations(&views.tof_depth, &views.tof_albedo, &emitter)?;
                let noise = NoiseConfig {
                    read_sigma: args.noise_sigma,
                    shot_scale: args.shot_scale,
                    ambient_dc: 0.0,
                    dropout_prob: args.dropout,
                    quantize_8bit: args.quantize8,
                    quantize_range: None,
                    seed: stream_seed(args.seed, Domain::Noise, (i as u64) * 2 + fi as u64),
                };
                let noisy = apply_noise(&clean, &noise)?;
                let path = if fi == 0 {
                    &paths.corr
                } else {
                    paths.corr2.as_ref().expect("two frequencies")
                };
                fs::write(path, encode_frame(&noisy))?;
            }
            write_pfm(&paths.rgb, &views.rgb_image)?;
            write_pfm(&paths.gt_rgb, &gt_rgb)?;
            write_pfm(&paths.gt_tof, &gt_tof)?;

            // Integrity check on what actually landed on disk: the stored
            // ToF ground truth must be exactly the splat of the stored
            // RGB-side one.
            let gt_rgb_back = crate::dataset::read_raster(&paths.gt_rgb, RasterKind::DepthM)?;
            let gt_tof_back = crate::dataset::read_raster(&paths.gt_tof, RasterKind::DepthM)?;
            let resplat = forward_splat_depth(
                &gt_rgb_back,
                &calib.tof,
                &calib.tof,
                &rgb_to_tof,
                width,
                height,
            )?;
            if !bits_equal(&resplat, &gt_tof_back) {
                return Err(CliError::Numeric(format!(
                    "frame {id}: stored gt_tof is not the splat of stored gt_rgb"
                )));
            }

            let far = gt_rgb
                .plane(0)
                .iter()
                .filter(|&&d| depth_valid(d) && d as f64 > far_limit)
                .count();
            let valid = gt_rgb.plane(0).iter().filter(|&&d| depth_valid(d)).count();
            Ok((far, valid))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let frames: Vec<FrameEntry> = (0..args.count)
        .map(|i| FrameEntry {
            id: frame_id(i),
            split: if (i + 1) % args.val_every == 0 {
                SPLIT_VAL.into()
            } else {
                SPLIT_TRAIN.into()
            },
        })
        .collect();
    let manifest = Manifest {
        width,
        height,
        d_min,
        d_max,
        freqs_hz: freqs,
        seed: args.seed,
        frames,
    };
    save_calibration(&args.out, &calib)?;
    manifest.save(&args.out)?;

    let far: usize = stats.iter().map(|s| s.0).sum();
    let valid: usize = stats.iter().map(|s| s.1).sum();
    let frac = if valid > 0 {
        far as f64 / valid as f64
    } else {
        0.0
    };
    println!(
        "simulate: {} frames at {}x{} -> {} ({:.1}% of ground truth beyond {:.3} m)",
        args.count,
        width,
        height,
        args.out.display(),
        100.0 * frac,
        far_limit
    );
    Ok(())
}
