//! Input preparation shared by training, evaluation and inference: the
//! three-channel depth stack from raw correlations, color alignment onto
//! the ToF grid, and whole-sample loading.

use std::path::Path;

use tofu_core::{depth_valid, Calibration, CorrelationFrame, Raster, RasterKind};
use tofu_geometry::intrinsic_align;
use tofu_nn::{Tensor, WarpContext};
use tofu_phase::{
    amplitude_from_frame, unwrap_dual_frequency, unwrap_fixed, wrapped_phase, DualFreqConfig,
};

use crate::dataset::{read_frame, read_raster, FrameEntry, Manifest};
use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct StackOptions {
    /// Depth normalization constant; the trained network's output ceiling.
    pub d_max: f64,
    /// Dual-frequency consistency gate, metres.
    pub residual_max: f64,
}

/// Classical depth plus amplitude and validity, each normalized to [0, 1].
#[derive(Debug, Clone)]
pub struct TofStack {
    pub tensor: Tensor<f32>,
    /// The unnormalized reconstruction, for inspection.
    pub depth: Raster,
    pub amplitude: Raster,
}

/// One training or evaluation sample on the shared ToF-intrinsics grid.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub rgb: Tensor<f32>,
    pub tof: Tensor<f32>,
    pub gt_rgb: Tensor<f32>,
    pub gt_tof: Tensor<f32>,
}

/// Depth for the stack: dual-frequency when a second capture exists,
/// otherwise raw phase depth with wrap count zero.
pub fn stack_depth(
    corr: &CorrelationFrame,
    corr2: Option<&CorrelationFrame>,
    opt: &StackOptions,
) -> Result<Raster, CliError> {
    let phase = wrapped_phase(corr);
    match corr2 {
        Some(c2) => {
            let phase2 = wrapped_phase(c2);
            let cfg = DualFreqConfig {
                max_range_m: opt.d_max,
                residual_max_m: opt.residual_max,
            };
            Ok(unwrap_dual_frequency(
                &phase,
                &phase2,
                corr.mod_freq_hz as f64,
                c2.mod_freq_hz as f64,
                &cfg,
            )?
            .depth)
        }
        None => Ok(unwrap_fixed(&phase, 0, corr.mod_freq_hz as f64)?),
    }
}

pub fn tof_stack(
    corr: &CorrelationFrame,
    corr2: Option<&CorrelationFrame>,
    opt: &StackOptions,
) -> Result<TofStack, CliError> {
    if let Some(c2) = corr2 {
        if (c2.width(), c2.height()) != (corr.width(), corr.height()) {
            return Err(CliError::Validation(format!(
                "correlation captures disagree on extent: {}x{} vs {}x{}",
                corr.width(),
                corr.height(),
                c2.width(),
                c2.height()
            )));
        }
    }
    if opt.d_max <= 0.0 || !opt.d_max.is_finite() {
        return Err(CliError::Validation(format!("bad d_max {}", opt.d_max)));
    }
    let depth = stack_depth(corr, corr2, opt)?;
    let amplitude = amplitude_from_frame(corr);

    let (w, h) = (corr.width() as usize, corr.height() as usize);
    let amp_max = amplitude
        .data()
        .iter()
        .copied()
        .fold(0.0f32, f32::max)
        .max(f32::MIN_POSITIVE);
    let mut data = vec![0.0f32; 3 * w * h];
    for (i, (&d, &a)) in depth
        .plane(0)
        .iter()
        .zip(amplitude.plane(0))
        .enumerate()
    {
        if depth_valid(d) {
            data[i] = (d as f64 / opt.d_max) as f32;
            data[2 * w * h + i] = 1.0;
        }
        data[w * h + i] = (a / amp_max).clamp(0.0, 1.0);
    }
    let tensor = Tensor::new(vec![3, h, w], data)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(TofStack {
        tensor,
        depth,
        amplitude,
    })
}

/// Resamples the raw color image onto the ToF intrinsic grid.
pub fn aligned_rgb(rgb_raw: &Raster, calib: &Calibration) -> Result<Tensor<f32>, CliError> {
    if rgb_raw.kind() != RasterKind::Rgb {
        return Err(CliError::Validation(format!(
            "expected a color image, got {:?}",
            rgb_raw.kind()
        )));
    }
    let aligned = intrinsic_align(rgb_raw, &calib.rgb, &calib.tof);
    Ok(Tensor::from_raster(&aligned))
}

/// Geometry handed to the network: both branches live on the ToF intrinsic
/// grid, so only the camera positions differ.
pub fn warp_context(calib: &Calibration) -> WarpContext {
    WarpContext {
        k_tof: calib.tof.clone(),
        k_rgb: calib.tof.clone(),
        rgb_to_tof: calib.tof_to_rgb.inverse(),
    }
}

pub fn load_sample(
    dir: &Path,
    manifest: &Manifest,
    calib: &Calibration,
    entry: &FrameEntry,
    opt: &StackOptions,
) -> Result<Sample, CliError> {
    let paths = manifest.paths(dir, &entry.id);
    let corr = read_frame(&paths.corr)?;
    let corr2 = match &paths.corr2 {
        Some(p) => Some(read_frame(p)?),
        None => None,
    };
    let rgb_raw = read_raster(&paths.rgb, RasterKind::Rgb)?;
    let gt_rgb = read_raster(&paths.gt_rgb, RasterKind::DepthM)?;
    let gt_tof = read_raster(&paths.gt_tof, RasterKind::DepthM)?;
    for (name, w, h) in [
        ("corr", corr.width(), corr.height()),
        ("rgb", rgb_raw.width(), rgb_raw.height()),
        ("gt_rgb", gt_rgb.width(), gt_rgb.height()),
        ("gt_tof", gt_tof.width(), gt_tof.height()),
    ] {
        if (w, h) != (manifest.width, manifest.height) {
            return Err(CliError::Validation(format!(
                "frame {}: {name} is {w}x{h}, manifest says {}x{}",
                entry.id, manifest.width, manifest.height
            )));
        }
    }
    let stack = tof_stack(&corr, corr2.as_ref(), opt)?;
    Ok(Sample {
        id: entry.id.clone(),
        rgb: aligned_rgb(&rgb_raw, calib)?,
        tof: stack.tensor,
        gt_rgb: Tensor::from_raster(&gt_rgb),
        gt_tof: Tensor::from_raster(&gt_tof),
    })
}
