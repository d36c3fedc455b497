//! On-disk dataset layout and the manifest document.
//!
//! A dataset directory holds, per frame id `NNNN`:
//!
//! ```text
//! corr_NNNN.tofc    raw correlation capture, first frequency
//! corr2_NNNN.tofc   second capture, dual-frequency datasets only
//! rgb_NNNN.pfm      color image on the RGB camera grid
//! gt_rgb_NNNN.pfm   ground-truth depth at the RGB position, ToF intrinsics
//! gt_tof_NNNN.pfm   the same surface forward-splatted into the ToF view
//! ```
//!
//! plus `calibration.json` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tofu_core::{Calibration, Raster, RasterKind};

use crate::args::SplitArg;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const SPLIT_TRAIN: &str = "train";
pub const SPLIT_VAL: &str = "val";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameEntry {
    pub id: String,
    pub split: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub width: u32,
    pub height: u32,
    pub d_min: f64,
    pub d_max: f64,
    /// Capture frequencies; `corr` holds the first, `corr2` the second.
    pub freqs_hz: Vec<f64>,
    pub seed: u64,
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone)]
pub struct FramePaths {
    pub corr: PathBuf,
    pub corr2: Option<PathBuf>,
    pub rgb: PathBuf,
    pub gt_rgb: PathBuf,
    pub gt_tof: PathBuf,
}

pub fn frame_id(index: u32) -> String {
    format!("{index:04}")
}

pub fn frame_paths(dir: &Path, id: &str, freq_count: usize) -> FramePaths {
    FramePaths {
        corr: dir.join(format!("corr_{id}.tofc")),
        corr2: if freq_count == 2 {
            Some(dir.join(format!("corr2_{id}.tofc")))
        } else {
            None
        },
        rgb: dir.join(format!("rgb_{id}.pfm")),
        gt_rgb: dir.join(format!("gt_rgb_{id}.pfm")),
        gt_tof: dir.join(format!("gt_tof_{id}.pfm")),
    }
}

impl Manifest {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.width == 0 || self.height == 0 {
            return Err(CliError::Validation("manifest: zero extent".into()));
        }
        if !(self.d_min.is_finite() && self.d_max.is_finite())
            || self.d_min <= 0.0
            || self.d_min >= self.d_max
        {
            return Err(CliError::Validation(format!(
                "manifest: bad depth range {}..{}",
                self.d_min, self.d_max
            )));
        }
        if self.freqs_hz.is_empty() || self.freqs_hz.len() > 2 {
            return Err(CliError::Validation(format!(
                "manifest: expected 1 or 2 frequencies, got {}",
                self.freqs_hz.len()
            )));
        }
        for f in &self.freqs_hz {
            if !f.is_finite() || *f <= 0.0 {
                return Err(CliError::Validation(format!("manifest: bad frequency {f}")));
            }
        }
        if self.freqs_hz.len() == 2 && self.freqs_hz[0] == self.freqs_hz[1] {
            return Err(CliError::Validation(
                "manifest: dual-frequency capture needs distinct frequencies".into(),
            ));
        }
        if self.frames.is_empty() {
            return Err(CliError::Validation("manifest: no frames".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.frames {
            if !seen.insert(e.id.as_str()) {
                return Err(CliError::Validation(format!(
                    "manifest: duplicate frame id {}",
                    e.id
                )));
            }
            if e.split != SPLIT_TRAIN && e.split != SPLIT_VAL {
                return Err(CliError::Validation(format!(
                    "manifest: frame {} has unknown split {:?}",
                    e.id, e.split
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Manifest, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn select(&self, split: SplitArg) -> Vec<&FrameEntry> {
        self.frames
            .iter()
            .filter(|e| match split {
                SplitArg::Train => e.split == SPLIT_TRAIN,
                SplitArg::Val => e.split == SPLIT_VAL,
                SplitArg::All => true,
            })
            .collect()
    }

    pub fn paths(&self, dir: &Path, id: &str) -> FramePaths {
        frame_paths(dir, id, self.freqs_hz.len())
    }
}

pub fn save_calibration(dir: &Path, calib: &Calibration) -> Result<(), CliError> {
    let mut text = calib.to_json();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(dir.join(CALIBRATION_FILE), text)?;
    Ok(())
}

pub fn load_calibration(dir: &Path) -> Result<Calibration, CliError> {
    let path = dir.join(CALIBRATION_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(Calibration::from_json(&text)?)
}

/// Reads a PFM/TOFC raster and retags it with the expected kind.
pub fn read_raster(path: &Path, kind: RasterKind) -> Result<Raster, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let decoded = tofu_core::io::decode_raster(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    decoded
        .raster
        .retag(kind)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Reads a TOFC correlation capture.
pub fn read_frame(path: &Path) -> Result<tofu_core::CorrelationFrame, CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    tofu_core::io::decode_frame(&bytes)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
