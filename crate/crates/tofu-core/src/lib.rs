//! Shared containers and file formats for the indirect time-of-flight toolkit:
//! planar float rasters, four-channel correlation frames, camera calibration,
//! and the on-disk codecs (PFM, PGM8, TOFC).

pub mod calib;
pub mod error;
pub mod io;
pub mod raster;

pub use calib::{Calibration, Extrinsics, Intrinsics};
pub use error::CoreError;
pub use raster::{
    depth_valid, phase_valid, BitDepth, CorrelationFrame, Raster, RasterKind, INVALID_DEPTH,
    INVALID_PHASE,
};

/// Speed of light in vacuum, metres per second.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
