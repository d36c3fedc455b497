//! Forward model of a four-phase indirect time-of-flight sensor: scene
//! rendering, correlation image synthesis, and the capture noise chain.

pub mod correlation;
pub mod noise;
pub mod render;
pub mod scene;

pub use correlation::{
    correlate_closed_form, correlate_numerical, depth_to_phase, simulate_correlations,
    EmitterConfig,
};
pub use noise::{apply_noise, NoiseConfig};
pub use render::{render_scene, RenderedViews};
pub use scene::{Primitive, SceneSpec, Texture};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("{what} must be finite and positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },

    #[error("{what} = {value} outside {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("depth raster is {dw}x{dh} but albedo raster is {aw}x{ah}")]
    SizeMismatch { dw: u32, dh: u32, aw: u32, ah: u32 },

    #[error("expected raster kind {expected}, got {got:?}")]
    WrongKind {
        expected: &'static str,
        got: tofu_core::RasterKind,
    },

    #[error("albedo {value} at pixel ({x}, {y}) outside (0, 1]")]
    BadAlbedo { value: f32, x: u32, y: u32 },

    #[error("scene: {0}")]
    Scene(String),

    #[error(transparent)]
    Core(#[from] tofu_core::CoreError),
}
