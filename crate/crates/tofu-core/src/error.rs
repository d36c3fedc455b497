use thiserror::Error;

/// Errors raised by container construction, calibration parsing and codecs.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("raster {width}x{height}x{channels} needs {expected} values, got {got}")]
    ShapeMismatch {
        width: u32,
        height: u32,
        channels: u32,
        expected: usize,
        got: usize,
    },

    #[error("zero-sized raster ({width}x{height}x{channels})")]
    ZeroSized {
        width: u32,
        height: u32,
        channels: u32,
    },

    #[error("raster kind {kind:?} requires {expected} channel(s), got {got}")]
    KindChannelMismatch {
        kind: crate::raster::RasterKind,
        expected: u32,
        got: u32,
    },

    #[error("correlation frame requires a 4-channel correlation raster")]
    NotCorrelation,

    #[error("modulation frequency must be finite and positive, got {0}")]
    BadFrequency(f32),

    #[error("{format}: {reason}")]
    Codec {
        format: &'static str,
        reason: String,
    },

    #[error("non-finite value at index {index} (formats are NaN-free)")]
    NonFinite { index: usize },

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("calibration json: {0}")]
    CalibrationJson(#[from] serde_json::Error),
}

impl CoreError {
    pub(crate) fn codec(format: &'static str, reason: impl Into<String>) -> Self {
        CoreError::Codec {
            format,
            reason: reason.into(),
        }
    }
}
