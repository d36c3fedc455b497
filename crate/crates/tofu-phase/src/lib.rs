//! Classical depth reconstruction from four-phase correlation frames:
//! wrapped-phase extraction, amplitude recovery, and phase unwrapping
//! (fixed wrap count or dual-frequency consistency search).

mod extract;
mod unwrap;

pub use extract::{amplitude_from_frame, wrapped_phase, SIGNAL_EPS_REL};
pub use unwrap::{
    unwrap_dual_frequency, unwrap_fixed, unwrap_with_n_map, DualFreqConfig, UnwrapResult,
};

use thiserror::Error;
use tofu_core::SPEED_OF_LIGHT_M_S;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("expected a {expected} raster, got {got:?}")]
    WrongKind {
        expected: &'static str,
        got: tofu_core::RasterKind,
    },

    #[error("{what} must be finite and positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },

    #[error("phase {0} is negative")]
    NegativePhase(f64),

    #[error("rasters are {w1}x{h1} and {w2}x{h2}")]
    SizeMismatch { w1: u32, h1: u32, w2: u32, h2: u32 },

    #[error("dual-frequency unwrap needs two distinct frequencies, got {0} twice")]
    EqualFrequencies(f64),

    #[error("n map has {got} entries for {expected} pixels")]
    BadNMap { expected: usize, got: usize },

    #[error(transparent)]
    Core(#[from] tofu_core::CoreError),
}

/// Unambiguous (half-wavelength) range c / (2 f) in metres.
pub fn unambiguous_range_m(mod_freq_hz: f64) -> Result<f64, PhaseError> {
    if !mod_freq_hz.is_finite() || mod_freq_hz <= 0.0 {
        return Err(PhaseError::NotPositive {
            what: "modulation frequency",
            value: mod_freq_hz,
        });
    }
    Ok(SPEED_OF_LIGHT_M_S / (2.0 * mod_freq_hz))
}

/// Depth for an (unwrapped) phase: D = c/(2f) * phi/(2 pi).
pub fn phase_to_depth(phase_rad: f64, mod_freq_hz: f64) -> Result<f64, PhaseError> {
    if !phase_rad.is_finite() || phase_rad < 0.0 {
        return Err(PhaseError::NegativePhase(phase_rad));
    }
    let range = unambiguous_range_m(mod_freq_hz)?;
    Ok(range * phase_rad / (2.0 * std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_megahertz_range() {
        let r = unambiguous_range_m(20.0e6).unwrap();
        assert!((r - 7.49481145).abs() < 1e-6, "range {r}");
    }

    #[test]
    fn full_turn_is_full_range() {
        let d = phase_to_depth(2.0 * std::f64::consts::PI, 20.0e6).unwrap();
        assert!((d - 7.49481145).abs() < 1e-6);
    }

    #[test]
    fn zero_phase_is_zero_depth() {
        assert_eq!(phase_to_depth(0.0, 20.0e6).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_scalars() {
        assert!(phase_to_depth(-0.1, 20.0e6).is_err());
        assert!(phase_to_depth(1.0, 0.0).is_err());
        assert!(unambiguous_range_m(-5.0).is_err());
    }
}
