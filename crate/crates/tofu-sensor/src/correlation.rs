//! Correlation signal model. The sensor demodulates the returned wave
//! against a control signal offset by tau; over whole modulation periods the
//! cross-correlation collapses to (a/2)*cos(phi - tau), which is what the
//! four-phase trick samples at tau = 0, 90, 180, 270 degrees.

use tofu_core::raster::plane;
use tofu_core::{depth_valid, CorrelationFrame, Raster, RasterKind, SPEED_OF_LIGHT_M_S};

use crate::SensorError;

/// Modulated emitter parameters. `source_amplitude` is the correlation
/// amplitude a hypothetical unit-albedo target at 1 m would return.
#[derive(Debug, Clone, Copy)]
pub struct EmitterConfig {
    pub mod_freq_hz: f64,
    pub source_amplitude: f64,
}

impl EmitterConfig {
    pub fn new(mod_freq_hz: f64, source_amplitude: f64) -> Result<Self, SensorError> {
        if !mod_freq_hz.is_finite() || mod_freq_hz <= 0.0 {
            return Err(SensorError::NotPositive {
                what: "modulation frequency",
                value: mod_freq_hz,
            });
        }
        if !source_amplitude.is_finite() || source_amplitude <= 0.0 {
            return Err(SensorError::NotPositive {
                what: "source amplitude",
                value: source_amplitude,
            });
        }
        Ok(EmitterConfig {
            mod_freq_hz,
            source_amplitude,
        })
    }
}

/// Closed-form correlation of a return with amplitude `a` and phase delay
/// `phi` against the control phase `tau`.
#[inline]
pub fn correlate_closed_form(a: f64, phi: f64, tau: f64) -> f64 {
    0.5 * a * (phi - tau).cos()
}

/// Same quantity by trapezoidal integration of
/// (1/T) * integral of cos(w t - tau) * (1 + a cos(w t - phi)) dt
/// over a window of `periods` whole modulation periods. Exists as the
/// independent check on [`correlate_closed_form`]; the window should cover
/// at least 100 periods for the oscillatory terms to cancel cleanly.
pub fn correlate_numerical(
    a: f64,
    phi: f64,
    tau: f64,
    mod_freq_hz: f64,
    periods: u32,
    steps_per_period: u32,
) -> Result<f64, SensorError> {
    if !mod_freq_hz.is_finite() || mod_freq_hz <= 0.0 {
        return Err(SensorError::NotPositive {
            what: "modulation frequency",
            value: mod_freq_hz,
        });
    }
    if periods == 0 {
        return Err(SensorError::NotPositive {
            what: "integration periods",
            value: 0.0,
        });
    }
    if steps_per_period == 0 {
        return Err(SensorError::NotPositive {
            what: "steps per period",
            value: 0.0,
        });
    }
    let omega = 2.0 * std::f64::consts::PI * mod_freq_hz;
    let window = periods as f64 / mod_freq_hz;
    let steps = (periods as u64) * (steps_per_period as u64);
    let dt = window / steps as f64;
    let integrand = |t: f64| (omega * t - tau).cos() * (1.0 + a * (omega * t - phi).cos());

    // symmetric window [-T/2, T/2]
    let t0 = -0.5 * window;
    let mut acc = 0.5 * (integrand(t0) + integrand(t0 + window));
    for i in 1..steps {
        acc += integrand(t0 + i as f64 * dt);
    }
    Ok(acc * dt / window)
}

/// Phase delay accumulated over the round trip to a target at `depth_m`:
/// phi = 4 pi f d / c. Grows past 2 pi beyond the unambiguous range.
pub fn depth_to_phase(depth_m: f64, mod_freq_hz: f64) -> Result<f64, SensorError> {
    if !depth_m.is_finite() || depth_m <= 0.0 {
        return Err(SensorError::NotPositive {
            what: "depth",
            value: depth_m,
        });
    }
    if !mod_freq_hz.is_finite() || mod_freq_hz <= 0.0 {
        return Err(SensorError::NotPositive {
            what: "modulation frequency",
            value: mod_freq_hz,
        });
    }
    Ok(4.0 * std::f64::consts::PI * mod_freq_hz * depth_m / SPEED_OF_LIGHT_M_S)
}

/// Control phases in plane order (0, 180, 90, 270 degrees).
const TAUS: [f64; 4] = [
    0.0,
    std::f64::consts::PI,
    std::f64::consts::FRAC_PI_2,
    1.5 * std::f64::consts::PI,
];

/// Synthesizes a noiseless four-phase frame from ground-truth depth and
/// albedo. Return amplitude follows the inverse-square law
/// a = a0 * albedo / d^2; pixels without a depth measurement produce four
/// exact zeros.
pub fn simulate_correlations(
    depth: &Raster,
    albedo: &Raster,
    emitter: &EmitterConfig,
) -> Result<CorrelationFrame, SensorError> {
    if depth.kind() != RasterKind::DepthM {
        return Err(SensorError::WrongKind {
            expected: "DepthM",
            got: depth.kind(),
        });
    }
    if albedo.channels() != 1 {
        return Err(SensorError::WrongKind {
            expected: "single-channel albedo",
            got: albedo.kind(),
        });
    }
    if depth.width() != albedo.width() || depth.height() != albedo.height() {
        return Err(SensorError::SizeMismatch {
            dw: depth.width(),
            dh: depth.height(),
            aw: albedo.width(),
            ah: albedo.height(),
        });
    }

    let (w, h) = (depth.width(), depth.height());
    let mut out = Raster::zeros(RasterKind::Correlation, w, h, 4);
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y, 0);
            if !depth_valid(d) {
                continue; // stays all-zero
            }
            let rho = albedo.get(x, y, 0);
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(SensorError::BadAlbedo {
                    value: rho,
                    x,
                    y,
                });
            }
            let d = d as f64;
            let a = emitter.source_amplitude * rho as f64 / (d * d);
            let phi = depth_to_phase(d, emitter.mod_freq_hz)?;
            for (c, tau) in TAUS.iter().enumerate() {
                out.set(x, y, c as u32, correlate_closed_form(a, phi, *tau) as f32);
            }
        }
    }
    CorrelationFrame::new(out, emitter.mod_freq_hz as f32).map_err(SensorError::from)
}

/// Recoverable amplitude of a noiseless frame pixel, sqrt((C1-C2)^2 + (C3-C4)^2).
/// Mostly a test hook; the reconstruction-side twin lives with the phase ops.
pub fn pixel_amplitude(frame: &CorrelationFrame, x: u32, y: u32) -> f64 {
    let r = &frame.raster;
    let sx = r.get(x, y, plane::DEG_0) as f64 - r.get(x, y, plane::DEG_180) as f64;
    let sy = r.get(x, y, plane::DEG_90) as f64 - r.get(x, y, plane::DEG_270) as f64;
    (sx * sx + sy * sy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_at_zero_phase() {
        assert!((correlate_closed_form(1.0, 0.0, 0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_form_quadrature_is_zero() {
        assert!(correlate_closed_form(1.0, std::f64::consts::FRAC_PI_2, 0.0).abs() < 1e-12);
    }

    #[test]
    fn full_range_maps_to_two_pi() {
        let range = SPEED_OF_LIGHT_M_S / (2.0 * 20.0e6); // 7.49481 m
        let phi = depth_to_phase(range, 20.0e6).unwrap();
        assert!((phi - 2.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        assert!(depth_to_phase(0.0, 20.0e6).is_err());
        assert!(depth_to_phase(-1.0, 20.0e6).is_err());
        assert!(depth_to_phase(1.0, 0.0).is_err());
        assert!(correlate_numerical(1.0, 0.0, 0.0, 20.0e6, 0, 100).is_err());
        assert!(EmitterConfig::new(20.0e6, 0.0).is_err());
    }

    #[test]
    fn numerical_integral_trivial_case() {
        let v = correlate_numerical(1.0, 0.0, 0.0, 20.0e6, 100, 100).unwrap();
        assert!((v - 0.5).abs() < 1e-6, "got {v}");
    }
}
