//! Wrapped phase and amplitude from the four correlation planes. With the
//! channel convention C1..C4 = c_0, c_180, c_90, c_270:
//!   C1 - C2 = a cos(phi),  C3 - C4 = a sin(phi)
//! so atan2 recovers phi and the hypotenuse recovers a.

use std::f64::consts::PI;

use tofu_core::raster::plane;
use tofu_core::{CorrelationFrame, Raster, RasterKind, INVALID_PHASE};

/// A pixel is degenerate when both channel differences fall below this
/// fraction of the frame's peak magnitude.
pub const SIGNAL_EPS_REL: f64 = 1e-6;

fn peak_magnitude(frame: &CorrelationFrame) -> f64 {
    frame
        .raster
        .data()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs() as f64))
}

#[inline]
fn differences(frame: &CorrelationFrame, x: u32, y: u32) -> (f64, f64) {
    let r = &frame.raster;
    let sx = r.get(x, y, plane::DEG_0) as f64 - r.get(x, y, plane::DEG_180) as f64;
    let sy = r.get(x, y, plane::DEG_90) as f64 - r.get(x, y, plane::DEG_270) as f64;
    (sx, sy)
}

/// Per-pixel wrapped phase in [0, 2 pi). Degenerate pixels (no recoverable
/// signal) carry the negative invalid sentinel.
pub fn wrapped_phase(frame: &CorrelationFrame) -> Raster {
    let eps = SIGNAL_EPS_REL * peak_magnitude(frame);
    let (w, h) = (frame.width(), frame.height());
    let mut out = Raster::zeros(RasterKind::PhaseRad, w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = differences(frame, x, y);
            let degenerate = (sx == 0.0 && sy == 0.0) || (sx.abs() < eps && sy.abs() < eps);
            if degenerate {
                out.set(x, y, 0, INVALID_PHASE);
                continue;
            }
            let mut phi = sy.atan2(sx);
            if phi < 0.0 {
                phi += 2.0 * PI;
            }
            // atan2(-0, x) could leave us exactly at 2 pi after the shift
            if phi >= 2.0 * PI {
                phi = 0.0;
            }
            out.set(x, y, 0, phi as f32);
        }
    }
    out
}

/// Recovered correlation amplitude per pixel; 0 where degenerate.
pub fn amplitude_from_frame(frame: &CorrelationFrame) -> Raster {
    let eps = SIGNAL_EPS_REL * peak_magnitude(frame);
    let (w, h) = (frame.width(), frame.height());
    let mut out = Raster::zeros(RasterKind::Amplitude, w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = differences(frame, x, y);
            if sx.abs() < eps && sy.abs() < eps {
                continue;
            }
            out.set(x, y, 0, sx.hypot(sy) as f32);
        }
    }
    out
}
