//! Phase unwrapping: phi = phi_wrapped + 2 pi n for integer n. The fixed
//! variant takes n from the caller; the dual-frequency variant searches the
//! (n1, n2) grid for the most consistent candidate pair, which at these
//! candidate counts is small enough to enumerate outright.

use std::f64::consts::PI;

use tofu_core::{phase_valid, Raster, RasterKind, INVALID_DEPTH};

use crate::{phase_to_depth, unambiguous_range_m, PhaseError};

fn expect_phase(raster: &Raster) -> Result<(), PhaseError> {
    if raster.kind() != RasterKind::PhaseRad {
        return Err(PhaseError::WrongKind {
            expected: "PhaseRad",
            got: raster.kind(),
        });
    }
    Ok(())
}

/// Unwraps every valid pixel with the same wrap count.
pub fn unwrap_fixed(phase: &Raster, n: u32, mod_freq_hz: f64) -> Result<Raster, PhaseError> {
    expect_phase(phase)?;
    let range = unambiguous_range_m(mod_freq_hz)?;
    let mut out = Raster::zeros(RasterKind::DepthM, phase.width(), phase.height(), 1);
    for (dst, src) in out.data_mut().iter_mut().zip(phase.data()) {
        *dst = if phase_valid(*src) {
            (range * (*src as f64 / (2.0 * PI) + n as f64)) as f32
        } else {
            INVALID_DEPTH
        };
    }
    Ok(out)
}

/// Per-pixel wrap counts, row-major. Used when an external source (ground
/// truth, a coarser sensor) supplies n.
pub fn unwrap_with_n_map(
    phase: &Raster,
    n_map: &[u32],
    mod_freq_hz: f64,
) -> Result<Raster, PhaseError> {
    expect_phase(phase)?;
    if n_map.len() != phase.pixel_count() {
        return Err(PhaseError::BadNMap {
            expected: phase.pixel_count(),
            got: n_map.len(),
        });
    }
    let range = unambiguous_range_m(mod_freq_hz)?;
    let mut out = Raster::zeros(RasterKind::DepthM, phase.width(), phase.height(), 1);
    for ((dst, src), n) in out.data_mut().iter_mut().zip(phase.data()).zip(n_map) {
        *dst = if phase_valid(*src) {
            (range * (*src as f64 / (2.0 * PI) + *n as f64)) as f32
        } else {
            INVALID_DEPTH
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct DualFreqConfig {
    /// Largest depth considered when enumerating candidates, metres.
    pub max_range_m: f64,
    /// Candidate pairs whose two depths disagree by more than this are
    /// rejected and the pixel marked invalid.
    pub residual_max_m: f64,
}

impl Default for DualFreqConfig {
    fn default() -> Self {
        DualFreqConfig {
            max_range_m: 15.0,
            residual_max_m: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnwrapResult {
    pub depth: Raster,
    /// |d1 - d2| of the chosen pair; the consistency score.
    pub residual: Raster,
    /// Chosen wrap counts (n1, n2) per pixel, row-major. Meaningful only
    /// where the depth is valid.
    pub n_map: Vec<[u32; 2]>,
}

/// Picks the candidate pair with the smallest depth disagreement; exact
/// ties go to the smallest n1 + n2.
pub(crate) fn select_pair(d1: &[f64], d2: &[f64]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (n1, a) in d1.iter().enumerate() {
        for (n2, b) in d2.iter().enumerate() {
            let diff = (a - b).abs();
            let better = match best {
                None => true,
                Some((b1, b2, bd)) => diff < bd || (diff == bd && n1 + n2 < b1 + b2),
            };
            if better {
                best = Some((n1, n2, diff));
            }
        }
    }
    best
}

fn candidates(base: f64, range: f64, max_range: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut n = 0u32;
    loop {
        let d = base + n as f64 * range;
        if d > max_range + 1e-9 {
            break;
        }
        out.push(d);
        n += 1;
    }
    out
}

/// Resolves wrap ambiguity from two captures of the same scene at distinct
/// modulation frequencies. Output depth is the mean of the agreeing pair.
pub fn unwrap_dual_frequency(
    phase1: &Raster,
    phase2: &Raster,
    freq1_hz: f64,
    freq2_hz: f64,
    cfg: &DualFreqConfig,
) -> Result<UnwrapResult, PhaseError> {
    expect_phase(phase1)?;
    expect_phase(phase2)?;
    if phase1.width() != phase2.width() || phase1.height() != phase2.height() {
        return Err(PhaseError::SizeMismatch {
            w1: phase1.width(),
            h1: phase1.height(),
            w2: phase2.width(),
            h2: phase2.height(),
        });
    }
    let range1 = unambiguous_range_m(freq1_hz)?;
    let range2 = unambiguous_range_m(freq2_hz)?;
    if freq1_hz == freq2_hz {
        return Err(PhaseError::EqualFrequencies(freq1_hz));
    }
    if !cfg.max_range_m.is_finite() || cfg.max_range_m <= 0.0 {
        return Err(PhaseError::NotPositive {
            what: "max_range_m",
            value: cfg.max_range_m,
        });
    }
    if !cfg.residual_max_m.is_finite() || cfg.residual_max_m <= 0.0 {
        return Err(PhaseError::NotPositive {
            what: "residual_max_m",
            value: cfg.residual_max_m,
        });
    }

    let (w, h) = (phase1.width(), phase1.height());
    let mut depth = Raster::zeros(RasterKind::DepthM, w, h, 1);
    let mut residual = Raster::zeros(RasterKind::Generic, w, h, 1);
    let mut n_map = vec![[0u32; 2]; phase1.pixel_count()];

    for y in 0..h {
        for x in 0..w {
            let p1 = phase1.get(x, y, 0);
            let p2 = phase2.get(x, y, 0);
            if !phase_valid(p1) || !phase_valid(p2) {
                depth.set(x, y, 0, INVALID_DEPTH);
                continue;
            }
            let d1 = candidates(
                phase_to_depth(p1 as f64, freq1_hz)?,
                range1,
                cfg.max_range_m,
            );
            let d2 = candidates(
                phase_to_depth(p2 as f64, freq2_hz)?,
                range2,
                cfg.max_range_m,
            );
            let Some((n1, n2, diff)) = select_pair(&d1, &d2) else {
                depth.set(x, y, 0, INVALID_DEPTH);
                continue;
            };
            let pixel = (y * w + x) as usize;
            n_map[pixel] = [n1 as u32, n2 as u32];
            residual.set(x, y, 0, diff as f32);
            if diff > cfg.residual_max_m {
                depth.set(x, y, 0, INVALID_DEPTH);
            } else {
                depth.set(x, y, 0, (0.5 * (d1[n1] + d2[n2])) as f32);
            }
        }
    }

    Ok(UnwrapResult {
        depth,
        residual,
        n_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tofu_core::INVALID_PHASE;

    #[test]
    fn fixed_unwrap_adds_whole_ranges() {
        // phi = pi, n = 1 at 20 MHz: half a range plus one full range
        let phase = Raster::new(RasterKind::PhaseRad, 1, 1, 1, vec![std::f64::consts::PI as f32])
            .unwrap();
        let d = unwrap_fixed(&phase, 1, 20.0e6).unwrap().get(0, 0, 0);
        assert!((d - 11.24221).abs() < 1e-4, "depth {d}");
    }

    #[test]
    fn fixed_unwrap_preserves_invalid() {
        let phase = Raster::new(RasterKind::PhaseRad, 2, 1, 1, vec![1.0, INVALID_PHASE]).unwrap();
        let d = unwrap_fixed(&phase, 0, 20.0e6).unwrap();
        assert!(d.get(0, 0, 0) > 0.0);
        assert_eq!(d.get(1, 0, 0), INVALID_DEPTH);
    }

    #[test]
    fn n_map_length_is_checked() {
        let phase = Raster::new(RasterKind::PhaseRad, 2, 1, 1, vec![1.0, 1.0]).unwrap();
        assert!(unwrap_with_n_map(&phase, &[0], 20.0e6).is_err());
    }

    #[test]
    fn tie_breaks_to_smallest_wrap_sum() {
        // two pairs with identical residual 0.5: (0,1) and (1,2)
        let d1 = [6.0, 13.0];
        let d2 = [0.5, 5.5, 12.5];
        let (n1, n2, diff) = select_pair(&d1, &d2).unwrap();
        assert_eq!((n1, n2), (0, 1));
        assert_eq!(diff, 0.5);
    }

    #[test]
    fn kind_is_enforced() {
        let not_phase = Raster::zeros(RasterKind::DepthM, 2, 2, 1);
        assert!(unwrap_fixed(&not_phase, 0, 20.0e6).is_err());
    }
}
