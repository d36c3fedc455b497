//! Capture noise chain: dropout, ambient offset, read noise, scaled shot
//! noise, optional 8-bit quantization.
//!
//! Every pixel draws from its own RNG stream derived from (seed, pixel
//! index), so the result is independent of iteration order and identical
//! whether frames are processed serially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use tofu_core::{BitDepth, CorrelationFrame};

use crate::SensorError;

#[derive(Debug, Clone)]
pub struct NoiseConfig {
    /// Std-dev of additive Gaussian read noise (sensor units).
    pub read_sigma: f64,
    /// Shot-noise scale kappa; 0 disables the Poisson term.
    pub shot_scale: f64,
    /// Constant ambient offset added to every channel.
    pub ambient_dc: f64,
    /// Probability that a pixel drops out (all four channels zeroed before
    /// noise is applied).
    pub dropout_prob: f64,
    /// Quantize to 256 levels over `quantize_range`, storing dequantized
    /// values.
    pub quantize_8bit: bool,
    /// Affine quantization range (lo, hi). When `None` it is derived from
    /// the input frame as (-m - 3 sigma, m + 3 sigma) with m = max |value|.
    pub quantize_range: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            read_sigma: 0.0,
            shot_scale: 0.0,
            ambient_dc: 0.0,
            dropout_prob: 0.0,
            quantize_8bit: false,
            quantize_range: None,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<(), SensorError> {
        for (what, v) in [
            ("read_sigma", self.read_sigma),
            ("shot_scale", self.shot_scale),
            ("ambient_dc", self.ambient_dc),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SensorError::OutOfRange {
                    what,
                    value: v,
                    range: "[0, inf)",
                });
            }
        }
        if !self.dropout_prob.is_finite() || !(0.0..=1.0).contains(&self.dropout_prob) {
            return Err(SensorError::OutOfRange {
                what: "dropout_prob",
                value: self.dropout_prob,
                range: "[0, 1]",
            });
        }
        if let Some((lo, hi)) = self.quantize_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(SensorError::OutOfRange {
                    what: "quantize_range",
                    value: lo,
                    range: "lo < hi, finite",
                });
            }
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.read_sigma == 0.0
            && self.shot_scale == 0.0
            && self.ambient_dc == 0.0
            && self.dropout_prob == 0.0
            && !self.quantize_8bit
    }
}

/// splitmix64 finalizer; decorrelates consecutive pixel indices.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn pixel_rng(seed: u64, pixel: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed ^ mix(pixel)))
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Noise for one pixel's four channels. Pure in (config, pixel index,
/// values), which is what makes the whole chain order-independent.
fn noisy_pixel(cfg: &NoiseConfig, pixel: u64, values: [f64; 4]) -> [f64; 4] {
    let mut rng = pixel_rng(cfg.seed, pixel);
    let dropped = cfg.dropout_prob > 0.0 && rng.gen::<f64>() < cfg.dropout_prob;
    let normal = Normal::new(0.0, cfg.read_sigma).expect("validated sigma");

    let mut out = [0.0; 4];
    for (c, slot) in out.iter_mut().enumerate() {
        let v = if dropped { 0.0 } else { values[c] };
        let mut noisy = v + cfg.ambient_dc;
        if cfg.read_sigma > 0.0 {
            noisy += normal.sample(&mut rng);
        }
        if cfg.shot_scale > 0.0 {
            let lambda = cfg.shot_scale * (v.abs() + cfg.ambient_dc);
            if lambda > 0.0 {
                let p: f64 = Poisson::new(lambda).expect("lambda > 0").sample(&mut rng);
                noisy += sign(v) * (p - lambda) / cfg.shot_scale;
            }
        }
        *slot = noisy;
    }
    out
}

#[inline]
fn quantize(v: f64, lo: f64, hi: f64) -> f64 {
    let level = ((v - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0);
    lo + level / 255.0 * (hi - lo)
}

pub fn apply_noise(
    frame: &CorrelationFrame,
    cfg: &NoiseConfig,
) -> Result<CorrelationFrame, SensorError> {
    cfg.validate()?;
    if cfg.is_identity() {
        return Ok(frame.clone());
    }

    let mut out = frame.clone();
    let (w, h) = (frame.width(), frame.height());
    let n = out.raster.pixel_count();

    for y in 0..h {
        for x in 0..w {
            let pixel = y as u64 * w as u64 + x as u64;
            let vals = [
                frame.raster.get(x, y, 0) as f64,
                frame.raster.get(x, y, 1) as f64,
                frame.raster.get(x, y, 2) as f64,
                frame.raster.get(x, y, 3) as f64,
            ];
            let noisy = noisy_pixel(cfg, pixel, vals);
            for c in 0..4u32 {
                out.raster.set(x, y, c, noisy[c as usize] as f32);
            }
        }
    }

    if cfg.quantize_8bit {
        let (lo, hi) = match cfg.quantize_range {
            Some(r) => r,
            None => {
                let m = frame
                    .raster
                    .data()
                    .iter()
                    .fold(0.0f64, |acc, v| acc.max(v.abs() as f64));
                (
                    -m - 3.0 * cfg.read_sigma,
                    m + 3.0 * cfg.read_sigma,
                )
            }
        };
        debug_assert!(out.raster.data().len() == 4 * n);
        for v in out.raster.data_mut() {
            *v = quantize(*v as f64, lo, hi) as f32;
        }
        out.bit_depth = BitDepth::U8Quantized;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tofu_core::{Raster, RasterKind};

    fn frame(w: u32, h: u32, fill: f32) -> CorrelationFrame {
        CorrelationFrame::new(Raster::filled(RasterKind::Correlation, w, h, 4, fill), 2.0e7)
            .unwrap()
    }

    #[test]
    fn all_zero_config_is_bitwise_identity() {
        let f = frame(8, 8, 12.5);
        let out = apply_noise(&f, &NoiseConfig::default()).unwrap();
        assert_eq!(out.raster.data(), f.raster.data());
        assert_eq!(out.bit_depth, BitDepth::F32);
    }

    #[test]
    fn pixel_streams_are_order_independent() {
        let cfg = NoiseConfig {
            read_sigma: 2.0,
            shot_scale: 0.5,
            ambient_dc: 1.0,
            dropout_prob: 0.3,
            seed: 42,
            ..NoiseConfig::default()
        };
        let forward: Vec<[f64; 4]> = (0..64).map(|p| noisy_pixel(&cfg, p, [3.0; 4])).collect();
        let mut reversed: Vec<[f64; 4]> =
            (0..64).rev().map(|p| noisy_pixel(&cfg, p, [3.0; 4])).collect();
        reversed.reverse();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn full_dropout_with_no_other_noise_zeroes_exactly() {
        let f = frame(4, 4, 7.0);
        let cfg = NoiseConfig {
            dropout_prob: 1.0,
            seed: 1,
            ..NoiseConfig::default()
        };
        let out = apply_noise(&f, &cfg).unwrap();
        assert!(out.raster.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn quantization_is_idempotent_and_coarse() {
        let mut r = Raster::zeros(RasterKind::Correlation, 16, 16, 4);
        for (i, v) in r.data_mut().iter_mut().enumerate() {
            *v = ((i as f32) * 0.37).sin() * 40.0;
        }
        let f = CorrelationFrame::new(r, 2.0e7).unwrap();
        let cfg = NoiseConfig {
            quantize_8bit: true,
            quantize_range: Some((-50.0, 50.0)),
            ..NoiseConfig::default()
        };
        let once = apply_noise(&f, &cfg).unwrap();
        let twice = apply_noise(&once, &cfg).unwrap();
        assert_eq!(once.raster.data(), twice.raster.data());
        assert_eq!(once.bit_depth, BitDepth::U8Quantized);

        let mut distinct: Vec<u32> = once.raster.data().iter().map(|v| v.to_bits()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() <= 256, "{} levels", distinct.len());
    }

    #[test]
    fn same_seed_reproduces_different_seed_differs() {
        let f = frame(8, 8, 5.0);
        let cfg = NoiseConfig {
            read_sigma: 1.0,
            seed: 7,
            ..NoiseConfig::default()
        };
        let a = apply_noise(&f, &cfg).unwrap();
        let b = apply_noise(&f, &cfg).unwrap();
        assert_eq!(a.raster.data(), b.raster.data());

        let cfg2 = NoiseConfig { seed: 8, ..cfg };
        let c = apply_noise(&f, &cfg2).unwrap();
        assert_ne!(a.raster.data(), c.raster.data());
    }

    #[test]
    fn rejects_bad_config() {
        let f = frame(2, 2, 1.0);
        let bad = NoiseConfig {
            dropout_prob: 1.5,
            ..NoiseConfig::default()
        };
        assert!(apply_noise(&f, &bad).is_err());
        let bad = NoiseConfig {
            read_sigma: -1.0,
            ..NoiseConfig::default()
        };
        assert!(apply_noise(&f, &bad).is_err());
        let bad = NoiseConfig {
            quantize_8bit: true,
            quantize_range: Some((1.0, 1.0)),
            ..NoiseConfig::default()
        };
        assert!(apply_noise(&f, &bad).is_err());
    }
}
