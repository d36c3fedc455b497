//! Warp fields and bilinear sampling.

use tofu_core::{Raster, RasterKind};

/// Coordinates closer than this to an integer are snapped onto it.
///
/// Keeps analytically-identity warps (same intrinsics, zero baseline) exact:
/// without the snap, floating-point noise of order 1e-13 px would turn a
/// pass-through into a blur of weight 1-epsilon.
pub const COORD_SNAP: f64 = 1e-6;

/// Destination-sized table of source-image sample positions.
///
/// Entry `(x, y)` of a field says: destination pixel `(x, y)` reads the
/// source image at `(sx[i], sy[i])`. Invalid entries mark destination pixels
/// with no usable source (no depth, behind the source camera, or projected
/// outside the source frame); samplers write 0.0 there.
#[derive(Debug, Clone)]
pub struct WarpField {
    width: u32,
    height: u32,
    sx: Vec<f64>,
    sy: Vec<f64>,
    valid: Vec<bool>,
}

impl WarpField {
    /// A field of the given size with every entry invalid.
    pub fn invalid(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            sx: vec![0.0; n],
            sy: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn idx(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    /// Source coordinates for destination pixel `(x, y)`, or `None` when the
    /// entry is invalid.
    pub fn get(&self, x: u32, y: u32) -> Option<(f64, f64)> {
        let i = self.idx(x, y);
        if self.valid[i] {
            Some((self.sx[i], self.sy[i]))
        } else {
            None
        }
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.valid[self.idx(x, y)]
    }

    /// Writes one entry, snapping near-integer coordinates onto the lattice.
    pub fn set(&mut self, x: u32, y: u32, sx: f64, sy: f64) {
        let i = self.idx(x, y);
        self.sx[i] = snap(sx);
        self.sy[i] = snap(sy);
        self.valid[i] = true;
    }

    pub fn set_invalid(&mut self, x: u32, y: u32) {
        let i = self.idx(x, y);
        self.valid[i] = false;
    }

    /// Number of valid entries.
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

pub(crate) fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < COORD_SNAP {
        r
    } else {
        v
    }
}

/// True when `(x, y)` lies inside the sampleable area of a `w` x `h` image.
///
/// The sampleable area is the closed rectangle spanned by the outermost
/// pixel centers, so every bilinear tap hits a real pixel.
pub(crate) fn in_bounds(x: f64, y: f64, w: u32, h: u32) -> bool {
    x >= 0.0 && y >= 0.0 && x <= (w - 1) as f64 && y <= (h - 1) as f64
}

/// Bilinear sample of one channel at `(x, y)`.
///
/// Returns `None` outside the sampleable area. Inside it the four taps are
/// clamped to the image, which reduces to exact lookup on the boundary row
/// and column.
pub fn bilinear_sample(raster: &Raster, channel: u32, x: f64, y: f64) -> Option<f32> {
    if !in_bounds(x, y, raster.width(), raster.height()) {
        return None;
    }
    let (x0, y0, x1, y1, fx, fy) = taps(raster.width(), raster.height(), x, y);
    let v00 = raster.get(x0, y0, channel) as f64;
    let v10 = raster.get(x1, y0, channel) as f64;
    let v01 = raster.get(x0, y1, channel) as f64;
    let v11 = raster.get(x1, y1, channel) as f64;
    let top = v00 * (1.0 - fx) + v10 * fx;
    let bot = v01 * (1.0 - fx) + v11 * fx;
    Some((top * (1.0 - fy) + bot * fy) as f32)
}

/// Bilinear sample of a depth map that skips invalid taps.
///
/// Weights of the surviving taps are renormalized, so a sample adjacent to a
/// hole takes its value from the valid side instead of averaging a zero in.
/// Returns `None` outside the image or when every tap is invalid.
fn bilinear_sample_depth(raster: &Raster, x: f64, y: f64) -> Option<f32> {
    if !in_bounds(x, y, raster.width(), raster.height()) {
        return None;
    }
    let (x0, y0, x1, y1, fx, fy) = taps(raster.width(), raster.height(), x, y);
    let tap = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ];
    let mut acc = 0.0f64;
    let mut wsum = 0.0f64;
    for (tx, ty, w) in tap {
        if w == 0.0 {
            continue;
        }
        let v = raster.get(tx, ty, 0);
        if tofu_core::depth_valid(v) {
            acc += v as f64 * w;
            wsum += w;
        }
    }
    if wsum > 0.0 {
        Some((acc / wsum) as f32)
    } else {
        None
    }
}

fn taps(w: u32, h: u32, x: f64, y: f64) -> (u32, u32, u32, u32, f64, f64) {
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    (x0, y0, x1, y1, x - x0 as f64, y - y0 as f64)
}

/// Pulls `source` through `field`: output pixel `(x, y)` is the source
/// sampled at `field.get(x, y)`.
///
/// Invalid field entries produce 0.0 in every channel, which doubles as the
/// invalid-depth sentinel when the source is a depth map. Depth maps are
/// sampled with hole-aware renormalizing bilinear taps; all other kinds use
/// plain bilinear over the stored values. The output keeps the source kind
/// and channel count at the field's size.
pub fn sample_with_field(source: &Raster, field: &WarpField) -> Raster {
    let mut out = Raster::zeros(
        source.kind(),
        field.width(),
        field.height(),
        source.channels(),
    );
    let depth_mode = source.kind() == RasterKind::DepthM;
    for y in 0..field.height() {
        for x in 0..field.width() {
            let Some((sx, sy)) = field.get(x, y) else {
                continue;
            };
            if depth_mode {
                if let Some(v) = bilinear_sample_depth(source, sx, sy) {
                    out.set(x, y, 0, v);
                }
            } else {
                for c in 0..source.channels() {
                    if let Some(v) = bilinear_sample(source, c, sx, sy) {
                        out.set(x, y, c, v);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Raster {
        // 3x2, value = 10*y + x.
        let mut r = Raster::zeros(RasterKind::Generic, 3, 2, 1);
        for y in 0..2 {
            for x in 0..3 {
                r.set(x, y, 0, (10 * y + x) as f32);
            }
        }
        r
    }

    #[test]
    fn bilinear_is_exact_at_pixel_centers() {
        let r = ramp();
        for y in 0..2 {
            for x in 0..3 {
                let v = bilinear_sample(&r, 0, x as f64, y as f64).unwrap();
                assert_eq!(v, (10 * y + x) as f32);
            }
        }
    }

    #[test]
    fn bilinear_is_linear_between_centers() {
        let r = ramp();
        assert!((bilinear_sample(&r, 0, 0.5, 0.0).unwrap() - 0.5).abs() < 1e-6);
        assert!((bilinear_sample(&r, 0, 0.0, 0.5).unwrap() - 5.0).abs() < 1e-6);
        assert!((bilinear_sample(&r, 0, 1.5, 0.5).unwrap() - 6.5).abs() < 1e-6);
    }

    #[test]
    fn bilinear_rejects_outside_the_center_rectangle() {
        let r = ramp();
        assert!(bilinear_sample(&r, 0, -0.001, 0.0).is_none());
        assert!(bilinear_sample(&r, 0, 2.001, 0.0).is_none());
        assert!(bilinear_sample(&r, 0, 0.0, 1.001).is_none());
        assert!(bilinear_sample(&r, 0, 2.0, 1.0).is_some());
    }

    #[test]
    fn depth_sampling_renormalizes_around_holes() {
        let mut d = Raster::zeros(RasterKind::DepthM, 2, 1, 1);
        d.set(0, 0, 0, 3.0);
        d.set(1, 0, 0, tofu_core::INVALID_DEPTH);
        // Plain bilinear would blend the hole's 0.0 in; the masked sampler
        // must return the valid neighbor's value.
        assert_eq!(bilinear_sample_depth(&d, 0.25, 0.0).unwrap(), 3.0);
        assert!(bilinear_sample_depth(&d, 1.0, 0.0).is_none());
    }

    #[test]
    fn snapping_pins_near_integer_coordinates() {
        assert_eq!(snap(3.0 + 1e-9), 3.0);
        assert_eq!(snap(3.0 - 1e-9), 3.0);
        let off = snap(3.01);
        assert_eq!(off, 3.01);
    }

    #[test]
    fn invalid_entries_sample_to_zero() {
        let r = ramp();
        let mut f = WarpField::invalid(3, 2);
        f.set(0, 0, 2.0, 1.0);
        let out = sample_with_field(&r, &f);
        assert_eq!(out.get(0, 0, 0), 12.0);
        assert_eq!(out.get(1, 0, 0), 0.0);
        assert_eq!(out.get(2, 1, 0), 0.0);
    }
}
