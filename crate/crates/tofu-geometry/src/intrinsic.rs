//! Resampling between two pinhole intrinsics that share a camera center.
//!
//! When two cameras are co-located (or a single sensor is described by two
//! different intrinsic matrices), reprojection needs no depth: the mapping
//! from destination pixel to source pixel is the per-axis affine map
//!
//!   x_src = fx_s * (x_dst - cx_d) / fx_d + cx_s
//!   y_src = fy_s * (y_dst - cy_d) / fy_d + cy_s
//!
//! which is `K_src * K_dst^-1` written out for diagonal-plus-center
//! matrices.

use tofu_core::{Intrinsics, Raster};

use crate::field::WarpField;
use crate::sample_with_field;

/// Field mapping a `dst_w` x `dst_h` destination grid under `k_dst` onto a
/// `src_w` x `src_h` source image under `k_src`.
pub fn intrinsic_warp_field(
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    src_w: u32,
    src_h: u32,
    dst_w: u32,
    dst_h: u32,
) -> WarpField {
    let mut field = WarpField::invalid(dst_w, dst_h);
    for y in 0..dst_h {
        for x in 0..dst_w {
            let sx = k_src.fx * (x as f64 - k_dst.cx) / k_dst.fx + k_src.cx;
            let sy = k_src.fy * (y as f64 - k_dst.cy) / k_dst.fy + k_src.cy;
            field.set(x, y, sx, sy);
            if !crate::field::in_bounds(
                crate::field::snap(sx),
                crate::field::snap(sy),
                src_w,
                src_h,
            ) {
                field.set_invalid(x, y);
            }
        }
    }
    field
}

/// Resamples `image` (captured under `k_src`) as if it had been captured
/// under `k_dst`, keeping the pixel count.
///
/// Destination pixels that map outside the source frame come back as 0.0
/// with no way to tell them from true zeros; callers that need the
/// distinction should build the field themselves and keep its mask.
pub fn intrinsic_align(image: &Raster, k_src: &Intrinsics, k_dst: &Intrinsics) -> Raster {
    let field = intrinsic_warp_field(
        k_src,
        k_dst,
        image.width(),
        image.height(),
        image.width(),
        image.height(),
    );
    sample_with_field(image, &field)
}
