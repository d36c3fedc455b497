//! Cross-view resampling for depth cameras.
//!
//! Everything in this crate moves rasters between two calibrated views. The
//! central object is the [`WarpField`]: a destination-sized table of source
//! coordinates plus a validity mask. Builders construct fields from
//! intrinsics alone ([`intrinsic_warp_field`]) or from a destination depth
//! map and a relative pose ([`backward_warp_field`]); [`sample_with_field`]
//! then pulls source pixels through any field with bilinear filtering.
//!
//! Coordinate conventions match `tofu_core::calib`: pixel centers sit at
//! integer coordinates, `(0, 0)` is the top-left pixel, x grows right and
//! y grows down. All coordinate math runs in f64; results that land within
//! [`COORD_SNAP`] of an integer lattice point are snapped so that identity
//! warps reproduce their input bit for bit.

mod field;
mod intrinsic;
mod warp;

pub use field::{bilinear_sample, sample_with_field, WarpField, COORD_SNAP};
pub use intrinsic::{intrinsic_align, intrinsic_warp_field};
pub use warp::{
    backward_warp_field, backward_warp_with_depth, forward_splat_depth, resample_warp_field,
};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("raster is {got:?} but {expected:?} is required here")]
    WrongKind {
        expected: tofu_core::RasterKind,
        got: tofu_core::RasterKind,
    },
    #[error("scale factor must be a positive power of two, got {0}")]
    BadScale(u32),
    #[error("field size {w}x{h} is not divisible by scale {scale}")]
    NotDivisible { w: u32, h: u32, scale: u32 },
}
