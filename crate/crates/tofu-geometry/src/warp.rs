//! Depth-driven warps between two posed cameras.

use tofu_core::{depth_valid, Extrinsics, Intrinsics, Raster, RasterKind, INVALID_DEPTH};

use crate::field::WarpField;
use crate::{sample_with_field, GeometryError};

/// Minimum forward distance for a point to count as in front of a camera.
const Z_EPS: f64 = 1e-9;

fn expect_depth(raster: &Raster) -> Result<(), GeometryError> {
    if raster.kind() != RasterKind::DepthM {
        return Err(GeometryError::WrongKind {
            expected: RasterKind::DepthM,
            got: raster.kind(),
        });
    }
    Ok(())
}

/// Field that reads the source view from the destination view, using the
/// destination's own depth map.
///
/// Each valid destination pixel is lifted to a 3D point with `k_dst`, moved
/// by `pose_dst_to_src`, and projected with `k_src`. Entries are invalid
/// where the destination depth is invalid, the moved point lies at or behind
/// the source camera plane, or the projection leaves the source frame.
pub fn backward_warp_field(
    depth_dst: &Raster,
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    pose_dst_to_src: &Extrinsics,
    src_w: u32,
    src_h: u32,
) -> Result<WarpField, GeometryError> {
    expect_depth(depth_dst)?;
    let mut field = WarpField::invalid(depth_dst.width(), depth_dst.height());
    for y in 0..depth_dst.height() {
        for x in 0..depth_dst.width() {
            let d = depth_dst.get(x, y, 0);
            if !depth_valid(d) {
                continue;
            }
            let p_dst = k_dst.unproject(x as f64, y as f64) * d as f64;
            let p_src = pose_dst_to_src.transform(&p_dst);
            if p_src.z <= Z_EPS {
                continue;
            }
            let (sx, sy) = k_src.project(&p_src);
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
    Ok(field)
}

/// Warps `source` into the destination view in one call: builds the backward
/// field from `depth_dst` and samples through it.
///
/// The output has the destination's size and the source's kind and channel
/// count. Pixels with no usable source are 0.0.
pub fn backward_warp_with_depth(
    source: &Raster,
    depth_dst: &Raster,
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    pose_dst_to_src: &Extrinsics,
) -> Result<Raster, GeometryError> {
    let field = backward_warp_field(
        depth_dst,
        k_src,
        k_dst,
        pose_dst_to_src,
        source.width(),
        source.height(),
    )?;
    Ok(sample_with_field(source, &field))
}

/// Reprojects a source depth map into a destination view by scattering.
///
/// Each valid source pixel becomes a 3D point, is moved by
/// `pose_src_to_dst`, projected into the destination, and rounded to the
/// nearest pixel. Collisions keep the smallest destination-frame z, so
/// nearer surfaces win. The stored value is that destination-frame z, not
/// the source depth. Pixels nothing lands on stay [`INVALID_DEPTH`]: the
/// scatter leaves holes where the destination sees surface the source
/// could not.
pub fn forward_splat_depth(
    depth_src: &Raster,
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    pose_src_to_dst: &Extrinsics,
    dst_w: u32,
    dst_h: u32,
) -> Result<Raster, GeometryError> {
    expect_depth(depth_src)?;
    let mut out = Raster::filled(RasterKind::DepthM, dst_w, dst_h, 1, INVALID_DEPTH);
    for y in 0..depth_src.height() {
        for x in 0..depth_src.width() {
            let d = depth_src.get(x, y, 0);
            if !depth_valid(d) {
                continue;
            }
            let p_src = k_src.unproject(x as f64, y as f64) * d as f64;
            let p_dst = pose_src_to_dst.transform(&p_src);
            if p_dst.z <= Z_EPS {
                continue;
            }
            let (u, v) = k_dst.project(&p_dst);
            let ui = u.round();
            let vi = v.round();
            if ui < 0.0 || vi < 0.0 || ui >= dst_w as f64 || vi >= dst_h as f64 {
                continue;
            }
            let (ui, vi) = (ui as u32, vi as u32);
            let cur = out.get(ui, vi, 0);
            if !depth_valid(cur) || (p_dst.z as f32) < cur {
                out.set(ui, vi, 0, p_dst.z as f32);
            }
        }
    }
    Ok(out)
}

/// Shrinks a warp field by an integer factor for use on a downsampled pyramid
/// level.
///
/// The field is point-sampled on the stride-`scale` lattice and both the
/// sample positions and the stored coordinates are divided by `scale`,
/// matching images downsampled by striding. Validity is carried over
/// unchanged. `scale` of 1 returns a clone.
pub fn resample_warp_field(field: &WarpField, scale: u32) -> Result<WarpField, GeometryError> {
    if scale == 0 || !scale.is_power_of_two() {
        return Err(GeometryError::BadScale(scale));
    }
    if scale == 1 {
        return Ok(field.clone());
    }
    if field.width() % scale != 0 || field.height() % scale != 0 {
        return Err(GeometryError::NotDivisible {
            w: field.width(),
            h: field.height(),
            scale,
        });
    }
    let (w, h) = (field.width() / scale, field.height() / scale);
    let mut out = WarpField::invalid(w, h);
    let s = scale as f64;
    for y in 0..h {
        for x in 0..w {
            if let Some((sx, sy)) = field.get(x * scale, y * scale) {
                out.set(x, y, sx / s, sy / s);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn k(fx: f64, cx: f64) -> Intrinsics {
        Intrinsics::new(fx, fx, cx, cx).unwrap()
    }

    fn plane(w: u32, h: u32, d: f32) -> Raster {
        Raster::filled(RasterKind::DepthM, w, h, 1, d)
    }

    fn translation(tx: f64, ty: f64, tz: f64) -> Extrinsics {
        Extrinsics::new(nalgebra::Matrix3::identity(), Vector3::new(tx, ty, tz)).unwrap()
    }

    #[test]
    fn identity_pose_and_intrinsics_give_identity_field() {
        let ki = k(80.0, 31.5);
        let d = plane(64, 64, 3.0);
        let f = backward_warp_field(&d, &ki, &ki, &Extrinsics::identity(), 64, 64).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                assert_eq!(f.get(x, y), Some((x as f64, y as f64)));
            }
        }
    }

    #[test]
    fn invalid_depth_gives_invalid_entries() {
        let ki = k(80.0, 31.5);
        let mut d = plane(8, 8, 3.0);
        d.set(2, 5, 0, INVALID_DEPTH);
        d.set(3, 5, 0, f32::NAN);
        let f = backward_warp_field(&d, &ki, &ki, &Extrinsics::identity(), 8, 8).unwrap();
        assert!(!f.is_valid(2, 5));
        assert!(!f.is_valid(3, 5));
        assert!(f.is_valid(4, 5));
    }

    #[test]
    fn points_behind_the_source_camera_are_masked() {
        let ki = k(80.0, 31.5);
        let d = plane(8, 8, 3.0);
        // Moving the source camera 4 m forward puts the 3 m plane 1 m behind it.
        let pose = translation(0.0, 0.0, -4.0);
        let f = backward_warp_field(&d, &ki, &ki, &pose, 8, 8).unwrap();
        assert_eq!(f.valid_count(), 0);
    }

    #[test]
    fn splat_keeps_the_nearest_surface_on_collision() {
        // Two source pixels collapse onto one destination pixel; the smaller
        // transformed z must survive.
        let k_src = k(1.0, 0.0);
        let k_dst = Intrinsics::new(0.001, 0.001, 0.2, 0.2).unwrap();
        let mut d = Raster::zeros(RasterKind::DepthM, 2, 1, 1);
        d.set(0, 0, 0, 2.0);
        d.set(1, 0, 0, 5.0);
        let out =
            forward_splat_depth(&d, &k_src, &k_dst, &Extrinsics::identity(), 1, 1).unwrap();
        assert_eq!(out.get(0, 0, 0), 2.0);
    }

    #[test]
    fn resample_divides_coordinates_and_keeps_validity() {
        let mut f = WarpField::invalid(8, 8);
        for y in 0..8 {
            for x in 0..8 {
                f.set(x, y, x as f64 + 8.0, y as f64);
            }
        }
        f.set_invalid(4, 0);
        let half = resample_warp_field(&f, 2).unwrap();
        assert_eq!(half.width(), 4);
        assert_eq!(half.get(0, 0), Some((4.0, 0.0)));
        assert_eq!(half.get(3, 2), Some((7.0, 2.0)));
        assert!(!half.is_valid(2, 0));
        assert!(resample_warp_field(&f, 3).is_err());
        assert!(resample_warp_field(&f, 16).is_err());
        assert!(resample_warp_field(&f, 0).is_err());
    }
}
