//! Oracle checks for the warping stack.
//!
//! Every field builder is compared against an independent reprojection path
//! built from raw nalgebra matrix algebra (homogeneous K matrices and a
//! numeric inverse), never against the production closed forms.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tofu_core::{depth_valid, Extrinsics, Intrinsics, Raster, RasterKind};
use tofu_geometry::{
    backward_warp_field, backward_warp_with_depth, forward_splat_depth, intrinsic_warp_field,
    resample_warp_field, sample_with_field,
};

fn k_matrix(k: &Intrinsics) -> Matrix3<f64> {
    Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0)
}

/// Reference reprojection: lift with a numerically inverted K, move, project
/// with the homogeneous K of the source.
fn oracle_reproject(
    k_src: &Intrinsics,
    k_dst: &Intrinsics,
    pose: &Extrinsics,
    x: f64,
    y: f64,
    d: f64,
) -> (f64, f64, f64) {
    let k_dst_inv = k_matrix(k_dst).try_inverse().expect("K is invertible");
    let p_dst = k_dst_inv * Vector3::new(x, y, 1.0) * d;
    let p_src = pose.r * p_dst + pose.t;
    let uvw = k_matrix(k_src) * p_src;
    (uvw.x / uvw.z, uvw.y / uvw.z, p_src.z)
}

fn translation(tx: f64, ty: f64, tz: f64) -> Extrinsics {
    Extrinsics::new(Matrix3::identity(), Vector3::new(tx, ty, tz)).unwrap()
}

fn plane(w: u32, h: u32, d: f32) -> Raster {
    Raster::filled(RasterKind::DepthM, w, h, 1, d)
}

#[test]
fn intrinsic_field_matches_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let k_src = Intrinsics::new(
            rng.gen_range(40.0..160.0),
            rng.gen_range(40.0..160.0),
            rng.gen_range(20.0..44.0),
            rng.gen_range(20.0..44.0),
        )
        .unwrap();
        let k_dst = Intrinsics::new(
            rng.gen_range(40.0..160.0),
            rng.gen_range(40.0..160.0),
            rng.gen_range(20.0..44.0),
            rng.gen_range(20.0..44.0),
        )
        .unwrap();
        let field = intrinsic_warp_field(&k_src, &k_dst, 64, 64, 64, 64);
        let ident = Extrinsics::identity();
        for y in 0..64 {
            for x in 0..64 {
                // Depth cancels for co-located cameras; any positive value works.
                let (ox, oy, _) =
                    oracle_reproject(&k_src, &k_dst, &ident, x as f64, y as f64, 1.0);
                if let Some((sx, sy)) = field.get(x, y) {
                    assert!(
                        (sx - ox).abs() < 1e-5 && (sy - oy).abs() < 1e-5,
                        "pixel ({x},{y}): field ({sx},{sy}) vs oracle ({ox},{oy})"
                    );
                } else {
                    let inside =
                        ox >= 0.0 && oy >= 0.0 && ox <= 63.0 + 1e-9 && oy <= 63.0 + 1e-9;
                    assert!(!inside, "pixel ({x},{y}) masked but oracle lands inside");
                }
            }
        }
    }
}

#[test]
fn backward_field_matches_matrix_oracle_under_rotation() {
    let k_src = Intrinsics::new(92.0, 88.0, 30.0, 33.0).unwrap();
    let k_dst = Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap();
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.035);
    let pose = Extrinsics::new(*rot.matrix(), Vector3::new(0.05, -0.01, 0.002)).unwrap();

    // Depth varies per pixel so the oracle exercises the depth dependence.
    let mut depth = Raster::zeros(RasterKind::DepthM, 64, 64, 1);
    for y in 0..64 {
        for x in 0..64 {
            let d = 2.5 + 0.8 * ((x as f32 * 0.31).sin() + (y as f32 * 0.17).cos());
            depth.set(x, y, 0, d);
        }
    }

    let field = backward_warp_field(&depth, &k_src, &k_dst, &pose, 64, 64).unwrap();
    let mut checked = 0usize;
    for y in 0..64 {
        for x in 0..64 {
            let d = depth.get(x, y, 0) as f64;
            let (ox, oy, oz) = oracle_reproject(&k_src, &k_dst, &pose, x as f64, y as f64, d);
            if let Some((sx, sy)) = field.get(x, y) {
                assert!(oz > 0.0);
                assert!(
                    (sx - ox).abs() < 1e-5 && (sy - oy).abs() < 1e-5,
                    "pixel ({x},{y}): field ({sx},{sy}) vs oracle ({ox},{oy})"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 3000, "field almost entirely masked: {checked}");
}

#[test]
fn fronto_parallel_plane_shifts_by_focal_times_baseline_over_depth() {
    let ki = Intrinsics::new(500.0, 500.0, 31.5, 31.5).unwrap();
    let depth = plane(64, 64, 3.0);
    let pose = translation(0.05, 0.0, 0.0);
    let field = backward_warp_field(&depth, &ki, &ki, &pose, 64, 64).unwrap();
    let expected: f64 = 500.0 * 0.05 / 3.0;
    assert!((expected - 25.0 / 3.0).abs() < 1e-12);
    let mut checked = 0usize;
    for y in 0..64 {
        for x in 0..64 {
            if let Some((sx, sy)) = field.get(x, y) {
                assert!(
                    (sx - (x as f64 + expected)).abs() < 1e-5,
                    "pixel ({x},{y}): got {sx}"
                );
                assert!((sy - y as f64).abs() < 1e-5);
                checked += 1;
            } else {
                // Only pixels pushed past the right edge may be masked.
                assert!(x as f64 + expected > 63.0);
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn shift_scales_with_inverse_depth() {
    let ki = Intrinsics::new(500.0, 500.0, 31.5, 31.5).unwrap();
    let pose = translation(0.05, 0.0, 0.0);
    let near = backward_warp_field(&plane(64, 64, 3.0), &ki, &ki, &pose, 64, 64).unwrap();
    let far = backward_warp_field(&plane(64, 64, 6.0), &ki, &ki, &pose, 64, 64).unwrap();
    let (nx, _) = near.get(10, 10).unwrap();
    let (fx_, _) = far.get(10, 10).unwrap();
    let near_shift = nx - 10.0;
    let far_shift = fx_ - 10.0;
    assert!((near_shift / far_shift - 2.0).abs() < 1e-9);
}

#[test]
fn splat_through_identity_reproduces_the_depth_map() {
    let ki = Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap();
    let mut depth = plane(32, 32, 3.0);
    depth.set(5, 5, 0, 1.25);
    depth.set(6, 5, 0, tofu_core::INVALID_DEPTH);
    let out = forward_splat_depth(&depth, &ki, &ki, &Extrinsics::identity(), 32, 32).unwrap();
    for y in 0..32 {
        for x in 0..32 {
            assert_eq!(out.get(x, y, 0), depth.get(x, y, 0));
        }
    }
}

#[test]
fn splat_then_backward_warp_agrees_on_a_plane() {
    // A 3 m wall seen from two cameras 5 cm apart. Scatter the source depth
    // into the destination, then pull the source map back through the
    // scattered depth; both paths must describe the same plane.
    let ki = Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap();
    let src_depth = plane(64, 64, 3.0);
    let src_to_dst = translation(-0.05, 0.0, 0.0);
    let dst_to_src = src_to_dst.inverse();

    let dst_depth = forward_splat_depth(&src_depth, &ki, &ki, &src_to_dst, 64, 64).unwrap();
    let covered = (0..64 * 64)
        .filter(|i| depth_valid(dst_depth.data()[*i as usize]))
        .count();
    assert!(covered > 3500, "splat left too many holes: {covered}");

    let pulled =
        backward_warp_with_depth(&src_depth, &dst_depth, &ki, &ki, &dst_to_src).unwrap();
    let mut checked = 0usize;
    for y in 0..64 {
        for x in 0..64 {
            let splatted = dst_depth.get(x, y, 0);
            let warped = pulled.get(x, y, 0);
            if depth_valid(splatted) && depth_valid(warped) {
                assert!(
                    (splatted - 3.0).abs() < 1e-3,
                    "splat z off-plane at ({x},{y}): {splatted}"
                );
                assert!(
                    (warped - 3.0).abs() < 1e-3,
                    "warped depth off-plane at ({x},{y}): {warped}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > 3500, "round trip checked too few pixels: {checked}");
}

#[test]
fn warping_a_constant_image_is_constant_on_valid_pixels() {
    let ki = Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap();
    let img = Raster::filled(RasterKind::Generic, 64, 64, 1, 0.625);
    let depth = plane(64, 64, 2.0);
    let pose = translation(0.03, -0.02, 0.0);
    let field = backward_warp_field(&depth, &ki, &ki, &pose, 64, 64).unwrap();
    let out = sample_with_field(&img, &field);
    for y in 0..64 {
        for x in 0..64 {
            let expect = if field.is_valid(x, y) { 0.625 } else { 0.0 };
            assert_eq!(out.get(x, y, 0), expect);
        }
    }
}

#[test]
fn resampled_field_matches_the_coarse_lattice() {
    let ki = Intrinsics::new(80.0, 80.0, 31.5, 31.5).unwrap();
    let depth = plane(64, 64, 3.0);
    let pose = translation(0.05, 0.0, 0.0);
    let full = backward_warp_field(&depth, &ki, &ki, &pose, 64, 64).unwrap();
    for scale in [2u32, 4, 8] {
        let small = resample_warp_field(&full, scale).unwrap();
        assert_eq!(small.width(), 64 / scale);
        for y in 0..small.height() {
            for x in 0..small.width() {
                match (small.get(x, y), full.get(x * scale, y * scale)) {
                    (Some((sx, sy)), Some((fx_, fy_))) => {
                        assert!((sx - fx_ / scale as f64).abs() < 1e-12);
                        assert!((sy - fy_ / scale as f64).abs() < 1e-12);
                    }
                    (None, None) => {}
                    (a, b) => panic!("validity mismatch at ({x},{y}): {a:?} vs {b:?}"),
                }
            }
        }
    }
}

#[test]
fn rgb_pixels_without_source_are_zero_in_every_channel() {
    let k_src = Intrinsics::new(100.0, 100.0, 21.5, 31.5).unwrap();
    let k_dst = Intrinsics::new(100.0, 100.0, 31.5, 31.5).unwrap();
    let img = Raster::filled(RasterKind::Rgb, 64, 64, 3, 0.5);
    let field = intrinsic_warp_field(&k_src, &k_dst, 64, 64, 64, 64);
    let out = sample_with_field(&img, &field);
    // Source x = x - 10, so destination columns 0..10 have no source.
    for y in 0..64 {
        for c in 0..3 {
            assert_eq!(out.get(4, y, c), 0.0);
            assert_eq!(out.get(20, y, c), 0.5);
        }
    }
}
