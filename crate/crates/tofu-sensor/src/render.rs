//! Ray-cast renderer for the synthetic scenes. Produces per-view z-depth
//! (camera-frame z, not ray length), the ToF-view reflectivity map feeding
//! the correlation model, and a shaded RGB image.

use nalgebra::Vector3;
use tofu_core::{Extrinsics, Intrinsics, Raster, RasterKind, INVALID_DEPTH};

use crate::scene::{Primitive, SceneSpec, Texture};
use crate::SensorError;

const T_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RenderedViews {
    pub tof_depth: Raster,
    /// Per-pixel reflectivity in (0, 1] seen from the ToF viewpoint; zero on
    /// background pixels (which are invalid in the depth map anyway).
    pub tof_albedo: Raster,
    pub rgb_depth: Raster,
    pub rgb_image: Raster,
}

struct Hit {
    t: f64,
    point: Vector3<f64>,
    normal: Vector3<f64>,
    prim: usize,
}

fn intersect_plane(o: &Vector3<f64>, d: &Vector3<f64>, p0: &Vector3<f64>, n: &Vector3<f64>) -> Option<f64> {
    let denom = n.dot(d);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = n.dot(&(p0 - o)) / denom;
    (t > T_EPS).then_some(t)
}

fn intersect_sphere(o: &Vector3<f64>, d: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let disc = b * b - (oc.norm_squared() - r * r);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t0 = -b - s;
    if t0 > T_EPS {
        return Some(t0);
    }
    let t1 = -b + s;
    (t1 > T_EPS).then_some(t1)
}

fn intersect_aabb(o: &Vector3<f64>, d: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Option<f64> {
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for axis in 0..3 {
        if d[axis].abs() < 1e-15 {
            if o[axis] < lo[axis] || o[axis] > hi[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[axis];
        let (mut t0, mut t1) = ((lo[axis] - o[axis]) * inv, (hi[axis] - o[axis]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        tmin = tmin.max(t0);
        tmax = tmax.min(t1);
        if tmin > tmax {
            return None;
        }
    }
    if tmin > T_EPS {
        Some(tmin)
    } else {
        (tmax > T_EPS).then_some(tmax)
    }
}

fn aabb_normal(p: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>) -> Vector3<f64> {
    // face whose plane the hit point is closest to
    let mut best = (f64::INFINITY, Vector3::zeros());
    for axis in 0..3 {
        let mut n = Vector3::zeros();
        n[axis] = -1.0;
        let d_lo = (p[axis] - lo[axis]).abs();
        if d_lo < best.0 {
            best = (d_lo, n);
        }
        let d_hi = (p[axis] - hi[axis]).abs();
        if d_hi < best.0 {
            best = (d_hi, -n);
        }
    }
    best.1
}

fn cast(scene: &SceneSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, prim) in scene.primitives.iter().enumerate() {
        let t = match prim {
            Primitive::Plane { point, normal, .. } => {
                intersect_plane(o, d, &Vector3::from(*point), &Vector3::from(*normal))
            }
            Primitive::Sphere { center, radius, .. } => {
                intersect_sphere(o, d, &Vector3::from(*center), *radius)
            }
            Primitive::Aabb { min, max, .. } => {
                intersect_aabb(o, d, &Vector3::from(*min), &Vector3::from(*max))
            }
        };
        let Some(t) = t else { continue };
        if best.as_ref().is_some_and(|b| b.t <= t) {
            continue;
        }
        let point = o + d * t;
        let normal = match prim {
            Primitive::Plane { normal, .. } => {
                let n = Vector3::from(*normal).normalize();
                if n.dot(d) > 0.0 {
                    -n
                } else {
                    n
                }
            }
            Primitive::Sphere { center, .. } => (point - Vector3::from(*center)).normalize(),
            Primitive::Aabb { min, max, .. } => {
                aabb_normal(&point, &Vector3::from(*min), &Vector3::from(*max))
            }
        };
        best = Some(Hit {
            t,
            point,
            normal,
            prim: i,
        });
    }
    best
}

/// Hash-based value in [0, 1), stable across runs.
fn cell_noise(ix: i64, iy: i64, iz: i64) -> f64 {
    let mut z = (ix as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F))
        .wrapping_add((iz as u64).wrapping_mul(0x1656_67B1_9E37_79F9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
}

/// Multiplicative texture factor in [0.3, 1] at a world-space point.
fn texture_factor(texture: Texture, scale: f64, p: &Vector3<f64>) -> f64 {
    let s = scale.max(1e-6);
    match texture {
        Texture::None => 1.0,
        Texture::Checker => {
            let c = (p.x / s).floor() + (p.y / s).floor() + (p.z / s).floor();
            if (c as i64).rem_euclid(2) == 0 {
                1.0
            } else {
                0.4
            }
        }
        Texture::Stripes => {
            if ((p.x + p.z) / s).floor().rem_euclid(2.0) < 1.0 {
                1.0
            } else {
                0.55
            }
        }
        Texture::Noise => {
            let v = cell_noise(
                (p.x / s).floor() as i64,
                (p.y / s).floor() as i64,
                (p.z / s).floor() as i64,
            );
            0.3 + 0.7 * v
        }
    }
}

fn prim_surface(prim: &Primitive) -> (f64, Texture, f64, [f64; 3]) {
    match prim {
        Primitive::Plane {
            albedo,
            texture,
            tex_scale,
            tint,
            ..
        }
        | Primitive::Sphere {
            albedo,
            texture,
            tex_scale,
            tint,
            ..
        }
        | Primitive::Aabb {
            albedo,
            texture,
            tex_scale,
            tint,
            ..
        } => (*albedo, *texture, *tex_scale, *tint),
    }
}

struct View<'a> {
    k: &'a Intrinsics,
    /// camera-to-world
    rot: nalgebra::Matrix3<f64>,
    origin: Vector3<f64>,
    /// world-to-camera
    inv: Extrinsics,
}

fn render_view(
    scene: &SceneSpec,
    view: &View,
    shade_rgb: bool,
) -> (Raster, Raster, Option<Raster>) {
    let (w, h) = (scene.width, scene.height);
    let mut depth = Raster::zeros(RasterKind::DepthM, w, h, 1);
    let mut albedo = Raster::zeros(RasterKind::Generic, w, h, 1);
    let mut rgb = shade_rgb.then(|| Raster::zeros(RasterKind::Rgb, w, h, 3));

    for y in 0..h {
        for x in 0..w {
            let dir_cam = view.k.unproject(x as f64, y as f64).normalize();
            let dir = view.rot * dir_cam;
            let Some(hit) = cast(scene, &view.origin, &dir) else {
                depth.set(x, y, 0, INVALID_DEPTH);
                continue;
            };
            let cam_point = view.inv.transform(&hit.point);
            depth.set(x, y, 0, cam_point.z as f32);

            let (base_albedo, texture, tex_scale, tint) =
                prim_surface(&scene.primitives[hit.prim]);
            let tex = texture_factor(texture, tex_scale, &hit.point);
            albedo.set(x, y, 0, (base_albedo * tex) as f32);

            if let Some(img) = rgb.as_mut() {
                // headlight at the camera: lambertian times inverse-square-ish falloff
                let to_cam = -dir;
                let lambert = hit.normal.dot(&to_cam).max(0.0);
                let dist = hit.t;
                let falloff = 1.0 / (1.0 + (dist / scene.light_falloff_m).powi(2));
                let shade = scene.light_gain * base_albedo * tex * lambert * falloff;
                for c in 0..3 {
                    img.set(x, y, c, (shade * tint[c as usize]).clamp(0.0, 1.0) as f32);
                }
            }
        }
    }
    (depth, albedo, rgb)
}

/// Renders both rig viewpoints. The ToF camera sits at the scene origin;
/// the RGB camera pose comes from the calibration's tof-to-rgb transform.
pub fn render_scene(scene: &SceneSpec) -> Result<RenderedViews, SensorError> {
    scene.validate()?;

    let tof_view = View {
        k: &scene.calibration.tof,
        rot: nalgebra::Matrix3::identity(),
        origin: Vector3::zeros(),
        inv: Extrinsics::identity(),
    };
    let (tof_depth, tof_albedo, _) = render_view(scene, &tof_view, false);

    // rgb camera-to-world is the inverse of the (world=tof)->rgb transform
    let rgb_pose = scene.calibration.tof_to_rgb.inverse();
    let rgb_view = View {
        k: &scene.calibration.rgb,
        rot: rgb_pose.r,
        origin: rgb_pose.t,
        inv: scene.calibration.tof_to_rgb.clone(),
    };
    let (rgb_depth, _, rgb_image) = render_view(scene, &rgb_view, true);

    Ok(RenderedViews {
        tof_depth,
        tof_albedo,
        rgb_depth,
        rgb_image: rgb_image.expect("rgb view is shaded"),
    })
}
