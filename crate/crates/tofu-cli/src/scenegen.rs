//! Random layouts for the synthetic corpus, plus the default camera rig.
//!
//! Every generated frame has a back wall, a floor slab and a few near
//! objects. The wall distance spans more than one wrap period of a
//! 20 MHz capture, so a large share of walls have a wrapped distance
//! that is also a plausible unwrapped one and phase alone cannot place
//! them. The supporting cues are kept asymmetric on purpose: the wall is
//! close to fronto-parallel and carries a regular texture at a tight
//! physical scale, so its apparent frequency in the color image encodes
//! range and survives the per-frame light gain jitter, while the same
//! pattern in the correlation amplitude drowns once the return weakens
//! with range. The floor stops at a random distance short of the wrap
//! boundary, so no surface runs continuously through a wrap and the
//! floor edge anchors nothing, and near objects are drawn at absolute
//! sizes so their image footprint also encodes distance.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tofu_core::{Calibration, Extrinsics, Intrinsics};
use tofu_sensor::{Primitive, SceneSpec, Texture};

use crate::CliError;

/// Bounds steering the layout generator.
#[derive(Debug, Clone)]
pub struct GenBounds {
    /// Back wall distance, metres.
    pub wall_depth: (f64, f64),
    /// Camera height above the floor, metres.
    pub floor_drop: (f64, f64),
    pub near_count: (u32, u32),
    /// Center depth of near objects, metres.
    pub near_depth: (f64, f64),
    pub albedo: (f64, f64),
    /// Scene light gain, sampled log-uniform.
    pub light_gain: (f64, f64),
}

impl Default for GenBounds {
    fn default() -> Self {
        GenBounds {
            wall_depth: (4.2, 14.2),
            floor_drop: (0.8, 1.2),
            near_count: (2, 5),
            near_depth: (1.0, 6.5),
            albedo: (0.15, 0.95),
            light_gain: (1.8, 2.4),
        }
    }
}

fn pick_texture(rng: &mut ChaCha8Rng) -> Texture {
    match rng.gen_range(0u32..4) {
        0 => Texture::None,
        1 => Texture::Checker,
        2 => Texture::Stripes,
        _ => Texture::Noise,
    }
}

fn pick_tint(rng: &mut ChaCha8Rng, lo: f64) -> [f64; 3] {
    [
        rng.gen_range(lo..1.0),
        rng.gen_range(lo..1.0),
        rng.gen_range(lo..1.0),
    ]
}

pub fn generate_scene(
    width: u32,
    height: u32,
    d_min: f64,
    d_max: f64,
    calib: &Calibration,
    bounds: &GenBounds,
    rng: &mut ChaCha8Rng,
) -> SceneSpec {
    let mut primitives = Vec::new();

    // Back wall, near fronto-parallel, with a regular pattern at a tight
    // physical scale. The tilt range keeps the deepest corner under d_max
    // for the default rig.
    let zw = rng.gen_range(bounds.wall_depth.0..bounds.wall_depth.1);
    let nx: f64 = rng.gen_range(-0.03..0.03);
    let ny: f64 = rng.gen_range(-0.03..0.03);
    let norm = (nx * nx + ny * ny + 1.0).sqrt();
    primitives.push(Primitive::Plane {
        point: [0.0, 0.0, zw],
        normal: [nx / norm, ny / norm, -1.0 / norm],
        albedo: rng.gen_range(bounds.albedo.0..bounds.albedo.1),
        texture: if rng.gen_bool(0.5) {
            Texture::Checker
        } else {
            Texture::Stripes
        },
        tex_scale: rng.gen_range(0.8..1.2),
        tint: pick_tint(rng, 0.5),
    });

    // Floor slab. Ends at a random distance short of the wrap boundary,
    // so floor depth never wraps and the edge says nothing about the wall.
    let yf = rng.gen_range(bounds.floor_drop.0..bounds.floor_drop.1);
    let floor_end = rng.gen_range(3.5..7.0);
    primitives.push(Primitive::Aabb {
        min: [-8.0, yf, 0.3],
        max: [8.0, yf + 0.4, zw.min(floor_end)],
        albedo: rng.gen_range(bounds.albedo.0..bounds.albedo.1),
        texture: pick_texture(rng),
        tex_scale: rng.gen_range(0.4..1.6),
        tint: pick_tint(rng, 0.5),
    });

    // Near objects, placed through a pixel so they land in view. Sizes are
    // absolute, so the image footprint shrinks with distance.
    let count = rng.gen_range(bounds.near_count.0..=bounds.near_count.1);
    for _ in 0..count {
        let u = rng.gen_range(6.0..(width as f64 - 7.0));
        let v = rng.gen_range(6.0..(height as f64 - 7.0));
        let zc = rng.gen_range(bounds.near_depth.0..bounds.near_depth.1);
        let c = calib.tof.unproject(u, v) * zc;
        let albedo = rng.gen_range(bounds.albedo.0..bounds.albedo.1);
        let texture = pick_texture(rng);
        let tex_scale = rng.gen_range(0.3..1.5);
        let tint = pick_tint(rng, 0.3);
        if rng.gen_bool(0.5) {
            primitives.push(Primitive::Sphere {
                center: [c.x, c.y, c.z],
                radius: rng.gen_range(0.15..0.45),
                albedo,
                texture,
                tex_scale,
                tint,
            });
        } else {
            let hx = rng.gen_range(0.12..0.4);
            let hy = rng.gen_range(0.12..0.4);
            let hz = rng.gen_range(0.12..0.4);
            primitives.push(Primitive::Aabb {
                min: [c.x - hx, c.y - hy, c.z - hz],
                max: [c.x + hx, c.y + hy, c.z + hz],
                albedo,
                texture,
                tex_scale,
                tint,
            });
        }
    }

    let gain = (rng.gen_range(bounds.light_gain.0.ln()..bounds.light_gain.1.ln())).exp();
    SceneSpec {
        width,
        height,
        d_min,
        d_max,
        calibration: calib.clone(),
        primitives,
        light_gain: gain,
        light_falloff_m: 4.0,
    }
}

/// Default two-camera rig: a ToF pinhole and an RGB camera 8 cm to its
/// right with a wider field of view, so the aligned color image covers the
/// whole ToF grid.
pub fn default_rig(width: u32, height: u32) -> Result<Calibration, CliError> {
    let side = width.min(height) as f64;
    let f_tof = 0.9 * side;
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let tof = Intrinsics::new(f_tof, f_tof, cx, cy)?;
    let rgb = Intrinsics::new(0.75 * f_tof, 0.75 * f_tof, cx, cy)?;
    let tof_to_rgb = Extrinsics::new(Matrix3::identity(), Vector3::new(-0.08, 0.0, 0.0))?;
    Ok(Calibration {
        tof,
        rgb,
        tof_to_rgb,
    })
}
