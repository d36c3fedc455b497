//! Declarative scene description. Primitives live in the ToF camera frame
//! (camera at the origin looking down +z); the RGB viewpoint is derived
//! from the rig calibration.

use serde::{Deserialize, Serialize};
use tofu_core::Calibration;

use crate::SensorError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Texture {
    #[default]
    None,
    Checker,
    Stripes,
    Noise,
}

fn default_tex_scale() -> f64 {
    0.5
}

fn default_tint() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Unbounded plane through `point` with unit-ish `normal`.
    Plane {
        point: [f64; 3],
        normal: [f64; 3],
        albedo: f64,
        #[serde(default)]
        texture: Texture,
        #[serde(default = "default_tex_scale")]
        tex_scale: f64,
        #[serde(default = "default_tint")]
        tint: [f64; 3],
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        albedo: f64,
        #[serde(default)]
        texture: Texture,
        #[serde(default = "default_tex_scale")]
        tex_scale: f64,
        #[serde(default = "default_tint")]
        tint: [f64; 3],
    },
    /// Axis-aligned box spanning `min`..`max`.
    #[serde(rename = "box")]
    Aabb {
        min: [f64; 3],
        max: [f64; 3],
        albedo: f64,
        #[serde(default)]
        texture: Texture,
        #[serde(default = "default_tex_scale")]
        tex_scale: f64,
        #[serde(default = "default_tint")]
        tint: [f64; 3],
    },
}

impl Primitive {
    pub fn albedo(&self) -> f64 {
        match self {
            Primitive::Plane { albedo, .. }
            | Primitive::Sphere { albedo, .. }
            | Primitive::Aabb { albedo, .. } => *albedo,
        }
    }
}

fn default_light_gain() -> f64 {
    2.0
}

fn default_light_falloff_m() -> f64 {
    4.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    /// Expected working depth range of the scene, metres. Consumed by the
    /// dataset manifest and network output mapping, not by the renderer.
    pub d_min: f64,
    pub d_max: f64,
    pub calibration: Calibration,
    pub primitives: Vec<Primitive>,
    /// Headlight gain for RGB shading before clamping to [0, 1].
    #[serde(default = "default_light_gain")]
    pub light_gain: f64,
    /// Distance (m) at which the headlight has fallen to half intensity.
    #[serde(default = "default_light_falloff_m")]
    pub light_falloff_m: f64,
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SensorError> {
        let spec: SceneSpec =
            serde_json::from_str(text).map_err(|e| SensorError::Scene(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if self.width == 0 || self.height == 0 {
            return Err(SensorError::Scene("zero image dimensions".into()));
        }
        if !(self.d_min.is_finite() && self.d_max.is_finite() && 0.0 < self.d_min
            && self.d_min < self.d_max)
        {
            return Err(SensorError::Scene(format!(
                "bad depth range [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        if self.primitives.is_empty() {
            return Err(SensorError::Scene("scene has no primitives".into()));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            let a = p.albedo();
            if !(a > 0.0 && a <= 1.0) {
                return Err(SensorError::Scene(format!(
                    "primitive {i}: albedo {a} outside (0, 1]"
                )));
            }
            match p {
                Primitive::Plane { normal, .. } => {
                    let n2: f64 = normal.iter().map(|v| v * v).sum();
                    if n2 < 1e-12 {
                        return Err(SensorError::Scene(format!(
                            "primitive {i}: degenerate plane normal"
                        )));
                    }
                }
                Primitive::Sphere { radius, .. } => {
                    if *radius <= 0.0 {
                        return Err(SensorError::Scene(format!(
                            "primitive {i}: radius {radius} <= 0"
                        )));
                    }
                }
                Primitive::Aabb { min, max, .. } => {
                    if min.iter().zip(max).any(|(lo, hi)| lo >= hi) {
                        return Err(SensorError::Scene(format!(
                            "primitive {i}: empty box"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
