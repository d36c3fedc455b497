use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Rotation matrices must satisfy `|R^T R - I| <= ORTHONORMAL_TOL` per entry
/// and `|det R - 1| <= ORTHONORMAL_TOL`.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// Pinhole intrinsics. No skew, no distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, CoreError> {
        let k = Intrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        for v in [self.fx, self.fy, self.cx, self.cy] {
            if !v.is_finite() {
                return Err(CoreError::Calibration("non-finite intrinsics".into()));
            }
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CoreError::Calibration(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point (z > 0) to pixel coordinates.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Ray direction through pixel (x, y), z normalised to 1.
    #[inline]
    pub fn unproject(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }
}

/// Rigid transform `X_dst = R * X_src + t`, translation in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsics {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl Extrinsics {
    pub fn new(r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, CoreError> {
        let e = Extrinsics { r, t };
        e.validate()?;
        Ok(e)
    }

    pub fn identity() -> Self {
        Extrinsics {
            r: Matrix3::identity(),
            t: Vector3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.r.iter().any(|v| !v.is_finite()) || self.t.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Calibration("non-finite extrinsics".into()));
        }
        let gram = self.r.transpose() * self.r;
        let dev = (gram - Matrix3::identity()).abs().max();
        if dev > ORTHONORMAL_TOL {
            return Err(CoreError::Calibration(format!(
                "rotation is not orthonormal (max |R^T R - I| = {dev:.3e})"
            )));
        }
        let det = self.r.determinant();
        if (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(CoreError::Calibration(format!(
                "rotation must be right-handed (det = {det:.6})"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }

    /// Inverse transform; exact because R is orthonormal.
    pub fn inverse(&self) -> Extrinsics {
        let rt = self.r.transpose();
        Extrinsics {
            r: rt,
            t: -(rt * self.t),
        }
    }
}

/// Calibration of one rig: both pinholes plus the ToF-to-RGB transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub tof: Intrinsics,
    pub rgb: Intrinsics,
    pub tof_to_rgb: Extrinsics,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsDoc {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

#[derive(Serialize, Deserialize)]
struct ExtrinsicsDoc {
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct CalibrationDoc {
    tof: IntrinsicsDoc,
    rgb: IntrinsicsDoc,
    extrinsics_tof_to_rgb: ExtrinsicsDoc,
}

impl Calibration {
    fn from_doc(doc: CalibrationDoc) -> Result<Self, CoreError> {
        let tof = Intrinsics::new(doc.tof.fx, doc.tof.fy, doc.tof.cx, doc.tof.cy)?;
        let rgb = Intrinsics::new(doc.rgb.fx, doc.rgb.fy, doc.rgb.cx, doc.rgb.cy)?;
        let e = &doc.extrinsics_tof_to_rgb;
        let r = Matrix3::from_row_slice(&e.r);
        let t = Vector3::new(e.t[0], e.t[1], e.t[2]);
        let tof_to_rgb = Extrinsics::new(r, t)?;
        Ok(Calibration {
            tof,
            rgb,
            tof_to_rgb,
        })
    }

    fn to_doc(&self) -> CalibrationDoc {
        CalibrationDoc {
            tof: IntrinsicsDoc {
                fx: self.tof.fx,
                fy: self.tof.fy,
                cx: self.tof.cx,
                cy: self.tof.cy,
            },
            rgb: IntrinsicsDoc {
                fx: self.rgb.fx,
                fy: self.rgb.fy,
                cx: self.rgb.cx,
                cy: self.rgb.cy,
            },
            extrinsics_tof_to_rgb: ExtrinsicsDoc {
                r: {
                    let mut out = [0.0; 9];
                    for row in 0..3 {
                        for col in 0..3 {
                            out[row * 3 + col] = self.tof_to_rgb.r[(row, col)];
                        }
                    }
                    out
                },
                t: [
                    self.tof_to_rgb.t.x,
                    self.tof_to_rgb.t.y,
                    self.tof_to_rgb.t.z,
                ],
            },
        }
    }

    /// Parses and validates the calibration JSON document. `R` is row-major.
    pub fn from_json(text: &str) -> Result<Self, CoreError> {
        Calibration::from_doc(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("calibration serializes")
    }
}

impl serde::Serialize for Calibration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> serde::Deserialize<'de> for Calibration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = CalibrationDoc::deserialize(d)?;
        Calibration::from_doc(doc).map_err(serde::de::Error::custom)
    }
}
