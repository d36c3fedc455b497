//! Dense CHW tensors over a float scalar.

use std::fmt;

use tofu_core::{Raster, RasterKind};

use crate::NnError;

/// Element type for tapes and tensors. Training runs in f32; the gradient
/// test battery instantiates the identical code at f64.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + fmt::Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense row-major tensor. Images are `[channels, height, width]`,
/// convolution weights `[c_out, c_in, k, k]`, scalars `[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n == 0 || n != data.len() {
            return Err(NnError::Shape(format!(
                "dims {dims:?} do not describe a buffer of {} elements",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        assert!(!dims.is_empty() && n > 0, "zero-sized tensor");
        Tensor {
            dims,
            data: vec![T::zero(); n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            dims: vec![1],
            data: vec![v],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Channel, height, width of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize), NnError> {
        match self.dims[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(NnError::Shape(format!(
                "expected a [C, H, W] tensor, got {:?}",
                self.dims
            ))),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Casts every element through f64.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }
}

impl Tensor<f32> {
    /// Copies a planar raster into a `[C, H, W]` tensor.
    pub fn from_raster(r: &Raster) -> Self {
        Tensor {
            dims: vec![
                r.channels() as usize,
                r.height() as usize,
                r.width() as usize,
            ],
            data: r.data().to_vec(),
        }
    }

    /// Copies a rank-3 tensor back into a raster of the given kind.
    pub fn to_raster(&self, kind: RasterKind) -> Result<Raster, NnError> {
        let (c, h, w) = self.chw()?;
        Raster::new(kind, w as u32, h as u32, c as u32, self.data.clone())
            .map_err(|e| NnError::Shape(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_dims() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(vec![], vec![]).is_err());
        assert!(Tensor::<f32>::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn raster_round_trip_preserves_layout() {
        let mut r = Raster::zeros(RasterKind::Rgb, 3, 2, 3);
        for (i, v) in r.data_mut().iter_mut().enumerate() {
            *v = i as f32;
        }
        let t = Tensor::from_raster(&r);
        assert_eq!(t.dims(), &[3, 2, 3]);
        let back = t.to_raster(RasterKind::Rgb).unwrap();
        assert_eq!(back.data(), r.data());
    }

    #[test]
    fn cast_round_trips_f32_values() {
        let t = Tensor::<f32>::new(vec![3], vec![1.5, -0.25, 3.0]).unwrap();
        let d: Tensor<f64> = t.cast();
        let back: Tensor<f32> = d.cast();
        assert_eq!(back, t);
    }
}
