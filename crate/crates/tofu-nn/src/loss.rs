//! Training loss: masked L1 on every output scale of both branches, plus an
//! edge-aware smoothness prior on the full-resolution RGB-branch output.

use crate::net::NetOutputs;
use crate::tape::{NodeId, Tape};
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

/// Default weight of the smoothness term.
pub const DEFAULT_SMOOTH_WEIGHT: f64 = 1e-3;

/// Strided ground-truth pyramid level: picks every `scale`-th pixel and
/// derives the supervision mask (1 where the depth is usable). Striding
/// rather than averaging keeps invalid pixels from bleeding into the level.
pub fn downsample_depth<T: Scalar>(
    gt: &Tensor<T>,
    scale: usize,
) -> Result<(Tensor<T>, Tensor<T>), NnError> {
    let (c, h, w) = gt.chw()?;
    if c != 1 || scale == 0 || h % scale != 0 || w % scale != 0 {
        return Err(NnError::Shape(format!(
            "cannot stride a [{c}, {h}, {w}] depth map by {scale}"
        )));
    }
    let (oh, ow) = (h / scale, w / scale);
    let mut target = Tensor::zeros(vec![1, oh, ow]);
    let mut mask = Tensor::zeros(vec![1, oh, ow]);
    for y in 0..oh {
        for x in 0..ow {
            let v = gt.data()[y * scale * w + x * scale];
            if v > T::zero() {
                target.data_mut()[y * ow + x] = v;
                mask.data_mut()[y * ow + x] = T::one();
            }
        }
    }
    Ok((target, mask))
}

/// Assembles the scalar training loss for one sample.
///
/// Every depth output (four scales per branch, plus the auxiliary 1/16 RGB
/// head when present) contributes a masked L1 term against its strided
/// ground truth; the terms enter with equal weight 1/n. The smoothness term
/// is added on top with `smooth_weight`.
pub fn build_loss<T: Scalar>(
    tape: &mut Tape<T>,
    outs: &NetOutputs,
    gt_rgb: &Tensor<T>,
    gt_tof: &Tensor<T>,
    rgb_image: &Tensor<T>,
    smooth_weight: f64,
) -> Result<NodeId, NnError> {
    let (_, h, _) = gt_rgb.chw()?;
    let mut terms: Vec<NodeId> = Vec::new();
    for (scales, gt) in [(&outs.rgb_scales, gt_rgb), (&outs.tof_scales, gt_tof)] {
        for pred in scales {
            terms.push(l1_at_scale(tape, *pred, gt, h)?);
        }
    }
    if let Some(aux) = outs.rgb_aux_sixteenth {
        terms.push(l1_at_scale(tape, aux, gt_rgb, h)?);
    }
    let each = 1.0 / terms.len() as f64;
    let mut weighted: Vec<(NodeId, f64)> = terms.into_iter().map(|t| (t, each)).collect();
    if smooth_weight != 0.0 {
        let image = tape.leaf(rgb_image.clone(), false)?;
        let smooth = tape.smoothness(outs.rgb_full(), image)?;
        weighted.push((smooth, smooth_weight));
    }
    tape.weighted_sum(&weighted)
}

fn l1_at_scale<T: Scalar>(
    tape: &mut Tape<T>,
    pred: NodeId,
    gt: &Tensor<T>,
    full_h: usize,
) -> Result<NodeId, NnError> {
    let (_, ph, _) = tape.value(pred).chw()?;
    if full_h % ph != 0 {
        return Err(NnError::Shape(format!(
            "prediction height {ph} does not divide ground truth height {full_h}"
        )));
    }
    let (target, mask) = downsample_depth(gt, full_h / ph)?;
    let target = tape.leaf(target, false)?;
    let mask = tape.leaf(mask, false)?;
    tape.masked_l1(pred, target, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsampling_strides_and_masks() {
        let mut gt = Tensor::<f32>::zeros(vec![1, 4, 4]);
        for (i, v) in gt.data_mut().iter_mut().enumerate() {
            *v = i as f32;
        }
        // gt[0] stays 0.0: invalid.
        let (target, mask) = downsample_depth(&gt, 2).unwrap();
        assert_eq!(target.dims(), &[1, 2, 2]);
        assert_eq!(target.data(), &[0.0, 2.0, 8.0, 10.0]);
        assert_eq!(mask.data(), &[0.0, 1.0, 1.0, 1.0]);
        assert!(downsample_depth(&gt, 3).is_err());
    }
}
