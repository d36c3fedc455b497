//! Depth-map evaluation metrics.
//!
//! All statistics run over the pixels where the ground truth is valid,
//! optionally restricted to a ground-truth range window. Accumulation is
//! f64 in row-major pixel order, so results are reproducible bit for bit.

use tofu_core::{depth_valid, Raster, RasterKind};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("expected single-channel DepthM rasters, got {0:?}/{1} channels")]
    NotDepth(RasterKind, u32),
    #[error("size mismatch: pred {0}x{1}, gt {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("range clip must satisfy 0 <= lo < hi, got [{0}, {1}]")]
    BadClip(f64, f64),
    #[error("no valid ground-truth pixels to evaluate")]
    EmptyValidSet,
}

/// The four metric families over one prediction/ground-truth pair.
///
/// `rmse` and `rel_sqr` carry meters, `rel_abs` is dimensionless, and the
/// `delta*` fields are percentages of pixels whose depth ratio
/// `max(d/gt, gt/d)` stays strictly under 1.25, 1.25^2, 1.25^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub rel_abs: f64,
    pub rel_sqr: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub n_valid: usize,
}

pub const CSV_HEADER: &str = "rmse,rel_abs,rel_sqr,delta1,delta2,delta3,n_valid";

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.3},{:.3},{:.3},{}",
            self.rmse, self.rel_abs, self.rel_sqr, self.delta1, self.delta2, self.delta3,
            self.n_valid
        )
    }
}

const DELTA_BASE: f64 = 1.25;

/// Evaluates `pred` against `gt` over valid ground-truth pixels.
///
/// `range_clip = Some((lo, hi))` additionally requires `lo <= gt <= hi`.
/// Fails when the evaluation set is empty.
pub fn compute_metrics(
    pred: &Raster,
    gt: &Raster,
    range_clip: Option<(f64, f64)>,
) -> Result<MetricsReport, MetricsError> {
    for r in [pred, gt] {
        if r.kind() != RasterKind::DepthM || r.channels() != 1 {
            return Err(MetricsError::NotDepth(r.kind(), r.channels()));
        }
    }
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(MetricsError::SizeMismatch(
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
        ));
    }
    if let Some((lo, hi)) = range_clip {
        if !(0.0 <= lo && lo < hi) || !hi.is_finite() {
            return Err(MetricsError::BadClip(lo, hi));
        }
    }

    let mut n = 0usize;
    let mut sum_sq = 0.0f64;
    let mut sum_rel_abs = 0.0f64;
    let mut sum_rel_sqr = 0.0f64;
    let mut within = [0usize; 3];
    let thresholds = [
        DELTA_BASE,
        DELTA_BASE * DELTA_BASE,
        DELTA_BASE * DELTA_BASE * DELTA_BASE,
    ];
    for (p, g) in pred.plane(0).iter().zip(gt.plane(0)) {
        if !depth_valid(*g) {
            continue;
        }
        let g = *g as f64;
        if let Some((lo, hi)) = range_clip {
            if g < lo || g > hi {
                continue;
            }
        }
        let p = *p as f64;
        n += 1;
        let diff = p - g;
        sum_sq += diff * diff;
        sum_rel_abs += diff.abs() / g;
        sum_rel_sqr += diff * diff / g;
        let ratio = (p / g).max(g / p);
        for (slot, thr) in within.iter_mut().zip(thresholds) {
            if ratio < thr {
                *slot += 1;
            }
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyValidSet);
    }
    let nf = n as f64;
    Ok(MetricsReport {
        rmse: (sum_sq / nf).sqrt(),
        rel_abs: sum_rel_abs / nf,
        rel_sqr: sum_rel_sqr / nf,
        delta1: 100.0 * within[0] as f64 / nf,
        delta2: 100.0 * within[1] as f64 / nf,
        delta3: 100.0 * within[2] as f64 / nf,
        n_valid: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_matches_the_header_arity() {
        let report = MetricsReport {
            rmse: 0.5,
            rel_abs: 0.25,
            rel_sqr: 0.125,
            delta1: 0.0,
            delta2: 100.0,
            delta3: 100.0,
            n_valid: 9,
        };
        let row = report.csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert_eq!(row, "0.500000,0.250000,0.125000,0.000,100.000,100.000,9");
    }

    #[test]
    fn kind_and_size_are_enforced() {
        let d = Raster::filled(RasterKind::DepthM, 4, 4, 1, 2.0);
        let amp = Raster::filled(RasterKind::Amplitude, 4, 4, 1, 2.0);
        let small = Raster::filled(RasterKind::DepthM, 3, 4, 1, 2.0);
        assert!(matches!(
            compute_metrics(&amp, &d, None),
            Err(MetricsError::NotDepth(..))
        ));
        assert!(matches!(
            compute_metrics(&small, &d, None),
            Err(MetricsError::SizeMismatch(..))
        ));
        assert!(matches!(
            compute_metrics(&d, &d, Some((3.0, 1.0))),
            Err(MetricsError::BadClip(..))
        ));
    }

    #[test]
    fn all_invalid_ground_truth_is_an_error() {
        let pred = Raster::filled(RasterKind::DepthM, 4, 4, 1, 2.0);
        let gt = Raster::zeros(RasterKind::DepthM, 4, 4, 1);
        assert!(matches!(
            compute_metrics(&pred, &gt, None),
            Err(MetricsError::EmptyValidSet)
        ));
    }
}
