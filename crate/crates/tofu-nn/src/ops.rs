//! Numeric kernels behind the tape ops: forward passes and their adjoints.
//!
//! Kernels trust the shapes they are given; validation happens in the tape
//! builders. Scatter-style backward passes mirror their forward loops index
//! for index, which keeps the adjoints auditable against the forwards.

use tofu_geometry::WarpField;

use crate::tensor::{Scalar, Tensor};

pub(crate) fn conv2d_out_hw(h: usize, w: usize, k: usize, stride: usize) -> (usize, usize) {
    let p = k / 2;
    ((h + 2 * p - k) / stride + 1, (w + 2 * p - k) / stride + 1)
}

pub(crate) fn conv2d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
) -> Tensor<T> {
    let (cin, h, wid) = x.chw().unwrap();
    let (cout, k) = (w.dims()[0], w.dims()[2]);
    let p = k / 2;
    let (oh, ow) = conv2d_out_hw(h, wid, k, stride);
    let mut out = Tensor::zeros(vec![cout, oh, ow]);
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let od = out.data_mut();
    for co in 0..cout {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bd[co];
                for ci in 0..cin {
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = (ci * h + iy as usize) * wid;
                        let wrow = ((co * cin + ci) * k + ky) * k;
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - p as isize;
                            if ix < 0 || ix >= wid as isize {
                                continue;
                            }
                            acc += xd[xrow + ix as usize] * wd[wrow + kx];
                        }
                    }
                }
                od[(co * oh + oy) * ow + ox] = acc;
            }
        }
    }
    out
}

pub(crate) fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    dout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (cin, h, wid) = x.chw().unwrap();
    let (cout, k) = (w.dims()[0], w.dims()[2]);
    let p = k / 2;
    let (_, oh, ow) = dout.chw().unwrap();
    let mut dx = Tensor::zeros(vec![cin, h, wid]);
    let mut dw = Tensor::zeros(w.dims().to_vec());
    let mut db = Tensor::zeros(vec![cout]);
    let xd = x.data();
    let wd = w.data();
    let gd = dout.data();
    let dxd = dx.data_mut();
    let dwd = dw.data_mut();
    let dbd = db.data_mut();
    for co in 0..cout {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = gd[(co * oh + oy) * ow + ox];
                dbd[co] += g;
                for ci in 0..cin {
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as isize - p as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let xrow = (ci * h + iy as usize) * wid;
                        let wrow = ((co * cin + ci) * k + ky) * k;
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as isize - p as isize;
                            if ix < 0 || ix >= wid as isize {
                                continue;
                            }
                            dwd[wrow + kx] += g * xd[xrow + ix as usize];
                            dxd[xrow + ix as usize] += g * wd[wrow + kx];
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Taps and weights for one bilinear sample at align_corners=false position
/// `o` of an `out`-long axis mapped onto an `inp`-long axis.
#[inline]
fn resize_taps(o: usize, out: usize, inp: usize) -> (usize, usize, f64) {
    let src = (o as f64 + 0.5) * inp as f64 / out as f64 - 0.5;
    let i0 = src.floor();
    let f = src - i0;
    let a = (i0.max(0.0) as usize).min(inp - 1);
    let b = ((i0 + 1.0).max(0.0) as usize).min(inp - 1);
    (a, b, f)
}

pub(crate) fn resize_bilinear_forward<T: Scalar>(x: &Tensor<T>, oh: usize, ow: usize) -> Tensor<T> {
    let (c, h, w) = x.chw().unwrap();
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    let xd = x.data();
    let od = out.data_mut();
    for oy in 0..oh {
        let (y0, y1, fy) = resize_taps(oy, oh, h);
        for ox in 0..ow {
            let (x0, x1, fx) = resize_taps(ox, ow, w);
            for ci in 0..c {
                let base = ci * h;
                let v00 = xd[(base + y0) * w + x0].as_f64();
                let v10 = xd[(base + y0) * w + x1].as_f64();
                let v01 = xd[(base + y1) * w + x0].as_f64();
                let v11 = xd[(base + y1) * w + x1].as_f64();
                let top = v00 * (1.0 - fx) + v10 * fx;
                let bot = v01 * (1.0 - fx) + v11 * fx;
                od[(ci * oh + oy) * ow + ox] = T::from_f64(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    out
}

pub(crate) fn resize_bilinear_backward<T: Scalar>(
    in_dims: &[usize],
    dout: &Tensor<T>,
) -> Tensor<T> {
    let (c, h, w) = (in_dims[0], in_dims[1], in_dims[2]);
    let (_, oh, ow) = dout.chw().unwrap();
    let mut dx = Tensor::zeros(vec![c, h, w]);
    let gd = dout.data();
    let dxd = dx.data_mut();
    for oy in 0..oh {
        let (y0, y1, fy) = resize_taps(oy, oh, h);
        for ox in 0..ow {
            let (x0, x1, fx) = resize_taps(ox, ow, w);
            for ci in 0..c {
                let g = gd[(ci * oh + oy) * ow + ox].as_f64();
                let base = ci * h;
                dxd[(base + y0) * w + x0] += T::from_f64(g * (1.0 - fx) * (1.0 - fy));
                dxd[(base + y0) * w + x1] += T::from_f64(g * fx * (1.0 - fy));
                dxd[(base + y1) * w + x0] += T::from_f64(g * (1.0 - fx) * fy);
                dxd[(base + y1) * w + x1] += T::from_f64(g * fx * fy);
            }
        }
    }
    dx
}

/// Four source taps of one warp-field entry, with bilinear weights.
/// Returns nothing when the entry is invalid or samples outside the source.
#[inline]
fn warp_taps(field: &WarpField, x: u32, y: u32, w: usize, h: usize) -> Option<[(usize, usize, f64); 4]> {
    let (sx, sy) = field.get(x, y)?;
    if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
        return None;
    }
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    Some([
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ])
}

pub(crate) fn warp_gather_forward<T: Scalar>(x: &Tensor<T>, field: &WarpField) -> Tensor<T> {
    let (c, h, w) = x.chw().unwrap();
    let (oh, ow) = (field.height() as usize, field.width() as usize);
    let mut out = Tensor::zeros(vec![c, oh, ow]);
    let xd = x.data();
    let od = out.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            let Some(taps) = warp_taps(field, ox as u32, oy as u32, w, h) else {
                continue;
            };
            for ci in 0..c {
                let mut acc = 0.0f64;
                for (tx, ty, wt) in taps {
                    acc += xd[(ci * h + ty) * w + tx].as_f64() * wt;
                }
                od[(ci * oh + oy) * ow + ox] = T::from_f64(acc);
            }
        }
    }
    out
}

pub(crate) fn warp_gather_backward<T: Scalar>(
    in_dims: &[usize],
    field: &WarpField,
    dout: &Tensor<T>,
) -> Tensor<T> {
    let (c, h, w) = (in_dims[0], in_dims[1], in_dims[2]);
    let (_, oh, ow) = dout.chw().unwrap();
    let mut dx = Tensor::zeros(vec![c, h, w]);
    let gd = dout.data();
    let dxd = dx.data_mut();
    for oy in 0..oh {
        for ox in 0..ow {
            let Some(taps) = warp_taps(field, ox as u32, oy as u32, w, h) else {
                continue;
            };
            for ci in 0..c {
                let g = gd[(ci * oh + oy) * ow + ox].as_f64();
                for (tx, ty, wt) in taps {
                    dxd[(ci * h + ty) * w + tx] += T::from_f64(g * wt);
                }
            }
        }
    }
    dx
}

/// Scaled dot-product attention over the spatial positions of a feature map.
/// Tokens are pixels, token features are the channel vectors. Returns the
/// attended map and the row-stochastic probability matrix for the adjoint.
pub(crate) fn attention_forward<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let (c, h, w) = q.chw().unwrap();
    let n = h * w;
    let scale = 1.0 / (c as f64).sqrt();
    let qd = q.data();
    let kd = k.data();
    let vd = v.data();
    // Token i's feature c lives at stride n: qd[c * n + i].
    let mut probs = Tensor::zeros(vec![n, n]);
    let pd = probs.data_mut();
    let mut row = vec![0.0f64; n];
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for (j, r) in row.iter_mut().enumerate() {
            let mut dot = 0.0f64;
            for ci in 0..c {
                dot += qd[ci * n + i].as_f64() * kd[ci * n + j].as_f64();
            }
            *r = dot * scale;
            max = max.max(*r);
        }
        let mut sum = 0.0f64;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            sum += *r;
        }
        for (j, r) in row.iter().enumerate() {
            pd[i * n + j] = T::from_f64(r / sum);
        }
    }
    let mut out = Tensor::zeros(vec![c, h, w]);
    let od = out.data_mut();
    for ci in 0..c {
        for i in 0..n {
            let mut acc = 0.0f64;
            for j in 0..n {
                acc += pd[i * n + j].as_f64() * vd[ci * n + j].as_f64();
            }
            od[ci * n + i] = T::from_f64(acc);
        }
    }
    (out, probs)
}

pub(crate) fn attention_backward<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    probs: &Tensor<T>,
    dout: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (c, h, w) = q.chw().unwrap();
    let n = h * w;
    let scale = 1.0 / (c as f64).sqrt();
    let qd = q.data();
    let kd = k.data();
    let vd = v.data();
    let pd = probs.data();
    let gd = dout.data();
    let mut dq = Tensor::zeros(vec![c, h, w]);
    let mut dk = Tensor::zeros(vec![c, h, w]);
    let mut dv = Tensor::zeros(vec![c, h, w]);
    let dqd = dq.data_mut();
    let dkd = dk.data_mut();
    let dvd = dv.data_mut();
    // dV straight through the probability matrix.
    for ci in 0..c {
        for j in 0..n {
            let mut acc = 0.0f64;
            for i in 0..n {
                acc += pd[i * n + j].as_f64() * gd[ci * n + i].as_f64();
            }
            dvd[ci * n + j] = T::from_f64(acc);
        }
    }
    // Softmax adjoint row by row, then into Q and K.
    let mut dprob = vec![0.0f64; n];
    for i in 0..n {
        let mut dot = 0.0f64;
        for (j, dp) in dprob.iter_mut().enumerate() {
            let mut a = 0.0f64;
            for ci in 0..c {
                a += gd[ci * n + i].as_f64() * vd[ci * n + j].as_f64();
            }
            *dp = a;
            dot += a * pd[i * n + j].as_f64();
        }
        for (j, dp) in dprob.iter().enumerate() {
            let ds = pd[i * n + j].as_f64() * (dp - dot) * scale;
            if ds == 0.0 {
                continue;
            }
            for ci in 0..c {
                dqd[ci * n + i] += T::from_f64(ds * kd[ci * n + j].as_f64());
                dkd[ci * n + j] += T::from_f64(ds * qd[ci * n + i].as_f64());
            }
        }
    }
    (dq, dk, dv)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean absolute error over pixels with a positive mask weight.
/// Zero valid weight yields a zero loss (and a zero adjoint).
pub(crate) fn masked_l1_forward<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    mask: &Tensor<T>,
) -> f64 {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for ((p, t), m) in pred.data().iter().zip(target.data()).zip(mask.data()) {
        let m = m.as_f64();
        num += m * (p.as_f64() - t.as_f64()).abs();
        den += m;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub(crate) fn masked_l1_backward<T: Scalar>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    mask: &Tensor<T>,
    dloss: f64,
) -> Tensor<T> {
    let den: f64 = mask.data().iter().map(|m| m.as_f64()).sum();
    let mut dp = Tensor::zeros(pred.dims().to_vec());
    if den <= 0.0 {
        return dp;
    }
    let dpd = dp.data_mut();
    for (i, ((p, t), m)) in pred
        .data()
        .iter()
        .zip(target.data())
        .zip(mask.data())
        .enumerate()
    {
        dpd[i] = T::from_f64(dloss * m.as_f64() * sign(p.as_f64() - t.as_f64()) / den);
    }
    dp
}

/// Depth means below this floor stop contributing a normalization gradient.
const MEAN_FLOOR: f64 = 1e-6;

fn image_edge_weight<T: Scalar>(img: &Tensor<T>, axis_x: bool, y: usize, x: usize) -> f64 {
    let (c, h, w) = img.chw().unwrap();
    let (y2, x2) = if axis_x { (y, x + 1) } else { (y + 1, x) };
    let mut g = 0.0f64;
    for ci in 0..c {
        let a = img.data()[(ci * h + y) * w + x].as_f64();
        let b = img.data()[(ci * h + y2) * w + x2].as_f64();
        g += (b - a).abs();
    }
    (-(g / c as f64)).exp()
}

/// Edge-aware smoothness of a mean-normalized depth map: the average over
/// forward-difference edges of |d gradient| damped by e^-|image gradient|.
pub(crate) fn smoothness_forward<T: Scalar>(depth: &Tensor<T>, image: &Tensor<T>) -> f64 {
    let (_, h, w) = depth.chw().unwrap();
    let n = (h * w) as f64;
    let mean: f64 = depth.data().iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mu = mean.max(MEAN_FLOOR);
    let edges = (h * (w - 1) + (h - 1) * w) as f64;
    let mut acc = 0.0f64;
    let dd = depth.data();
    for y in 0..h {
        for x in 0..w - 1 {
            let g = (dd[y * w + x + 1].as_f64() - dd[y * w + x].as_f64()) / mu;
            acc += g.abs() * image_edge_weight(image, true, y, x);
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            let g = (dd[(y + 1) * w + x].as_f64() - dd[y * w + x].as_f64()) / mu;
            acc += g.abs() * image_edge_weight(image, false, y, x);
        }
    }
    acc / edges
}

pub(crate) fn smoothness_backward<T: Scalar>(
    depth: &Tensor<T>,
    image: &Tensor<T>,
    dloss: f64,
) -> Tensor<T> {
    let (_, h, w) = depth.chw().unwrap();
    let n = (h * w) as f64;
    let mean: f64 = depth.data().iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let mu = mean.max(MEAN_FLOOR);
    let clamped = mean < MEAN_FLOOR;
    let edges = (h * (w - 1) + (h - 1) * w) as f64;
    let dd = depth.data();
    // a = dL/d(d_hat) accumulated per pixel, with d_hat = d / mu.
    let mut a = vec![0.0f64; h * w];
    for y in 0..h {
        for x in 0..w - 1 {
            let s = sign(dd[y * w + x + 1].as_f64() - dd[y * w + x].as_f64());
            let we = image_edge_weight(image, true, y, x) / edges;
            a[y * w + x + 1] += s * we;
            a[y * w + x] -= s * we;
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            let s = sign(dd[(y + 1) * w + x].as_f64() - dd[y * w + x].as_f64());
            let we = image_edge_weight(image, false, y, x) / edges;
            a[(y + 1) * w + x] += s * we;
            a[y * w + x] -= s * we;
        }
    }
    // d(d_hat_p)/d(d_q) = delta_pq / mu - d_p / (mu^2 n) unless mu clamped.
    let correction = if clamped {
        0.0
    } else {
        let s: f64 = a
            .iter()
            .zip(dd.iter())
            .map(|(ai, di)| ai * di.as_f64())
            .sum();
        s / (mu * mu * n)
    };
    let mut dx = Tensor::zeros(depth.dims().to_vec());
    let dxd = dx.data_mut();
    for (i, ai) in a.iter().enumerate() {
        dxd[i] = T::from_f64(dloss * (ai / mu - correction));
    }
    dx
}
