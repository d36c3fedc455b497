//! Reverse-mode autodiff on an append-only tape.
//!
//! Each builder call runs the forward kernel immediately, records the
//! operation, and returns a [`NodeId`]. [`Tape::backward`] then walks the
//! tape once in reverse, accumulating adjoints. Consumers always carry
//! larger ids than their inputs, so a single reverse sweep is sufficient.
//!
//! Every forward value and every accumulated gradient is checked for
//! non-finite elements; the first offender aborts with
//! [`NnError::NonFinite`] naming the operation, so numeric blowups surface
//! at their source instead of as a corrupted checkpoint three epochs later.

use tofu_geometry::WarpField;

use crate::ops;
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

pub type NodeId = usize;

/// Hard ceiling on attention tokens (pixels); the probability matrix is
/// tokens^2 and quadratic growth past this size is never intentional here.
pub const MAX_ATTENTION_TOKENS: usize = 1024;

enum Op<T> {
    Leaf,
    Conv { stride: usize },
    Relu,
    Sigmoid,
    Add,
    Mul,
    ConcatC,
    Resize,
    Warp { field: Box<WarpField> },
    Attention { probs: Tensor<T> },
    AffineScalar { slope: f64 },
    SumAll,
    MaskedL1,
    Smoothness,
    WeightedSum { weights: Vec<f64> },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv { .. } => "conv2d",
            Op::Relu => "relu",
            Op::Sigmoid => "sigmoid",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::ConcatC => "concat_c",
            Op::Resize => "resize",
            Op::Warp { .. } => "warp_sample",
            Op::Attention { .. } => "attention",
            Op::AffineScalar { .. } => "affine_scalar",
            Op::SumAll => "sum_all",
            Op::MaskedL1 => "masked_l1",
            Op::Smoothness => "smoothness",
            Op::WeightedSum { .. } => "weighted_sum",
        }
    }
}

struct Node<T> {
    op: Op<T>,
    inputs: Vec<NodeId>,
    value: Tensor<T>,
    requires_grad: bool,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id].value
    }

    /// Scalar value of a `[1]` node, as f64.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.dims(), &[1]);
        self.nodes[id].value.data()[0].as_f64()
    }

    /// Input ids of a node; the edges of the compute graph.
    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].inputs
    }

    fn push(
        &mut self,
        op: Op<T>,
        inputs: Vec<NodeId>,
        value: Tensor<T>,
    ) -> Result<NodeId, NnError> {
        if !value.all_finite() {
            return Err(NnError::NonFinite {
                what: format!("forward value of {}", op.name()),
            });
        }
        let requires_grad = inputs.iter().any(|i| self.nodes[*i].requires_grad);
        self.nodes.push(Node {
            op,
            inputs,
            value,
            requires_grad,
        });
        Ok(self.nodes.len() - 1)
    }

    /// Inserts a tensor as a graph input. Pass `requires_grad` for
    /// parameters; data and targets enter with it off.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Result<NodeId, NnError> {
        if !value.all_finite() {
            return Err(NnError::NonFinite {
                what: "leaf value".into(),
            });
        }
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            value,
            requires_grad,
        });
        Ok(self.nodes.len() - 1)
    }

    /// Same-padded 2D convolution, kernel 1 or 3, stride 1 or 2.
    /// `w` is `[c_out, c_in, k, k]`, `b` is `[c_out]`.
    pub fn conv2d(
        &mut self,
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
    ) -> Result<NodeId, NnError> {
        let (cin, _, _) = self.nodes[x].value.chw()?;
        let wdims = self.nodes[w].value.dims().to_vec();
        let bdims = self.nodes[b].value.dims().to_vec();
        if wdims.len() != 4 || wdims[2] != wdims[3] {
            return Err(NnError::Shape(format!(
                "conv weight must be [c_out, c_in, k, k], got {wdims:?}"
            )));
        }
        let (cout, k) = (wdims[0], wdims[2]);
        if wdims[1] != cin {
            return Err(NnError::Shape(format!(
                "conv weight expects {} input channels, input has {cin}",
                wdims[1]
            )));
        }
        if bdims != [cout] {
            return Err(NnError::Shape(format!(
                "conv bias must be [{cout}], got {bdims:?}"
            )));
        }
        if !matches!(k, 1 | 3) || !matches!(stride, 1 | 2) || (k == 1 && stride != 1) {
            return Err(NnError::Shape(format!(
                "unsupported conv geometry: kernel {k}, stride {stride}"
            )));
        }
        let value = ops::conv2d_forward(
            &self.nodes[x].value,
            &self.nodes[w].value,
            &self.nodes[b].value,
            stride,
        );
        self.push(Op::Conv { stride }, vec![x, w, b], value)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let mut v = self.nodes[x].value.clone();
        for e in v.data_mut() {
            if *e < T::zero() {
                *e = T::zero();
            }
        }
        self.push(Op::Relu, vec![x], v)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let mut v = self.nodes[x].value.clone();
        for e in v.data_mut() {
            *e = T::one() / (T::one() + (-*e).exp());
        }
        self.push(Op::Sigmoid, vec![x], v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_dims(a, b, "add")?;
        let mut v = self.nodes[a].value.clone();
        for (e, o) in v.data_mut().iter_mut().zip(self.nodes[b].value.data()) {
            *e += *o;
        }
        self.push(Op::Add, vec![a, b], v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_dims(a, b, "mul")?;
        let mut v = self.nodes[a].value.clone();
        for (e, o) in v.data_mut().iter_mut().zip(self.nodes[b].value.data()) {
            *e *= *o;
        }
        self.push(Op::Mul, vec![a, b], v)
    }

    /// Concatenates two `[C, H, W]` maps along channels.
    pub fn concat_c(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (ca, h, w) = self.nodes[a].value.chw()?;
        let (cb, hb, wb) = self.nodes[b].value.chw()?;
        if (h, w) != (hb, wb) {
            return Err(NnError::Shape(format!(
                "concat_c spatial mismatch: {h}x{w} vs {hb}x{wb}"
            )));
        }
        let mut data = Vec::with_capacity((ca + cb) * h * w);
        data.extend_from_slice(self.nodes[a].value.data());
        data.extend_from_slice(self.nodes[b].value.data());
        let value = Tensor::new(vec![ca + cb, h, w], data)?;
        self.push(Op::ConcatC, vec![a, b], value)
    }

    /// Bilinear resize (align_corners = false) to `oh` x `ow`.
    pub fn resize(&mut self, x: NodeId, oh: usize, ow: usize) -> Result<NodeId, NnError> {
        self.nodes[x].value.chw()?;
        if oh == 0 || ow == 0 {
            return Err(NnError::Shape("resize to zero size".into()));
        }
        let value = ops::resize_bilinear_forward(&self.nodes[x].value, oh, ow);
        self.push(Op::Resize, vec![x], value)
    }

    /// Samples `x` through a warp field. The field is a constant: gradients
    /// flow into the sampled features, never into the coordinates.
    pub fn warp_sample(&mut self, x: NodeId, field: &WarpField) -> Result<NodeId, NnError> {
        self.nodes[x].value.chw()?;
        let value = ops::warp_gather_forward(&self.nodes[x].value, field);
        self.push(
            Op::Warp {
                field: Box::new(field.clone()),
            },
            vec![x],
            value,
        )
    }

    /// Scaled dot-product attention with pixels as tokens. All three maps
    /// share one shape; output has the same shape.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId) -> Result<NodeId, NnError> {
        let (_, h, w) = self.nodes[q].value.chw()?;
        self.same_dims(q, k, "attention q/k")?;
        self.same_dims(q, v, "attention q/v")?;
        let tokens = h * w;
        if tokens > MAX_ATTENTION_TOKENS {
            return Err(NnError::TokenCap {
                tokens,
                cap: MAX_ATTENTION_TOKENS,
            });
        }
        let (value, probs) = ops::attention_forward(
            &self.nodes[q].value,
            &self.nodes[k].value,
            &self.nodes[v].value,
        );
        if !probs.all_finite() {
            return Err(NnError::NonFinite {
                what: "attention probabilities".into(),
            });
        }
        self.push(Op::Attention { probs }, vec![q, k, v], value)
    }

    /// `offset + slope * x` elementwise with constant coefficients.
    pub fn affine_scalar(&mut self, x: NodeId, offset: f64, slope: f64) -> Result<NodeId, NnError> {
        if !offset.is_finite() || !slope.is_finite() {
            return Err(NnError::Shape("non-finite affine coefficients".into()));
        }
        let mut v = self.nodes[x].value.clone();
        for e in v.data_mut() {
            *e = T::from_f64(offset + slope * e.as_f64());
        }
        self.push(Op::AffineScalar { slope }, vec![x], v)
    }

    /// Sum of all elements, as a `[1]` scalar.
    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId, NnError> {
        let s: f64 = self.nodes[x].value.data().iter().map(|v| v.as_f64()).sum();
        self.push(Op::SumAll, vec![x], Tensor::scalar(T::from_f64(s)))
    }

    /// Mean |pred - target| over elements where `mask` is positive.
    /// `target` and `mask` must not require gradients.
    pub fn masked_l1(
        &mut self,
        pred: NodeId,
        target: NodeId,
        mask: NodeId,
    ) -> Result<NodeId, NnError> {
        self.same_dims(pred, target, "masked_l1 pred/target")?;
        self.same_dims(pred, mask, "masked_l1 pred/mask")?;
        if self.nodes[target].requires_grad || self.nodes[mask].requires_grad {
            return Err(NnError::Shape(
                "masked_l1 target and mask must be constants".into(),
            ));
        }
        let v = ops::masked_l1_forward(
            &self.nodes[pred].value,
            &self.nodes[target].value,
            &self.nodes[mask].value,
        );
        self.push(
            Op::MaskedL1,
            vec![pred, target, mask],
            Tensor::scalar(T::from_f64(v)),
        )
    }

    /// Edge-aware smoothness of a `[1, H, W]` depth map against a reference
    /// image of the same extent. The image never receives gradients.
    pub fn smoothness(&mut self, depth: NodeId, image: NodeId) -> Result<NodeId, NnError> {
        let (cd, h, w) = self.nodes[depth].value.chw()?;
        let (_, hi, wi) = self.nodes[image].value.chw()?;
        if cd != 1 || (h, w) != (hi, wi) || h < 2 || w < 2 {
            return Err(NnError::Shape(format!(
                "smoothness wants [1, H>=2, W>=2] depth matching the image, got [{cd}, {h}, {w}] vs {hi}x{wi}"
            )));
        }
        if self.nodes[image].requires_grad {
            return Err(NnError::Shape(
                "smoothness reference image must be a constant".into(),
            ));
        }
        let v = ops::smoothness_forward(&self.nodes[depth].value, &self.nodes[image].value);
        self.push(
            Op::Smoothness,
            vec![depth, image],
            Tensor::scalar(T::from_f64(v)),
        )
    }

    /// Fixed-coefficient combination of `[1]` scalars.
    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId, NnError> {
        if terms.is_empty() {
            return Err(NnError::Shape("weighted_sum of nothing".into()));
        }
        let mut acc = 0.0f64;
        for (id, w) in terms {
            if self.nodes[*id].value.dims() != [1] {
                return Err(NnError::Shape(format!(
                    "weighted_sum input must be scalar, got {:?}",
                    self.nodes[*id].value.dims()
                )));
            }
            acc += w * self.scalar_value(*id);
        }
        let (inputs, weights) = terms.iter().copied().unzip();
        self.push(
            Op::WeightedSum { weights },
            inputs,
            Tensor::scalar(T::from_f64(acc)),
        )
    }

    fn same_dims(&self, a: NodeId, b: NodeId, what: &str) -> Result<(), NnError> {
        if self.nodes[a].value.dims() != self.nodes[b].value.dims() {
            return Err(NnError::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.nodes[a].value.dims(),
                self.nodes[b].value.dims()
            )));
        }
        Ok(())
    }

    /// Reverse sweep from a scalar loss. Returns one adjoint slot per node;
    /// slots stay `None` for nodes the loss does not depend on or that do
    /// not require gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<Option<Tensor<T>>>, NnError> {
        if self.nodes[loss].value.dims() != [1] {
            return Err(NnError::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.nodes[loss].value.dims()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Tensor::scalar(T::one()));
        for id in (0..=loss).rev() {
            if grads[id].is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            let g = grads[id].clone().unwrap();
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Conv { stride } => {
                    let [x, w, b] = node.inputs[..] else { unreachable!() };
                    let (dx, dw, db) = ops::conv2d_backward(
                        &self.nodes[x].value,
                        &self.nodes[w].value,
                        *stride,
                        &g,
                    );
                    self.accumulate(&mut grads, x, dx);
                    self.accumulate(&mut grads, w, dw);
                    self.accumulate(&mut grads, b, db);
                }
                Op::Relu => {
                    let x = node.inputs[0];
                    let mut dx = g.clone();
                    for (e, xv) in dx.data_mut().iter_mut().zip(self.nodes[x].value.data()) {
                        if *xv <= T::zero() {
                            *e = T::zero();
                        }
                    }
                    self.accumulate(&mut grads, x, dx);
                }
                Op::Sigmoid => {
                    let x = node.inputs[0];
                    let mut dx = g.clone();
                    for (e, s) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        *e *= *s * (T::one() - *s);
                    }
                    self.accumulate(&mut grads, x, dx);
                }
                Op::Add => {
                    self.accumulate(&mut grads, node.inputs[0], g.clone());
                    self.accumulate(&mut grads, node.inputs[1], g);
                }
                Op::Mul => {
                    let [a, b] = node.inputs[..] else { unreachable!() };
                    let mut da = g.clone();
                    for (e, bv) in da.data_mut().iter_mut().zip(self.nodes[b].value.data()) {
                        *e *= *bv;
                    }
                    let mut db = g;
                    for (e, av) in db.data_mut().iter_mut().zip(self.nodes[a].value.data()) {
                        *e *= *av;
                    }
                    self.accumulate(&mut grads, a, da);
                    self.accumulate(&mut grads, b, db);
                }
                Op::ConcatC => {
                    let [a, b] = node.inputs[..] else { unreachable!() };
                    let na = self.nodes[a].value.len();
                    let da = Tensor::new(
                        self.nodes[a].value.dims().to_vec(),
                        g.data()[..na].to_vec(),
                    )?;
                    let db = Tensor::new(
                        self.nodes[b].value.dims().to_vec(),
                        g.data()[na..].to_vec(),
                    )?;
                    self.accumulate(&mut grads, a, da);
                    self.accumulate(&mut grads, b, db);
                }
                Op::Resize => {
                    let x = node.inputs[0];
                    let dx = ops::resize_bilinear_backward(self.nodes[x].value.dims(), &g);
                    self.accumulate(&mut grads, x, dx);
                }
                Op::Warp { field } => {
                    let x = node.inputs[0];
                    let dx = ops::warp_gather_backward(self.nodes[x].value.dims(), field, &g);
                    self.accumulate(&mut grads, x, dx);
                }
                Op::Attention { probs } => {
                    let [q, k, v] = node.inputs[..] else { unreachable!() };
                    let (dq, dk, dv) = ops::attention_backward(
                        &self.nodes[q].value,
                        &self.nodes[k].value,
                        &self.nodes[v].value,
                        probs,
                        &g,
                    );
                    self.accumulate(&mut grads, q, dq);
                    self.accumulate(&mut grads, k, dk);
                    self.accumulate(&mut grads, v, dv);
                }
                Op::AffineScalar { slope } => {
                    let x = node.inputs[0];
                    let mut dx = g;
                    for e in dx.data_mut() {
                        *e = T::from_f64(e.as_f64() * slope);
                    }
                    self.accumulate(&mut grads, x, dx);
                }
                Op::SumAll => {
                    let x = node.inputs[0];
                    let gv = g.data()[0];
                    let mut dx = Tensor::zeros(self.nodes[x].value.dims().to_vec());
                    for e in dx.data_mut() {
                        *e = gv;
                    }
                    self.accumulate(&mut grads, x, dx);
                }
                Op::MaskedL1 => {
                    let [pred, target, mask] = node.inputs[..] else { unreachable!() };
                    let dp = ops::masked_l1_backward(
                        &self.nodes[pred].value,
                        &self.nodes[target].value,
                        &self.nodes[mask].value,
                        g.data()[0].as_f64(),
                    );
                    self.accumulate(&mut grads, pred, dp);
                }
                Op::Smoothness => {
                    let [depth, image] = node.inputs[..] else { unreachable!() };
                    let dd = ops::smoothness_backward(
                        &self.nodes[depth].value,
                        &self.nodes[image].value,
                        g.data()[0].as_f64(),
                    );
                    self.accumulate(&mut grads, depth, dd);
                }
                Op::WeightedSum { weights } => {
                    let gv = g.data()[0].as_f64();
                    for (input, w) in node.inputs.clone().into_iter().zip(weights) {
                        self.accumulate(
                            &mut grads,
                            input,
                            Tensor::scalar(T::from_f64(gv * w)),
                        );
                    }
                }
            }
        }
        for (id, g) in grads.iter().enumerate() {
            if let Some(g) = g {
                if !g.all_finite() {
                    return Err(NnError::NonFinite {
                        what: format!("gradient of {}", self.nodes[id].op.name()),
                    });
                }
            }
        }
        Ok(grads)
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], id: NodeId, add: Tensor<T>) {
        if !self.nodes[id].requires_grad {
            return;
        }
        match &mut grads[id] {
            Some(g) => {
                for (e, a) in g.data_mut().iter_mut().zip(add.data()) {
                    *e += *a;
                }
            }
            slot @ None => *slot = Some(add),
        }
    }
}
