//! The two-branch fusion network.
//!
//! Both branches run the same encoder/decoder shape on different inputs: an
//! RGB image and a raw depth stack (reconstructed depth, amplitude,
//! validity). Five stride-2 encoder stages take the input to 1/32 scale;
//! the decoder mirrors them with skip connections and emits depth at 1/8,
//! 1/4, 1/2, and full resolution through sigmoid heads mapped onto
//! `[d_min, d_max]`.
//!
//! Fusion placements:
//!
//! * `None`: the branches never exchange information (the baseline).
//! * `Bottleneck`: one fusion block per direction at the 1/32 features.
//!   Features there are coarse enough that no geometric alignment is
//!   needed; the blocks learn the correspondence implicitly.
//! * `All`: bottleneck fusion plus donation of depth-branch features into
//!   the RGB branch at the 1/16, 1/8, and 1/4 decoder scales. Those
//!   features are explicitly warped into the RGB view first, through a
//!   warp field built from the RGB branch's own coarse depth estimate (an
//!   auxiliary 1/16 head), so the fusion blocks see spatially aligned
//!   donors. The warp field is constant per forward pass: gradients flow
//!   through the warped features, not the geometry.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tofu_core::{Extrinsics, Intrinsics, Raster, RasterKind};
use tofu_geometry::{backward_warp_field, resample_warp_field, WarpField};

use crate::fusion::{FusionBlock, FusionKind};
use crate::params::{conv_layer, init_conv, ParamNodes, ParamStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::{Scalar, Tensor};
use crate::NnError;

pub const ENCODER_WIDTHS: [usize; 5] = [8, 16, 32, 64, 64];
pub const DECODER_WIDTHS: [usize; 5] = [64, 32, 16, 8, 8];
/// Input extents must be divisible by this (2^5 encoder stages).
pub const SIZE_MULTIPLE: usize = 32;
/// Input channels: RGB image and the depth/amplitude/validity stack.
pub const RGB_CHANNELS: usize = 3;
pub const TOF_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    None,
    Bottleneck,
    All,
}

impl Placement {
    pub fn code(self) -> u32 {
        match self {
            Placement::None => 0,
            Placement::Bottleneck => 1,
            Placement::All => 2,
        }
    }

    pub fn from_code(code: u32) -> Result<Self, NnError> {
        match code {
            0 => Ok(Placement::None),
            1 => Ok(Placement::Bottleneck),
            2 => Ok(Placement::All),
            other => Err(NnError::Checkpoint(format!("unknown placement {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub placement: Placement,
    pub kind: FusionKind,
    /// Depth range the sigmoid heads map onto, metres.
    pub d_min: f64,
    pub d_max: f64,
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.d_min.is_finite() && self.d_max.is_finite())
            || self.d_min <= 0.0
            || self.d_max <= self.d_min
        {
            return Err(NnError::Shape(format!(
                "depth range must satisfy 0 < d_min < d_max, got [{}, {}]",
                self.d_min, self.d_max
            )));
        }
        Ok(())
    }
}

/// Geometry needed to warp depth-branch features into the RGB view.
#[derive(Debug, Clone)]
pub struct WarpContext {
    pub k_tof: Intrinsics,
    pub k_rgb: Intrinsics,
    /// Pose taking RGB-camera points to depth-camera points.
    pub rgb_to_tof: Extrinsics,
}

/// Tape handles produced by one forward pass.
#[derive(Debug)]
pub struct NetOutputs {
    /// RGB-branch depth at 1/8, 1/4, 1/2, 1/1 of the input extent.
    pub rgb_scales: Vec<NodeId>,
    /// Depth-branch depth at the same scales.
    pub tof_scales: Vec<NodeId>,
    /// RGB-branch auxiliary 1/16 depth, present with `Placement::All`.
    pub rgb_aux_sixteenth: Option<NodeId>,
    /// The input leaves, for structural inspection.
    pub rgb_input: NodeId,
    pub tof_input: NodeId,
    /// Tape location of every parameter.
    pub params: ParamNodes,
}

impl NetOutputs {
    /// Full-resolution RGB-branch prediction.
    pub fn rgb_full(&self) -> NodeId {
        *self.rgb_scales.last().expect("four scales")
    }

    pub fn tof_full(&self) -> NodeId {
        *self.tof_scales.last().expect("four scales")
    }
}

#[derive(Debug, Clone)]
pub struct FusionNet {
    config: NetConfig,
}

impl FusionNet {
    pub fn new(config: NetConfig) -> Result<Self, NnError> {
        config.validate()?;
        Ok(FusionNet { config })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    fn bottleneck_blocks(&self) -> (FusionBlock, FusionBlock) {
        let c = ENCODER_WIDTHS[4];
        (
            FusionBlock::named(self.config.kind, "fuse.bn.rgb", c),
            FusionBlock::named(self.config.kind, "fuse.bn.tof", c),
        )
    }

    fn decoder_blocks(&self) -> [FusionBlock; 3] {
        [
            FusionBlock::named(self.config.kind, "fuse.dec16", DECODER_WIDTHS[0]),
            FusionBlock::named(self.config.kind, "fuse.dec8", DECODER_WIDTHS[1]),
            FusionBlock::named(self.config.kind, "fuse.dec4", DECODER_WIDTHS[2]),
        ]
    }

    /// Freshly initialized parameters for this architecture. The same seed
    /// always produces bit-identical tensors.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for branch in ["rgb", "tof"] {
            let in_ch = if branch == "rgb" {
                RGB_CHANNELS
            } else {
                TOF_CHANNELS
            };
            let mut prev = in_ch;
            for (i, width) in ENCODER_WIDTHS.iter().enumerate() {
                init_conv(&mut store, &mut rng, &format!("{branch}.enc{i}.down"), *width, prev, 3);
                init_conv(&mut store, &mut rng, &format!("{branch}.enc{i}.keep"), *width, *width, 3);
                prev = *width;
            }
            for (j, width) in DECODER_WIDTHS.iter().enumerate() {
                let up_in = if j == 0 {
                    ENCODER_WIDTHS[4]
                } else {
                    DECODER_WIDTHS[j - 1]
                };
                init_conv(&mut store, &mut rng, &format!("{branch}.dec{j}.up"), *width, up_in, 3);
                let mix_in = *width + skip_channels(j);
                init_conv(&mut store, &mut rng, &format!("{branch}.dec{j}.mix"), *width, mix_in, 3);
            }
            for (scale, j) in [(8usize, 1usize), (4, 2), (2, 3), (1, 4)] {
                init_conv(
                    &mut store,
                    &mut rng,
                    &format!("{branch}.head{scale}"),
                    1,
                    DECODER_WIDTHS[j],
                    3,
                );
            }
        }
        if self.config.placement == Placement::All {
            init_conv(&mut store, &mut rng, "rgb.head16", 1, DECODER_WIDTHS[0], 3);
        }
        if self.config.placement != Placement::None {
            let c = ENCODER_WIDTHS[4];
            FusionBlock::declare(&mut store, &mut rng, self.config.kind, "fuse.bn.rgb", c);
            FusionBlock::declare(&mut store, &mut rng, self.config.kind, "fuse.bn.tof", c);
        }
        if self.config.placement == Placement::All {
            for (name, c) in [
                ("fuse.dec16", DECODER_WIDTHS[0]),
                ("fuse.dec8", DECODER_WIDTHS[1]),
                ("fuse.dec4", DECODER_WIDTHS[2]),
            ] {
                FusionBlock::declare(&mut store, &mut rng, self.config.kind, name, c);
            }
        }
        store
    }

    /// Runs the network on one sample pair.
    ///
    /// `ctx` is required for `Placement::All` and ignored otherwise.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore,
        rgb: Tensor<T>,
        tof: Tensor<T>,
        ctx: Option<&WarpContext>,
    ) -> Result<NetOutputs, NnError> {
        let (cr, h, w) = rgb.chw()?;
        let (ct, ht, wt) = tof.chw()?;
        if cr != RGB_CHANNELS || ct != TOF_CHANNELS {
            return Err(NnError::Shape(format!(
                "expected {RGB_CHANNELS}-channel rgb and {TOF_CHANNELS}-channel tof, got {cr} and {ct}"
            )));
        }
        if (h, w) != (ht, wt) || h % SIZE_MULTIPLE != 0 || w % SIZE_MULTIPLE != 0 || h == 0 {
            return Err(NnError::Shape(format!(
                "branch inputs must share an extent divisible by {SIZE_MULTIPLE}, got {h}x{w} and {ht}x{wt}"
            )));
        }
        let nodes = params.leaves_on(tape)?;
        let rgb_input = tape.leaf(rgb, false)?;
        let tof_input = tape.leaf(tof, false)?;

        let enc_rgb = encode(tape, &nodes, "rgb", rgb_input)?;
        let enc_tof = encode(tape, &nodes, "tof", tof_input)?;
        let mut z_rgb = enc_rgb[4];
        let mut z_tof = enc_tof[4];

        if self.config.placement != Placement::None {
            let (bn_rgb, bn_tof) = self.bottleneck_blocks();
            let fused_rgb = bn_rgb.apply(tape, &nodes, z_tof, z_rgb)?;
            let fused_tof = bn_tof.apply(tape, &nodes, z_rgb, z_tof)?;
            z_rgb = fused_rgb;
            z_tof = fused_tof;
        }

        let mut f_rgb = decoder_stage(tape, &nodes, "rgb", 0, z_rgb, Some(enc_rgb[3]))?;
        let mut f_tof = decoder_stage(tape, &nodes, "tof", 0, z_tof, Some(enc_tof[3]))?;

        let mut rgb_aux = None;
        let mut fields: Option<[WarpField; 3]> = None;
        if self.config.placement == Placement::All {
            let ctx = ctx.ok_or_else(|| {
                NnError::Shape("fusion at decoder scales needs a warp context".into())
            })?;
            let aux = head(tape, &nodes, "rgb.head16", f_rgb, &self.config)?;
            let full = self.aux_depth_raster(tape, aux, h, w)?;
            let field_full =
                backward_warp_field(&full, &ctx.k_tof, &ctx.k_rgb, &ctx.rgb_to_tof, w as u32, h as u32)
                    .map_err(NnError::Geometry)?;
            fields = Some([
                resample_warp_field(&field_full, 16)?,
                resample_warp_field(&field_full, 8)?,
                resample_warp_field(&field_full, 4)?,
            ]);
            rgb_aux = Some(aux);
        }

        let dec_blocks = self.decoder_blocks();
        if let Some(fields) = &fields {
            let warped = tape.warp_sample(f_tof, &fields[0])?;
            f_rgb = dec_blocks[0].apply(tape, &nodes, warped, f_rgb)?;
        }

        let mut rgb_scales = Vec::with_capacity(4);
        let mut tof_scales = Vec::with_capacity(4);
        for j in 1..5 {
            let skip_rgb = if j < 4 { Some(enc_rgb[3 - j]) } else { None };
            let skip_tof = if j < 4 { Some(enc_tof[3 - j]) } else { None };
            f_rgb = decoder_stage(tape, &nodes, "rgb", j, f_rgb, skip_rgb)?;
            f_tof = decoder_stage(tape, &nodes, "tof", j, f_tof, skip_tof)?;
            if j < 3 {
                if let Some(fields) = &fields {
                    let warped = tape.warp_sample(f_tof, &fields[j])?;
                    f_rgb = dec_blocks[j].apply(tape, &nodes, warped, f_rgb)?;
                }
            }
            let scale = [8usize, 4, 2, 1][j - 1];
            rgb_scales.push(head(tape, &nodes, &format!("rgb.head{scale}"), f_rgb, &self.config)?);
            tof_scales.push(head(tape, &nodes, &format!("tof.head{scale}"), f_tof, &self.config)?);
        }

        Ok(NetOutputs {
            rgb_scales,
            tof_scales,
            rgb_aux_sixteenth: rgb_aux,
            rgb_input,
            tof_input,
            params: nodes,
        })
    }

    /// Detached full-resolution raster of the auxiliary depth estimate.
    fn aux_depth_raster<T: Scalar>(
        &self,
        tape: &Tape<T>,
        aux: NodeId,
        h: usize,
        w: usize,
    ) -> Result<Raster, NnError> {
        let full = crate::ops::resize_bilinear_forward(tape.value(aux), h, w);
        full.cast::<f32>().to_raster(RasterKind::DepthM)
    }

    /// Convenience inference: full-resolution predictions of both branches.
    pub fn infer(
        &self,
        params: &ParamStore,
        rgb: &Tensor<f32>,
        tof: &Tensor<f32>,
        ctx: Option<&WarpContext>,
    ) -> Result<(Tensor<f32>, Tensor<f32>), NnError> {
        let mut tape = Tape::new();
        let outs = self.forward(&mut tape, params, rgb.clone(), tof.clone(), ctx)?;
        Ok((
            tape.value(outs.rgb_full()).clone(),
            tape.value(outs.tof_full()).clone(),
        ))
    }
}

fn skip_channels(j: usize) -> usize {
    if j < 4 {
        ENCODER_WIDTHS[3 - j]
    } else {
        0
    }
}

/// Five stride-2 stages; returns each stage's output, coarsest last.
fn encode<T: Scalar>(
    tape: &mut Tape<T>,
    nodes: &ParamNodes,
    branch: &str,
    input: NodeId,
) -> Result<Vec<NodeId>, NnError> {
    let mut x = input;
    let mut stages = Vec::with_capacity(5);
    for i in 0..5 {
        let down = conv_layer(tape, nodes, &format!("{branch}.enc{i}.down"), x, 2)?;
        let down = tape.relu(down)?;
        let keep = conv_layer(tape, nodes, &format!("{branch}.enc{i}.keep"), down, 1)?;
        x = tape.relu(keep)?;
        stages.push(x);
    }
    Ok(stages)
}

/// Upsample by two, convolve, merge the skip, convolve again.
fn decoder_stage<T: Scalar>(
    tape: &mut Tape<T>,
    nodes: &ParamNodes,
    branch: &str,
    j: usize,
    x: NodeId,
    skip: Option<NodeId>,
) -> Result<NodeId, NnError> {
    let (_, h, w) = tape.value(x).chw()?;
    let up = tape.resize(x, h * 2, w * 2)?;
    let up = conv_layer(tape, nodes, &format!("{branch}.dec{j}.up"), up, 1)?;
    let up = tape.relu(up)?;
    let merged = match skip {
        Some(s) => tape.concat_c(up, s)?,
        None => up,
    };
    let mixed = conv_layer(tape, nodes, &format!("{branch}.dec{j}.mix"), merged, 1)?;
    tape.relu(mixed)
}

/// Depth head: 3x3 conv to one channel, sigmoid, affine onto the range.
fn head<T: Scalar>(
    tape: &mut Tape<T>,
    nodes: &ParamNodes,
    prefix: &str,
    feat: NodeId,
    config: &NetConfig,
) -> Result<NodeId, NnError> {
    let logits = conv_layer(tape, nodes, prefix, feat, 1)?;
    let unit = tape.sigmoid(logits)?;
    tape.affine_scalar(unit, config.d_min, config.d_max - config.d_min)
}
