//! Feature fusion blocks: how one branch's features enter the other's.
//!
//! Both blocks are residual on the receiving side, so a freshly initialized
//! block is close to a no-op and fusion strength is learned, not imposed.

use rand_chacha::ChaCha8Rng;

use crate::params::{conv_layer, init_conv, ParamNodes, ParamStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::Scalar;
use crate::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionKind {
    /// Convolutional gating: the donor is adapted, mixed with the receiver,
    /// and admitted through a learned per-pixel, per-channel sigmoid gate.
    Gated,
    /// Cross-attention with pixels as tokens: the receiver queries the
    /// donor's keys and values, and the attended result is projected back
    /// and added.
    Attention,
}

impl FusionKind {
    pub fn code(self) -> u32 {
        match self {
            FusionKind::Gated => 0,
            FusionKind::Attention => 1,
        }
    }

    pub fn from_code(code: u32) -> Result<Self, NnError> {
        match code {
            0 => Ok(FusionKind::Gated),
            1 => Ok(FusionKind::Attention),
            other => Err(NnError::Checkpoint(format!("unknown fusion kind {other}"))),
        }
    }
}

/// One directed fusion site: donor features `a` flow into receiver features
/// `b`. Both must have `channels` channels and equal spatial size.
#[derive(Debug, Clone)]
pub struct FusionBlock {
    kind: FusionKind,
    prefix: String,
    channels: usize,
}

impl FusionBlock {
    /// Handle to a block whose parameters already exist in some store.
    pub fn named(kind: FusionKind, prefix: &str, channels: usize) -> Self {
        FusionBlock {
            kind,
            prefix: prefix.to_string(),
            channels,
        }
    }

    /// Declares this block's parameters and returns the handle.
    pub fn declare(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        kind: FusionKind,
        prefix: &str,
        channels: usize,
    ) -> Self {
        match kind {
            FusionKind::Gated => {
                init_conv(store, rng, &format!("{prefix}.adapt"), channels, channels, 3);
                init_conv(store, rng, &format!("{prefix}.mix"), channels, 2 * channels, 3);
                init_conv(store, rng, &format!("{prefix}.gate"), channels, channels, 1);
            }
            FusionKind::Attention => {
                init_conv(store, rng, &format!("{prefix}.q"), channels, channels, 1);
                init_conv(store, rng, &format!("{prefix}.k"), channels, channels, 1);
                init_conv(store, rng, &format!("{prefix}.v"), channels, channels, 1);
                init_conv(store, rng, &format!("{prefix}.proj"), channels, channels, 1);
            }
        }
        FusionBlock {
            kind,
            prefix: prefix.to_string(),
            channels,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Applies the block on a tape: `b + admitted(a)`.
    pub fn apply<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        nodes: &ParamNodes,
        a: NodeId,
        b: NodeId,
    ) -> Result<NodeId, NnError> {
        let p = &self.prefix;
        match self.kind {
            FusionKind::Gated => {
                let adapted = conv_layer(tape, nodes, &format!("{p}.adapt"), a, 1)?;
                let adapted = tape.relu(adapted)?;
                let stacked = tape.concat_c(adapted, b)?;
                let mixed = conv_layer(tape, nodes, &format!("{p}.mix"), stacked, 1)?;
                let mixed = tape.relu(mixed)?;
                let gate = conv_layer(tape, nodes, &format!("{p}.gate"), mixed, 1)?;
                let gate = tape.sigmoid(gate)?;
                let admitted = tape.mul(gate, adapted)?;
                tape.add(b, admitted)
            }
            FusionKind::Attention => {
                let q = conv_layer(tape, nodes, &format!("{p}.q"), b, 1)?;
                let k = conv_layer(tape, nodes, &format!("{p}.k"), a, 1)?;
                let v = conv_layer(tape, nodes, &format!("{p}.v"), a, 1)?;
                let attended = tape.attention(q, k, v)?;
                let projected = conv_layer(tape, nodes, &format!("{p}.proj"), attended, 1)?;
                tape.add(b, projected)
            }
        }
    }
}
