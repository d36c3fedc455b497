//! Two-branch depth estimation network with cross-modal fusion, on a
//! hand-rolled reverse-mode tape.
//!
//! The crate is organized bottom-up:
//!
//! * [`tensor`] and [`tape`]: dense CHW tensors and the autodiff tape. The
//!   tape is generic over f32/f64 so the gradient test battery can run the
//!   exact training code at double precision against finite differences.
//! * [`fusion`]: the gated and attention fusion blocks that mix features
//!   between the RGB and depth branches.
//! * [`net`]: the encoder/decoder pair, depth heads, and the fusion
//!   placements (none, bottleneck, all decoder scales with explicit
//!   feature warping).
//! * [`loss`], [`adam`], [`checkpoint`]: multiscale training loss, the
//!   optimizer, and the on-disk parameter format.

pub mod adam;
pub mod checkpoint;
pub mod fusion;
pub mod loss;
pub mod net;
mod ops;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use fusion::FusionKind;
pub use net::{
    FusionNet, NetConfig, NetOutputs, Placement, WarpContext, DECODER_WIDTHS, ENCODER_WIDTHS,
    RGB_CHANNELS, SIZE_MULTIPLE, TOF_CHANNELS,
};
pub use params::ParamStore;
pub use tape::{NodeId, Tape, MAX_ATTENTION_TOKENS};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite values in {what}")]
    NonFinite { what: String },
    #[error("attention over {tokens} tokens exceeds the cap of {cap}")]
    TokenCap { tokens: usize, cap: usize },
    #[error("no parameter named {0}")]
    MissingParam(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Geometry(#[from] tofu_geometry::GeometryError),
}
