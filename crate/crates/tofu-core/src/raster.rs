use crate::error::CoreError;

/// Semantic tag carried by a [`Raster`]. Consumers check it at API
/// boundaries instead of guessing from channel count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    /// Four correlation channels, plane order 0°, 180°, 90°, 270°.
    Correlation,
    /// Metric depth. Values `<= 0` or non-finite mean "no measurement".
    DepthM,
    /// Wrapped or unwrapped phase in radians; valid values are `>= 0`,
    /// invalid pixels carry a negative sentinel.
    PhaseRad,
    /// Correlation amplitude (arbitrary sensor units).
    Amplitude,
    /// Three-channel color in `[0, 1]`.
    Rgb,
    Generic,
}

/// Sentinel stored for pixels without a depth measurement.
pub const INVALID_DEPTH: f32 = 0.0;
/// Sentinel stored for pixels without a phase estimate.
pub const INVALID_PHASE: f32 = -1.0;

#[inline]
pub fn depth_valid(v: f32) -> bool {
    v.is_finite() && v > 0.0
}

#[inline]
pub fn phase_valid(v: f32) -> bool {
    v.is_finite() && v >= 0.0
}

/// Channel-planar, row-major float image. Plane `c` occupies
/// `data[c*w*h .. (c+1)*w*h]`, row `y` of a plane is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: u32,
    height: u32,
    channels: u32,
    kind: RasterKind,
    data: Vec<f32>,
}

fn kind_channels(kind: RasterKind) -> Option<u32> {
    match kind {
        RasterKind::Correlation => Some(4),
        RasterKind::DepthM | RasterKind::PhaseRad | RasterKind::Amplitude => Some(1),
        RasterKind::Rgb => Some(3),
        RasterKind::Generic => None,
    }
}

impl Raster {
    pub fn new(
        kind: RasterKind,
        width: u32,
        height: u32,
        channels: u32,
        data: Vec<f32>,
    ) -> Result<Self, CoreError> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(CoreError::ZeroSized {
                width,
                height,
                channels,
            });
        }
        if let Some(expected) = kind_channels(kind) {
            if channels != expected {
                return Err(CoreError::KindChannelMismatch {
                    kind,
                    expected,
                    got: channels,
                });
            }
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(CoreError::ShapeMismatch {
                width,
                height,
                channels,
                expected,
                got: data.len(),
            });
        }
        Ok(Raster {
            width,
            height,
            channels,
            kind,
            data,
        })
    }

    /// All-zero raster. Panics on zero dimensions or a kind/channel clash;
    /// use [`Raster::new`] when the shape is not statically known.
    pub fn zeros(kind: RasterKind, width: u32, height: u32, channels: u32) -> Self {
        let data = vec![0.0; width as usize * height as usize * channels as usize];
        Raster::new(kind, width, height, channels, data).expect("valid raster shape")
    }

    pub fn filled(kind: RasterKind, width: u32, height: u32, channels: u32, value: f32) -> Self {
        let data = vec![value; width as usize * height as usize * channels as usize];
        Raster::new(kind, width, height, channels, data).expect("valid raster shape")
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> u32 {
        self.channels
    }

    #[inline]
    pub fn kind(&self) -> RasterKind {
        self.kind
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Re-tags the raster, keeping the data. Fails when the new kind pins a
    /// different channel count.
    pub fn retag(mut self, kind: RasterKind) -> Result<Self, CoreError> {
        if let Some(expected) = kind_channels(kind) {
            if self.channels != expected {
                return Err(CoreError::KindChannelMismatch {
                    kind,
                    expected,
                    got: self.channels,
                });
            }
        }
        self.kind = kind;
        Ok(self)
    }

    #[inline]
    pub fn idx(&self, x: u32, y: u32, c: u32) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (c as usize * self.height as usize + y as usize) * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> f32 {
        self.data[self.idx(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u32, v: f32) {
        let i = self.idx(x, y, c);
        self.data[i] = v;
    }

    pub fn plane(&self, c: u32) -> &[f32] {
        let n = self.pixel_count();
        &self.data[c as usize * n..(c as usize + 1) * n]
    }

    pub fn plane_mut(&mut self, c: u32) -> &mut [f32] {
        let n = self.pixel_count();
        &mut self.data[c as usize * n..(c as usize + 1) * n]
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// Storage precision a correlation frame went through. `U8Quantized` marks
/// frames that were affine-mapped to 8 bits and back; the raster still holds
/// the dequantized floats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    F32,
    U8Quantized,
}

/// Plane indices of a correlation raster by demodulation control phase.
pub mod plane {
    pub const DEG_0: u32 = 0;
    pub const DEG_180: u32 = 1;
    pub const DEG_90: u32 = 2;
    pub const DEG_270: u32 = 3;
}

/// One four-phase capture: the raw correlation planes plus the modulation
/// frequency they were demodulated at.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFrame {
    pub raster: Raster,
    pub mod_freq_hz: f32,
    pub bit_depth: BitDepth,
}

impl CorrelationFrame {
    pub fn new(raster: Raster, mod_freq_hz: f32) -> Result<Self, CoreError> {
        if raster.kind() != RasterKind::Correlation || raster.channels() != 4 {
            return Err(CoreError::NotCorrelation);
        }
        if !mod_freq_hz.is_finite() || mod_freq_hz <= 0.0 {
            return Err(CoreError::BadFrequency(mod_freq_hz));
        }
        Ok(CorrelationFrame {
            raster,
            mod_freq_hz,
            bit_depth: BitDepth::F32,
        })
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.raster.width()
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.raster.height()
    }
}
