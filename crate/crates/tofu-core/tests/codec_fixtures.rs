//! Frozen byte-level fixtures for the codecs. These bytes were written out
//! by hand from the format definitions so that an implementation change that
//! flips endianness, row order or header layout fails loudly.

use tofu_core::io::{decode_frame, decode_raster, encode_frame, encode_raster, Format};
use tofu_core::{CorrelationFrame, Raster, RasterKind};

#[test]
fn pfm_single_pixel_exact_bytes() {
    let r = Raster::new(RasterKind::DepthM, 1, 1, 1, vec![1.0]).unwrap();
    let bytes = encode_raster(&r, Format::Pfm).unwrap();
    let mut expected = b"Pf\n1 1\n-1.0\n".to_vec();
    expected.extend_from_slice(&[0x00, 0x00, 0x80, 0x3F]); // 1.0f32 little-endian
    assert_eq!(bytes, expected);
}

#[test]
fn pfm_scanlines_are_bottom_up() {
    // top-down rows [1 2 / 3 4] must serialize pixel order 3,4,1,2
    let r = Raster::new(RasterKind::Generic, 2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let bytes = encode_raster(&r, Format::Pfm).unwrap();
    let payload = &bytes[bytes.len() - 16..];
    let vals: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert_eq!(vals, vec![3.0, 4.0, 1.0, 2.0]);

    let back = decode_raster(&bytes).unwrap().raster;
    assert_eq!(back.data(), r.data());
}

#[test]
fn pfm_color_interleaves_channels_per_pixel() {
    // 1x1 rgb pixel (0.25, 0.5, 0.75): file holds r,g,b in order
    let r = Raster::new(RasterKind::Rgb, 1, 1, 3, vec![0.25, 0.5, 0.75]).unwrap();
    let bytes = encode_raster(&r, Format::Pfm).unwrap();
    assert!(bytes.starts_with(b"PF\n1 1\n-1.0\n"));
    let payload = &bytes[bytes.len() - 12..];
    let vals: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    assert_eq!(vals, vec![0.25, 0.5, 0.75]);
}

#[test]
fn pfm_decodes_big_endian_payloads() {
    // positive scale marks big-endian, as written by tools on BE machines
    let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
    bytes.extend_from_slice(&0.5f32.to_be_bytes());
    bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
    let r = decode_raster(&bytes).unwrap().raster;
    assert_eq!(r.data(), &[0.5, -2.0]);
}

#[test]
fn tofc_header_layout_is_frozen() {
    let raster = Raster::new(
        RasterKind::Correlation,
        2,
        2,
        4,
        (1..=16).map(|v| v as f32).collect(),
    )
    .unwrap();
    let frame = CorrelationFrame::new(raster, 20.0e6).unwrap();
    let bytes = encode_frame(&frame);

    // 24-byte header + 2*2*4 little-endian f32 values
    assert_eq!(bytes.len(), 24 + 64);
    #[rustfmt::skip]
    let header: [u8; 24] = [
        b'T', b'O', b'F', b'C',
        1, 0, 0, 0,             // version
        2, 0, 0, 0,             // width
        2, 0, 0, 0,             // height
        4, 0, 0, 0,             // channels
        0x80, 0x96, 0x98, 0x4B, // 20e6 as f32, little-endian
    ];
    assert_eq!(&bytes[..24], &header);
    // payload is channel-planar: first plane first
    assert_eq!(f32::from_le_bytes(bytes[24..28].try_into().unwrap()), 1.0);
    assert_eq!(f32::from_le_bytes(bytes[84..88].try_into().unwrap()), 16.0);

    let back = decode_frame(&bytes).unwrap();
    assert_eq!(back.raster, frame.raster);
    assert_eq!(back.mod_freq_hz, 20.0e6);
}

#[test]
fn tofc_via_generic_encoder_has_no_frequency() {
    let r = Raster::new(RasterKind::DepthM, 2, 1, 1, vec![1.5, 0.0]).unwrap();
    let bytes = encode_raster(&r, Format::Tofc).unwrap();
    let decoded = decode_raster(&bytes).unwrap();
    assert_eq!(decoded.mod_freq_hz, None);
    assert_eq!(decoded.raster.data(), r.data());
}

#[test]
fn pgm8_stacks_correlation_planes() {
    let raster = Raster::new(
        RasterKind::Correlation,
        2,
        1,
        4,
        vec![0.0, 255.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
    )
    .unwrap();
    let bytes = encode_raster(&raster, Format::Pgm8).unwrap();
    let decoded = decode_raster(&bytes).unwrap().raster;
    assert_eq!(decoded.width(), 2);
    assert_eq!(decoded.height(), 4); // planes stacked vertically
    assert_eq!(decoded.data()[..2], [0.0, 255.0]);
}
