//! Monte-Carlo checks of the noise moments. Seeds are fixed, so the sample
//! statistics are deterministic; the tolerances leave ~5 sigma of slack.

use tofu_core::{CorrelationFrame, Raster, RasterKind};
use tofu_sensor::{apply_noise, NoiseConfig};

fn frame(w: u32, h: u32, fill: f32) -> CorrelationFrame {
    CorrelationFrame::new(Raster::filled(RasterKind::Correlation, w, h, 4, fill), 2.0e7).unwrap()
}

fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var, n)
}

#[test]
fn read_noise_std_is_calibrated() {
    // a million draws: sample std must land within 1% of sigma = 1
    let f = frame(500, 500, 10.0);
    let cfg = NoiseConfig {
        read_sigma: 1.0,
        seed: 2024,
        ..NoiseConfig::default()
    };
    let noisy = apply_noise(&f, &cfg).unwrap();
    let (_, var, n) = mean_var(
        noisy
            .raster
            .data()
            .iter()
            .zip(f.raster.data())
            .map(|(a, b)| (*a - *b) as f64),
    );
    assert_eq!(n, 1_000_000);
    let std = var.sqrt();
    assert!((0.99..=1.01).contains(&std), "sample std = {std}");
}

#[test]
fn shot_noise_variance_grows_linearly_with_signal() {
    // Var(v' - v) = (|v| + dc) / kappa, so the slope over |v| is 1/kappa
    let kappa = 2.0;
    let levels = [25.0, 100.0];
    let mut vars = Vec::new();
    for (i, level) in levels.iter().enumerate() {
        let f = frame(200, 200, *level as f32);
        let cfg = NoiseConfig {
            shot_scale: kappa,
            seed: 7 + i as u64,
            ..NoiseConfig::default()
        };
        let noisy = apply_noise(&f, &cfg).unwrap();
        let (_, var, _) = mean_var(
            noisy
                .raster
                .data()
                .iter()
                .zip(f.raster.data())
                .map(|(a, b)| (*a - *b) as f64),
        );
        vars.push(var);
    }
    let slope = (vars[1] - vars[0]) / (levels[1] - levels[0]);
    let expected = 1.0 / kappa;
    assert!(
        (slope - expected).abs() / expected < 0.10,
        "slope {slope}, expected {expected}"
    );
}

#[test]
fn shot_noise_is_mean_centered() {
    let f = frame(300, 300, 50.0);
    let cfg = NoiseConfig {
        shot_scale: 1.5,
        seed: 99,
        ..NoiseConfig::default()
    };
    let noisy = apply_noise(&f, &cfg).unwrap();
    let (mean, var, _) = mean_var(
        noisy
            .raster
            .data()
            .iter()
            .zip(f.raster.data())
            .map(|(a, b)| (*a - *b) as f64),
    );
    // standard error of the mean at this n is ~0.01, leave generous room
    assert!(mean.abs() < 0.1, "residual mean {mean}, var {var}");
}

#[test]
fn dropout_rate_matches_probability() {
    let f = frame(200, 200, 30.0);
    let cfg = NoiseConfig {
        dropout_prob: 0.25,
        seed: 5,
        ..NoiseConfig::default()
    };
    let noisy = apply_noise(&f, &cfg).unwrap();
    let zeros = noisy
        .raster
        .plane(0)
        .iter()
        .filter(|v| **v == 0.0)
        .count();
    let rate = zeros as f64 / 40_000.0;
    assert!((rate - 0.25).abs() < 0.01, "dropout rate {rate}");
}
