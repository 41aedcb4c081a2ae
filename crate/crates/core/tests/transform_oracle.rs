use proptest::prelude::*;
use rand::Rng;
use sichan::channel::time_varying_convolve;
use sichan::seed;
use sichan::signal::{convolve_linear, dft, idft, Spectrum};
use sichan::{SampleBuffer, TapMatrix, C64};

fn naive_dft(x: &[C64]) -> Vec<C64> {
    let k = x.len();
    (0..k)
        .map(|bin| {
            x.iter()
                .enumerate()
                .map(|(n, v)| {
                    let angle = -2.0 * std::f64::consts::PI * ((bin * n) % k) as f64 / k as f64;
                    v * C64::from_polar(1.0, angle)
                })
                .sum()
        })
        .collect()
}

fn random(len: usize, s: u64) -> Vec<C64> {
    let mut rng = seed::rng(s);
    (0..len).map(|_| C64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)).collect()
}

fn rel(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn fast_transform_matches_naive_dft() {
    for (i, k) in [1usize, 2, 17, 64, 256, 500, 512].into_iter().enumerate() {
        let x = random(k, 40 + i as u64);
        let fast = dft(&x).unwrap();
        let slow = naive_dft(&x);
        let e = rel(fast.bins(), &slow);
        assert!(e <= 1e-10, "K={k}: {e:e}");
    }
}

#[test]
fn inverse_matches_naive_and_round_trips() {
    for k in [1usize, 2, 17, 256, 512] {
        let bins = random(k, 7 * k as u64);
        // idft(X) = conj(dft(conj(X))) / K
        let conj: Vec<C64> = bins.iter().map(|v| v.conj()).collect();
        let slow: Vec<C64> = naive_dft(&conj).iter().map(|v| v.conj() / k as f64).collect();
        let fast = idft(&Spectrum(bins.clone())).unwrap();
        assert!(rel(&fast, &slow) <= 1e-10, "K={k}");
        let back = dft(&fast).unwrap();
        assert!(rel(back.bins(), &bins) <= 1e-12, "K={k}");
    }
}

#[test]
fn parseval() {
    for k in [1usize, 2, 17, 256, 512] {
        let x = random(k, 300 + k as u64);
        let time: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let freq: f64 = dft(&x).unwrap().bins().iter().map(|v| v.norm_sqr()).sum::<f64>() / k as f64;
        assert!((time - freq).abs() <= 1e-12 * time, "K={k}");
    }
}

#[test]
fn empty_input_rejected() {
    assert!(dft(&[]).is_err());
    assert!(idft(&Spectrum(Vec::new())).is_err());
}

fn double_loop(x: &[C64], taps: &TapMatrix, stride: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for n in 0..x.len() {
        for m in 0..taps.rows() {
            if m <= n {
                out[n] += taps.get(m, n / stride) * x[n - m];
            }
        }
    }
    out
}

#[test]
fn time_varying_convolution_matches_double_loop() {
    for (len, rows, stride) in [(1usize, 1usize, 1usize), (50, 7, 1), (300, 20, 4), (513, 64, 512), (97, 3, 13)] {
        let x = random(len, len as u64);
        let cols = len.div_ceil(stride);
        let taps = TapMatrix::from_columns(rows, random(rows * cols, 5000 + len as u64)).unwrap();
        let fast = time_varying_convolve(&x, &taps, stride).unwrap();
        let slow = double_loop(&x, &taps, stride);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-12, "len={len} stride={stride}");
        }
    }
}

#[test]
fn coverage_gap_rejected() {
    let x = random(100, 1);
    let taps = TapMatrix::zeros(4, 24);
    assert!(time_varying_convolve(&x, &taps, 4).is_err());
    assert!(time_varying_convolve(&x, &taps, 0).is_err());
}

#[test]
fn constant_columns_reduce_to_linear_convolution() {
    let x = random(200, 2);
    let h = random(9, 3);
    let mut taps = TapMatrix::zeros(9, 200);
    for j in 0..200 {
        taps.column_mut(j).copy_from_slice(&h);
    }
    let tv = time_varying_convolve(&x, &taps, 1).unwrap();
    let lin = convolve_linear(&SampleBuffer::new(x, 1.0).unwrap(), &h).unwrap();
    for (a, b) in tv.iter().zip(lin.samples()) {
        assert!((a - b).norm() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn convolution_is_linear(seed_value in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x1 = random(64, seed_value);
        let x2 = random(64, seed_value + 1);
        let taps = TapMatrix::from_columns(5, random(5 * 16, seed_value + 2)).unwrap();
        let combo: Vec<C64> = x1.iter().zip(&x2).map(|(p, q)| p * a + q * b).collect();
        let lhs = time_varying_convolve(&combo, &taps, 4).unwrap();
        let y1 = time_varying_convolve(&x1, &taps, 4).unwrap();
        let y2 = time_varying_convolve(&x2, &taps, 4).unwrap();
        for n in 0..64 {
            prop_assert!((lhs[n] - (y1[n] * a + y2[n] * b)).norm() <= 1e-12);
        }
    }

    #[test]
    fn round_trip_any_length(len in 1usize..600, seed_value in 0u64..1000) {
        let x = random(len, seed_value);
        let back = idft(&dft(&x).unwrap()).unwrap();
        prop_assert!(rel(&back, &x) <= 1e-12);
    }
}
