use nalgebra::DVector;
use rand::Rng;
use sichan::channel::{apply_channel, Scir};
use sichan::seed;
use sichan::td::{build_design_matrix, solve_ls_oracle, solve_normal_equations};
use sichan::{estimate_td, generate_frame, OfdmConfig, SampleBuffer, TdOptions, C64};

fn random_signal(len: usize, seed_value: u64) -> Vec<C64> {
    let mut rng = seed::rng(seed_value);
    (0..len).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn window_observation(y: &[C64], n: usize, l: usize) -> DVector<C64> {
    DVector::from_fn(l, |r, _| n.checked_sub(r).map_or(C64::new(0.0, 0.0), |i| y[i]))
}

#[test]
fn static_three_tap_channel_recovered_at_every_full_window() {
    let frame = generate_frame(&OfdmConfig::reference().with_blocks(6)).unwrap();
    let mut taps = vec![C64::new(0.0, 0.0); 40];
    taps[0] = C64::new(0.9, -0.1);
    taps[17] = C64::new(-0.3, 0.25);
    taps[39] = C64::new(0.05, 0.12);
    let x = frame.time_signal();
    let y = apply_channel(x, &Scir::constant(&taps, x.len())).unwrap();
    let opts = TdOptions::reference();
    let est = estimate_td(&y, x, &opts).unwrap();
    // only windows reaching back before the first sample may be flagged
    assert!(est.singular_columns.iter().all(|&j| j < opts.partial_support_end()));
    let mut truth = vec![C64::new(0.0, 0.0); opts.channel_len];
    truth[..40].copy_from_slice(&taps);
    let mut worst: f64 = 0.0;
    for j in opts.partial_support_end()..est.taps.cols() {
        worst = worst.max(rel_err(est.taps.column(j), &truth));
    }
    assert!(worst <= 1e-8, "worst relative error {worst:e}");
}

#[test]
fn normal_equations_match_svd_oracle() {
    let mut count = 0;
    for (k, &m) in [8usize, 32, 90, 256].iter().cycle().take(100).enumerate() {
        let l = 2 * m;
        let x = random_signal(l + m + 5, 100 + k as u64);
        let y = random_signal(l + m + 5, 900 + k as u64);
        let n = l + m + 4;
        let design = build_design_matrix(&x, n, l, m).unwrap();
        let obs = window_observation(&y, n, l);
        let fast = solve_normal_equations(&design, &obs, 0.0).unwrap();
        let oracle = solve_ls_oracle(&design, &obs).unwrap();
        let oracle: Vec<C64> = oracle.iter().copied().collect();
        assert!(!fast.singular);
        let e = rel_err(&fast.h, &oracle);
        assert!(e <= 1e-8, "m={m} instance {k}: {e:e}");
        count += 1;
    }
    assert_eq!(count, 100);
}

#[test]
fn sliding_estimates_match_oracle_per_window() {
    let (m, l) = (32, 64);
    let x = random_signal(3000, 5);
    let y = random_signal(3000, 6);
    let opts = TdOptions { window_len: l, channel_len: m, stride: 1, ridge: 0.0, refresh_interval: 256 };
    let est = estimate_td(&SampleBuffer::new(y.clone(), 1.0).unwrap(), &SampleBuffer::new(x.clone(), 1.0).unwrap(), &opts).unwrap();
    assert!(est.singular_columns.iter().all(|&j| j < opts.partial_support_end()));
    for n in [94, 95, 255, 256, 257, 700, 1023, 2999] {
        let design = build_design_matrix(&x, n, l, m).unwrap();
        let oracle = solve_ls_oracle(&design, &window_observation(&y, n, l)).unwrap();
        let oracle: Vec<C64> = oracle.iter().copied().collect();
        let e = rel_err(est.taps.column(n), &oracle);
        assert!(e <= 1e-8, "window {n}: {e:e}");
    }
}

#[test]
fn residual_is_orthogonal_to_regressors() {
    let (m, l) = (16, 40);
    let x = random_signal(600, 11);
    let y = random_signal(600, 12);
    let opts = TdOptions { window_len: l, channel_len: m, stride: 1, ridge: 0.0, refresh_interval: 64 };
    let est = estimate_td(&SampleBuffer::new(y.clone(), 1.0).unwrap(), &SampleBuffer::new(x.clone(), 1.0).unwrap(), &opts).unwrap();
    for n in [60, 333, 599] {
        let design = build_design_matrix(&x, n, l, m).unwrap();
        let obs = window_observation(&y, n, l);
        let h = DVector::from_column_slice(est.taps.column(n));
        let residual = &obs - &design * h;
        let proj = design.adjoint() * &residual;
        let scale = design.norm() * obs.norm();
        assert!(proj.norm() / scale < 1e-10, "window {n}");
    }
}

#[test]
fn output_stride_only_decimates() {
    let x = SampleBuffer::new(random_signal(2000, 21), 1.0).unwrap();
    let y = SampleBuffer::new(random_signal(2000, 22), 1.0).unwrap();
    let base = TdOptions { refresh_interval: 100, ..TdOptions::for_channel_len(12) };
    let dense = estimate_td(&y, &x, &base).unwrap();
    for stride in [3usize, 7, 100, 512] {
        let sparse = estimate_td(&y, &x, &base.with_stride(stride)).unwrap();
        assert_eq!(sparse.taps.cols(), 2000usize.div_ceil(stride));
        for j in 0..sparse.taps.cols() {
            assert_eq!(sparse.taps.column(j), dense.taps.column(j * stride), "stride {stride} column {j}");
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let x = SampleBuffer::new(random_signal(1500, 31), 1.0).unwrap();
    let y = SampleBuffer::new(random_signal(1500, 32), 1.0).unwrap();
    let opts = TdOptions { refresh_interval: 64, ..TdOptions::for_channel_len(10) };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| estimate_td(&y, &x, &opts).unwrap());
    let b = four.install(|| estimate_td(&y, &x, &opts).unwrap());
    assert_eq!(a, b);
}

#[test]
fn window_shorter_than_channel_rejected() {
    let x = SampleBuffer::new(random_signal(100, 1), 1.0).unwrap();
    let opts = TdOptions { window_len: 8, ..TdOptions::for_channel_len(10) };
    let err = estimate_td(&x, &x, &opts).unwrap_err().to_string();
    assert!(err.contains("window_len"), "{err}");
}

#[test]
fn identity_channel_with_noise() {
    let frame = generate_frame(&OfdmConfig::reference().with_blocks(8)).unwrap();
    let x = frame.time_signal();
    let y = sichan::channel::add_noise(x, 1e-4, 3).unwrap();
    let opts = TdOptions::for_channel_len(32);
    let est = estimate_td(&y, x, &opts).unwrap();
    let cols = opts.partial_support_end()..est.taps.cols();
    let n = cols.len() as f64;
    let err: f64 = cols.map(|j| (est.taps.get(0, j) - C64::new(1.0, 0.0)).norm_sqr()).sum::<f64>() / n;
    assert!(err <= 1e-3, "tap-0 error power {err:e}");
}

#[test]
fn oracle_basic_cases() {
    let x = random_signal(64 + 32, 41);
    let design = build_design_matrix(&x, 90, 64, 32).unwrap();
    let h: Vec<C64> = random_signal(32, 42);
    let y = &design * DVector::from_column_slice(&h);
    let back = solve_ls_oracle(&design, &y).unwrap();
    assert!(rel_err(back.as_slice(), &h) <= 1e-10);
    let zero = solve_ls_oracle(&design, &DVector::zeros(64)).unwrap();
    assert!(zero.iter().all(|v| *v == C64::new(0.0, 0.0)));
}
