//! Ground-truth time-varying self-interference channel.
//!
//! A scenario lists discrete paths. Each path is either a constant complex
//! gain or a first-order complex Gauss-Markov process
//! `g[n] = a g[n-1] + sqrt(1 - a^2) u[n]` whose normalized autocorrelation
//! `a^|eta|` equals 0.8 at half the configured coherence time, i.e.
//! `a = 0.8^(2 / coherence_time_samples)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::TapMatrix;
use crate::seed::{self, derive_seed};
use crate::signal::{db_to_linear, SampleBuffer, C64};

/// Threshold on the normalized ACF that defines coherence time.
pub const COHERENCE_LEVEL: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fading {
    Static,
    GaussMarkov { coherence_time_samples: f64 },
}

impl Fading {
    /// AR(1) coefficient per sample; 1 for a static path.
    pub fn ar_coefficient(&self) -> f64 {
        match *self {
            Fading::Static => 1.0,
            Fading::GaussMarkov { coherence_time_samples } => {
                COHERENCE_LEVEL.powf(2.0 / coherence_time_samples)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub delay_samples: usize,
    pub mean_power_db: f64,
    pub fading: Fading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impairments {
    pub cfo_hz: f64,
    pub sro_ppm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub channel_len: usize,
    pub paths: Vec<PathSpec>,
    /// Noise power relative to a unit-power transmit signal.
    pub noise_power: f64,
    #[serde(default)]
    pub impairments: Option<Impairments>,
    #[serde(default)]
    pub seed: u64,
    /// Samples between stored SCIR columns.
    #[serde(default = "default_stride")]
    pub geotime_stride: usize,
}

fn default_stride() -> usize {
    1
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channel_len == 0 {
            return Err(invalid("channel: channel_len must be positive"));
        }
        if self.paths.is_empty() {
            return Err(invalid("channel: at least one path is required"));
        }
        if self.geotime_stride == 0 {
            return Err(invalid("channel: geotime_stride must be positive"));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(invalid("channel: noise_power must be a nonnegative number"));
        }
        let mut delays: Vec<usize> = self.paths.iter().map(|p| p.delay_samples).collect();
        delays.sort_unstable();
        if delays.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("channel: path delays must be distinct"));
        }
        for p in &self.paths {
            if p.delay_samples >= self.channel_len {
                return Err(invalid(format!(
                    "channel: path delay {} is outside channel_len {}",
                    p.delay_samples, self.channel_len
                )));
            }
            if !p.mean_power_db.is_finite() {
                return Err(invalid("channel: mean_power_db must be finite"));
            }
            if let Fading::GaussMarkov { coherence_time_samples } = p.fading {
                if !(coherence_time_samples > 0.0 && coherence_time_samples.is_finite()) {
                    return Err(invalid("channel: coherence_time_samples must be positive"));
                }
            }
        }
        if let Some(imp) = self.impairments {
            check_sro(imp.sro_ppm)?;
        }
        Ok(())
    }

    pub fn total_linear_power(&self) -> f64 {
        self.paths.iter().map(|p| db_to_linear(p.mean_power_db)).sum()
    }

    /// Hydrophone near the surface: stable direct path at 3 ms, fast surface
    /// bounce at 6 ms (9.3 dB down, 72 ms coherence) with a short diffuse
    /// tail, and a bottom-reflection cluster between 14 and 35 ms. The
    /// direct, surface and remaining shares of the SI power are 72%, 16% and
    /// 12%.
    pub fn lake_hyd1() -> Self {
        let total = 1.0 / 0.72;
        let surface_peak = db_to_linear(-9.3);
        let scatter = (0.16 * total - surface_peak) / 3.0;
        let bottom = 0.12 * total / 6.0;
        let gm = |c| Fading::GaussMarkov { coherence_time_samples: c };
        let db = |p: f64| (10.0 * p.log10() * 1e4).round() / 1e4;
        let mut paths = vec![
            PathSpec { delay_samples: 15, mean_power_db: 0.0, fading: Fading::Static },
            PathSpec { delay_samples: 30, mean_power_db: -9.3, fading: gm(360.0) },
        ];
        for d in 31..34 {
            paths.push(PathSpec { delay_samples: d, mean_power_db: db(scatter), fading: gm(360.0) });
        }
        for d in [70, 91, 112, 133, 154, 175] {
            paths.push(PathSpec { delay_samples: d, mean_power_db: db(bottom), fading: gm(600.0) });
        }
        Self {
            name: "lake-hyd1".into(),
            channel_len: 180,
            paths,
            noise_power: total * 1e-4,
            impairments: None,
            seed: 1,
            geotime_stride: 1,
        }
    }

    /// Hydrophone near the bottom: the bottom returns arrive before the
    /// surface bounce, which stays the strongest indirect path (74 ms
    /// coherence).
    pub fn lake_hyd2() -> Self {
        let total = 1.0 / 0.72;
        let surface_peak = db_to_linear(-9.3);
        let scatter = (0.16 * total - surface_peak) / 3.0;
        let bottom = 0.12 * total / 5.0;
        let gm = |c| Fading::GaussMarkov { coherence_time_samples: c };
        let db = |p: f64| (10.0 * p.log10() * 1e4).round() / 1e4;
        let mut paths = vec![PathSpec { delay_samples: 12, mean_power_db: 0.0, fading: Fading::Static }];
        for d in [24, 29, 35, 41, 48] {
            paths.push(PathSpec { delay_samples: d, mean_power_db: db(bottom), fading: gm(600.0) });
        }
        paths.push(PathSpec { delay_samples: 62, mean_power_db: -9.3, fading: gm(370.0) });
        for d in 63..66 {
            paths.push(PathSpec { delay_samples: d, mean_power_db: db(scatter), fading: gm(370.0) });
        }
        Self {
            name: "lake-hyd2".into(),
            channel_len: 128,
            paths,
            noise_power: total * 1e-4,
            impairments: Some(Impairments { cfo_hz: 0.3, sro_ppm: 9.765625 }),
            seed: 2,
            geotime_stride: 1,
        }
    }
}

/// Time-varying impulse response, `channel_len x columns`, one column per
/// `geotime_stride` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Scir {
    pub taps: TapMatrix,
    pub geotime_stride: usize,
}

impl Scir {
    pub fn channel_len(&self) -> usize {
        self.taps.rows()
    }

    pub fn covered_samples(&self) -> usize {
        self.taps.cols() * self.geotime_stride
    }

    /// Channel that is constant over `num_samples`.
    pub fn constant(taps: &[C64], num_samples: usize) -> Self {
        let mut m = TapMatrix::zeros(taps.len(), num_samples);
        for j in 0..num_samples {
            m.column_mut(j).copy_from_slice(taps);
        }
        Self { taps: m, geotime_stride: 1 }
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one realization of the scenario over `num_samples` samples.
pub fn realize_scir(spec: &ChannelSpec, num_samples: usize) -> Result<Scir> {
    spec.validate()?;
    if num_samples == 0 {
        return Err(invalid("realize_scir: num_samples must be positive"));
    }
    let stride = spec.geotime_stride;
    let cols = num_samples.div_ceil(stride);
    let mut taps = TapMatrix::zeros(spec.channel_len, cols);
    for (index, path) in spec.paths.iter().enumerate() {
        let mut rng = seed::rng(derive_seed(spec.seed, &format!("path/{index}")));
        let amplitude = db_to_linear(path.mean_power_db).sqrt();
        match path.fading {
            Fading::Static => {
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                let g = C64::from_polar(amplitude, phase);
                for j in 0..cols {
                    taps.set(path.delay_samples, j, g);
                }
            }
            Fading::GaussMarkov { .. } => {
                // Stepping `stride` samples at a time is the same process
                // observed every `stride` samples.
                let a = path.fading.ar_coefficient().powi(stride as i32);
                let innovation = (1.0 - a * a).sqrt();
                let mut g = complex_gaussian(&mut rng);
                for j in 0..cols {
                    if j > 0 {
                        g = g * a + complex_gaussian(&mut rng) * innovation;
                    }
                    taps.set(path.delay_samples, j, g * amplitude);
                }
            }
        }
    }
    Ok(Scir { taps, geotime_stride: stride })
}

/// `out[n] = sum_m taps[m, n / stride] x[n - m]` with zero history.
pub fn time_varying_convolve(x: &[C64], taps: &TapMatrix, stride: usize) -> Result<Vec<C64>> {
    if stride == 0 {
        return Err(invalid("geotime stride must be positive"));
    }
    if taps.cols() * stride < x.len() {
        return Err(invalid(format!(
            "channel covers {} samples, signal has {}",
            taps.cols() * stride,
            x.len()
        )));
    }
    let rows = taps.rows();
    let active: Vec<usize> = (0..rows)
        .filter(|&m| taps.columns().any(|c| c[m] != C64::new(0.0, 0.0)))
        .collect();
    let mut out = vec![C64::new(0.0, 0.0); x.len()];
    for (n, o) in out.iter_mut().enumerate() {
        let col = taps.column(n / stride);
        let mut acc = C64::new(0.0, 0.0);
        for &m in active.iter().take_while(|&&m| m <= n) {
            acc += col[m] * x[n - m];
        }
        *o = acc;
    }
    Ok(out)
}

pub fn apply_channel(x: &SampleBuffer, scir: &Scir) -> Result<SampleBuffer> {
    let s = time_varying_convolve(x.samples(), &scir.taps, scir.geotime_stride)?;
    x.with_samples(s)
}

/// Circularly-symmetric complex Gaussian samples with the given power.
pub fn noise_realization(len: usize, noise_power: f64, seed: u64) -> Result<Vec<C64>> {
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(invalid(format!("noise power must be nonnegative, got {noise_power}")));
    }
    let mut rng = seed::rng(seed);
    let sigma = noise_power.sqrt();
    Ok((0..len).map(|_| complex_gaussian(&mut rng) * sigma).collect())
}

pub fn add_noise(s: &SampleBuffer, noise_power: f64, seed: u64) -> Result<SampleBuffer> {
    let w = noise_realization(s.len(), noise_power, seed)?;
    if noise_power == 0.0 {
        return Ok(s.clone());
    }
    s.with_samples(s.samples().iter().zip(&w).map(|(a, b)| a + b).collect())
}

fn check_sro(sro_ppm: f64) -> Result<()> {
    if !(sro_ppm.abs() < 1000.0) {
        return Err(invalid(format!("sample-rate offset {sro_ppm} ppm is outside (-1000, 1000)")));
    }
    Ok(())
}

/// Resamples at ratio `1 + sro_ppm * 1e-6` by linear interpolation (the
/// last segment is extended past the end), then rotates by `cfo_hz`.
/// Calling again with both parameters negated undoes it.
pub fn apply_impairments(y: &SampleBuffer, cfo_hz: f64, sro_ppm: f64) -> Result<SampleBuffer> {
    check_sro(sro_ppm)?;
    if !cfo_hz.is_finite() {
        return Err(invalid("cfo must be finite"));
    }
    let src = y.samples();
    let mut out = if sro_ppm != 0.0 && src.len() >= 2 {
        let ratio = 1.0 + sro_ppm * 1e-6;
        let last = src.len() - 2;
        (0..src.len())
            .map(|n| {
                let pos = n as f64 * ratio;
                let i = (pos.floor() as usize).min(last);
                let frac = pos - i as f64;
                src[i] + (src[i + 1] - src[i]) * frac
            })
            .collect()
    } else {
        src.to_vec()
    };
    if cfo_hz != 0.0 {
        let step = std::f64::consts::TAU * cfo_hz / y.sample_rate_hz();
        for (n, v) in out.iter_mut().enumerate() {
            *v *= C64::from_polar(1.0, step * n as f64);
        }
    }
    y.with_samples(out)
}

/// Everything the simulator produced for one transmit signal.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scir: Scir,
    /// Noise-free self-interference `s[n]`.
    pub si: SampleBuffer,
    /// `y[n] = s[n] + w[n]`, with impairments applied if configured.
    pub received: SampleBuffer,
    /// Absolute noise power added to `s`.
    pub noise_power: f64,
}

pub fn simulate(x: &SampleBuffer, spec: &ChannelSpec, noise_seed: u64) -> Result<Simulation> {
    let scir = realize_scir(spec, x.len())?;
    let si = apply_channel(x, &scir)?;
    let noise_power = spec.noise_power * x.mean_power();
    let mut received = add_noise(&si, noise_power, noise_seed)?;
    if let Some(imp) = spec.impairments {
        received = apply_impairments(&received, imp.cfo_hz, imp.sro_ppm)?;
    }
    Ok(Simulation { scir, si, received, noise_power })
}

/// Front-end correction of known CFO and sample-rate offset.
pub fn compensate(received: &SampleBuffer, impairments: Option<Impairments>) -> Result<SampleBuffer> {
    match impairments {
        Some(imp) => apply_impairments(received, -imp.cfo_hz, -imp.sro_ppm),
        None => Ok(received.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::convolve_linear;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn single(fading: Fading, power_db: f64, seed: u64) -> ChannelSpec {
        ChannelSpec {
            name: String::new(),
            channel_len: 4,
            paths: vec![PathSpec { delay_samples: 0, mean_power_db: power_db, fading }],
            noise_power: 0.0,
            impairments: None,
            seed,
            geotime_stride: 1,
        }
    }

    fn sample_acf(g: &[C64], lag: usize) -> f64 {
        let n = g.len() - lag;
        let q0: f64 = g.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.len() as f64;
        let q: C64 = (lag..g.len()).map(|i| g[i] * g[i - lag].conj()).sum::<C64>() / n as f64;
        q.norm() / q0
    }

    #[test]
    fn static_unit_path_is_constant() {
        let scir = realize_scir(&single(Fading::Static, 0.0, 3), 50).unwrap();
        let first = scir.taps.get(0, 0);
        assert!((first.norm_sqr() - 1.0).abs() < 1e-12);
        for j in 0..50 {
            assert_eq!(scir.taps.get(0, j), first);
            assert_eq!(scir.taps.get(1, j), c(0.0, 0.0));
        }
    }

    #[test]
    fn gauss_markov_acf_crosses_at_half_coherence() {
        let spec = single(Fading::GaussMarkov { coherence_time_samples: 360.0 }, 0.0, 5);
        let scir = realize_scir(&spec, 400_000).unwrap();
        let g = scir.taps.row(0);
        let at = |lag| sample_acf(&g, lag);
        // first lag where the sample ACF drops below 0.8
        let crossing = (1..1000).find(|&l| at(l) < 0.8).unwrap();
        assert!((162..=198).contains(&crossing), "crossing at {crossing}");
    }

    #[test]
    fn gauss_markov_mean_power_matches_config() {
        for (power_db, seed) in [(-9.3, 1), (0.0, 2), (-15.5, 3)] {
            let spec = single(Fading::GaussMarkov { coherence_time_samples: 360.0 }, power_db, seed);
            let scir = realize_scir(&spec, 1_000_000).unwrap();
            let p = scir.taps.row(0).iter().map(|v| v.norm_sqr()).sum::<f64>() / 1e6;
            assert!((10.0 * p.log10() - power_db).abs() < 0.2, "{power_db}: got {}", 10.0 * p.log10());
        }
    }

    #[test]
    fn gauss_markov_window_power_is_stationary() {
        let spec = single(Fading::GaussMarkov { coherence_time_samples: 36.0 }, 0.0, 9);
        let scir = realize_scir(&spec, 100_000).unwrap();
        let g = scir.taps.row(0);
        let powers: Vec<f64> = g
            .chunks_exact(10_000)
            .map(|w| 10.0 * (w.iter().map(|v| v.norm_sqr()).sum::<f64>() / 1e4).log10())
            .collect();
        let lo = powers.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = powers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 1.0, "{powers:?}");
    }

    #[test]
    fn distinct_seeds_decorrelate() {
        let fading = Fading::GaussMarkov { coherence_time_samples: 36.0 };
        let a = realize_scir(&single(fading.clone(), 0.0, 1), 100_000).unwrap().taps.row(0);
        let b = realize_scir(&single(fading, 0.0, 2), 100_000).unwrap().taps.row(0);
        let cross: C64 = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum::<C64>() / 1e5;
        assert!(cross.norm() < 0.05, "{}", cross.norm());
    }

    #[test]
    fn realization_is_deterministic_and_strided_consistently() {
        let spec = ChannelSpec::lake_hyd1();
        assert_eq!(realize_scir(&spec, 3000).unwrap(), realize_scir(&spec, 3000).unwrap());
        let coarse = realize_scir(&ChannelSpec { geotime_stride: 10, ..spec }, 3001).unwrap();
        assert_eq!(coarse.taps.cols(), 301);
        assert!(realize_scir(&ChannelSpec::lake_hyd1(), 0).is_err());
    }

    #[test]
    fn apply_identity_and_toy_varying() {
        let x = SampleBuffer::new(vec![c(1.0, 0.0), c(-2.0, 1.0), c(0.5, 0.5)], 5000.0).unwrap();
        let id = Scir::constant(&[c(1.0, 0.0)], 3);
        assert_eq!(apply_channel(&x, &id).unwrap(), x);

        let ones = SampleBuffer::new(vec![c(1.0, 0.0); 3], 5000.0).unwrap();
        let mut ramp = TapMatrix::zeros(1, 3);
        for n in 0..3 {
            ramp.set(0, n, c(n as f64, 0.0));
        }
        let s = apply_channel(&ones, &Scir { taps: ramp, geotime_stride: 1 }).unwrap();
        assert_eq!(s.samples(), &[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
    }

    #[test]
    fn static_channel_equals_linear_convolution() {
        let frame = crate::ofdm::generate_frame(&crate::ofdm::OfdmConfig {
            subcarriers: 32,
            cp_len: 32,
            num_blocks: 4,
            bandwidth_hz: 5000.0,
            seed: 4,
        })
        .unwrap();
        let x = frame.time_signal();
        let taps = [c(0.0, 0.0), c(0.7, -0.2), c(0.0, 0.0), c(-0.1, 0.3)];
        let via_channel = apply_channel(x, &Scir::constant(&taps, x.len())).unwrap();
        let via_conv = convolve_linear(x, &taps).unwrap();
        for (a, b) in via_channel.samples().iter().zip(via_conv.samples()) {
            assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn channel_must_cover_signal() {
        let x = SampleBuffer::new(vec![c(1.0, 0.0); 10], 1.0).unwrap();
        let short = Scir::constant(&[c(1.0, 0.0)], 9);
        assert!(apply_channel(&x, &short).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let x = SampleBuffer::new(vec![c(-0.0, 1.0), c(2.0, -0.0)], 1.0).unwrap();
        let y = add_noise(&x, 0.0, 1).unwrap();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert!(add_noise(&x, -1.0, 1).is_err());
    }

    #[test]
    fn noise_statistics() {
        let w = noise_realization(1_000_000, 1.0, 77).unwrap();
        let n = w.len() as f64;
        let p = w.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((p - 1.0).abs() < 0.01, "{p}");
        let corr = w.iter().map(|v| v.re * v.im).sum::<f64>() / n / 0.5;
        assert!(corr.abs() < 0.01, "{corr}");
    }

    #[test]
    fn noise_can_be_subtracted_back_out() {
        let s = SampleBuffer::new((0..1000).map(|i| c((i as f64).sin(), 0.3)).collect(), 1.0).unwrap();
        let y = add_noise(&s, 1e-2, 5).unwrap();
        let w = noise_realization(1000, 1e-2, 5).unwrap();
        for ((yv, wv), sv) in y.samples().iter().zip(&w).zip(s.samples()) {
            assert!((yv - wv - sv).norm() <= 1e-15);
        }
    }

    fn tone(len: usize, freq: f64) -> SampleBuffer {
        SampleBuffer::new(
            (0..len).map(|n| C64::from_polar(1.0, std::f64::consts::TAU * freq * n as f64)).collect(),
            5000.0,
        )
        .unwrap()
    }

    fn rel_err(a: &SampleBuffer, b: &SampleBuffer) -> f64 {
        let num: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.samples().iter().map(|v| v.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn impairment_identity_and_cfo_inverse() {
        let y = tone(2000, 0.013);
        assert_eq!(apply_impairments(&y, 0.0, 0.0).unwrap(), y);
        let there = apply_impairments(&y, 0.3, 0.0).unwrap();
        let back = apply_impairments(&there, -0.3, 0.0).unwrap();
        assert!(rel_err(&back, &y) < 1e-9);
        assert!(apply_impairments(&y, 0.0, 1500.0).is_err());
    }

    #[test]
    fn sro_round_trip_residual() {
        // 5 Hz error on a 512 kHz sampling clock
        let ppm = 5.0 / 512e3 * 1e6;
        let y = tone(10_000, 0.002);
        let there = apply_impairments(&y, 0.3, ppm).unwrap();
        let back = apply_impairments(&there, -0.3, -ppm).unwrap();
        let err = rel_err(&back, &y);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn spec_validation() {
        let mut s = ChannelSpec::lake_hyd1();
        s.paths[1].delay_samples = 15;
        assert!(s.validate().is_err());
        let mut s = ChannelSpec::lake_hyd1();
        s.paths[0].delay_samples = 500;
        assert!(s.validate().is_err());
        let mut s = ChannelSpec::lake_hyd1();
        s.paths[1].fading = Fading::GaussMarkov { coherence_time_samples: 0.0 };
        assert!(s.validate().is_err());
        assert!(ChannelSpec::lake_hyd2().validate().is_ok());
    }

    #[test]
    fn lake_hyd1_power_split() {
        let s = ChannelSpec::lake_hyd1();
        let total = s.total_linear_power();
        let share = |f: &dyn Fn(usize) -> bool| {
            s.paths.iter().filter(|p| f(p.delay_samples)).map(|p| db_to_linear(p.mean_power_db)).sum::<f64>()
                / total
        };
        assert!((share(&|d| d == 15) - 0.72).abs() < 1e-4);
        assert!((share(&|d| (30..34).contains(&d)) - 0.16).abs() < 1e-4);
        assert!((share(&|d| d >= 70) - 0.12).abs() < 1e-4);
    }
}
