//! Sensing pipeline: Butterworth low-pass biquads and rate conversion.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PlanarWrench;

/// One second-order section, normalised so that `a0 == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiquadCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl BiquadCoefficients {
    /// Transfer function evaluated at z = 1.
    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2)
    }

    /// |H(e^{jω})| for normalised angular frequency `omega` (rad/sample).
    pub fn magnitude_at(&self, omega: f64) -> f64 {
        // H(z) with z^-1 = e^{-jω}
        let (s1, c1) = (-omega).sin_cos();
        let (s2, c2) = (-2.0 * omega).sin_cos();
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        num.0.hypot(num.1) / den.0.hypot(den.1)
    }

    /// Moduli of the two poles (roots of z² + a1·z + a2).
    pub fn pole_radii(&self) -> [f64; 2] {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            // complex pair: |p|² = a2
            let r = self.a2.sqrt();
            [r, r]
        } else {
            let s = disc.sqrt();
            [((-self.a1 + s) / 2.0).abs(), ((-self.a1 - s) / 2.0).abs()]
        }
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radii().iter().all(|r| *r < 1.0)
    }
}

/// Designs a Butterworth low-pass as a cascade of biquads (bilinear transform,
/// pre-warped at the cutoff). Supported orders: 2 and 4.
pub fn design_lowpass(cutoff_hz: f64, sample_hz: f64, order: usize) -> Result<Vec<BiquadCoefficients>> {
    let valid = cutoff_hz > 0.0 && sample_hz.is_finite() && cutoff_hz < sample_hz / 2.0 && matches!(order, 2 | 4);
    if !valid {
        return Err(Error::InvalidCutoff { cutoff_hz, sample_hz, order });
    }
    let w0 = 2.0 * PI * cutoff_hz / sample_hz;
    let (sin_w0, cos_w0) = w0.sin_cos();
    let sections = order / 2;
    let coeffs = (0..sections)
        .map(|k| {
            // pole-pair quality factors of the analog prototype
            let q = 1.0 / (2.0 * ((2 * k + 1) as f64 * PI / (2 * order) as f64).cos());
            let alpha = sin_w0 / (2.0 * q);
            let a0 = 1.0 + alpha;
            let b1 = (1.0 - cos_w0) / a0;
            BiquadCoefficients { b0: b1 / 2.0, b1, b2: b1 / 2.0, a1: -2.0 * cos_w0 / a0, a2: (1.0 - alpha) / a0 }
        })
        .collect();
    Ok(coeffs)
}

/// Delay registers of a biquad cascade (direct form II transposed).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterState {
    registers: Vec<[f64; 2]>,
}

impl FilterState {
    pub fn zeroed(sections: usize) -> Self {
        Self { registers: vec![[0.0; 2]; sections] }
    }

    /// Registers set to the steady state of a constant input `x`, so the first
    /// output equals `x` (assumes unity DC gain per section).
    pub fn warm(coeffs: &[BiquadCoefficients], x: f64) -> Self {
        let registers = coeffs.iter().map(|c| [x * (1.0 - c.b0), x * (c.b2 - c.a2)]).collect();
        Self { registers }
    }

    pub fn is_finite(&self) -> bool {
        self.registers.iter().flatten().all(|v| v.is_finite())
    }
}

/// Advances the cascade by one sample.
pub fn filter_step(state: &mut FilterState, coeffs: &[BiquadCoefficients], x: f64) -> f64 {
    debug_assert_eq!(state.registers.len(), coeffs.len());
    let mut v = x;
    for (z, c) in state.registers.iter_mut().zip(coeffs) {
        let y = c.b0 * v + z[0];
        z[0] = c.b1 * v - c.a1 * y + z[1];
        z[1] = c.b2 * v - c.a2 * y;
        v = y;
    }
    v
}

/// A single-channel streaming low-pass with optional warm start.
#[derive(Debug, Clone)]
pub struct LowPass {
    coeffs: Vec<BiquadCoefficients>,
    state: Option<FilterState>,
    warm_start: bool,
}

impl LowPass {
    pub fn new(coeffs: Vec<BiquadCoefficients>, warm_start: bool) -> Self {
        Self { coeffs, state: None, warm_start }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let coeffs = &self.coeffs;
        let warm = self.warm_start;
        let state = self.state.get_or_insert_with(|| {
            if warm {
                FilterState::warm(coeffs, x)
            } else {
                FilterState::zeroed(coeffs.len())
            }
        });
        filter_step(state, coeffs, x)
    }
}

/// Three independent low-pass channels for a planar wrench.
#[derive(Debug, Clone)]
pub struct WrenchFilter {
    channels: [LowPass; 3],
}

impl WrenchFilter {
    pub fn new(coeffs: Vec<BiquadCoefficients>, warm_start: bool) -> Self {
        let ch = LowPass::new(coeffs, warm_start);
        Self { channels: [ch.clone(), ch.clone(), ch] }
    }

    pub fn step(&mut self, w: PlanarWrench) -> PlanarWrench {
        let [fx, fy, tau] = &mut self.channels;
        PlanarWrench::new(fx.step(w.fx), fy.step(w.fy), tau.step(w.tau))
    }
}

/// Interpolation used when converting to a higher rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    #[default]
    Hold,
    Linear,
}

/// A timestamped scalar sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
}

/// Re-times a stream onto a uniform grid at `f_out`, starting at the first
/// input timestamp and ending at the last.
pub fn resample_hold(input: &[Sample], f_in: f64, f_out: f64, mode: ResampleMode) -> Result<Vec<Sample>> {
    if !(f_out >= f_in && f_in > 0.0) {
        return Err(Error::Config(format!("cannot resample {f_in} Hz to {f_out} Hz")));
    }
    for (i, w) in input.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::NonMonotoneInput { index: i + 1, t: w[1].t, prev: w[0].t });
        }
    }
    let (Some(first), Some(last)) = (input.first(), input.last()) else {
        return Ok(Vec::new());
    };
    let span = last.t - first.t;
    let n_out = (span * f_out + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_out);
    let mut j = 0;
    for k in 0..n_out {
        let t = first.t + k as f64 / f_out;
        while j + 1 < input.len() && input[j + 1].t <= t + 1e-12 {
            j += 1;
        }
        let value = match mode {
            ResampleMode::Hold => input[j].value,
            ResampleMode::Linear if j + 1 < input.len() => {
                let (a, b) = (input[j], input[j + 1]);
                a.value + (b.value - a.value) * (t - a.t) / (b.t - a.t)
            }
            ResampleMode::Linear => input[j].value,
        };
        out.push(Sample { t, value });
    }
    Ok(out)
}

/// Streaming zero-order hold: keeps the latest sensor sample for the faster
/// control loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct WrenchHold {
    latest: PlanarWrench,
    stamp: Option<f64>,
}

impl WrenchHold {
    pub fn push(&mut self, t: f64, w: PlanarWrench) {
        self.latest = w;
        self.stamp = Some(t);
    }

    pub fn value(&self) -> PlanarWrench {
        self.latest
    }

    pub fn stamp(&self) -> Option<f64> {
        self.stamp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_design() -> Vec<BiquadCoefficients> {
        design_lowpass(5.0, 500.0, 2).unwrap()
    }

    #[test]
    fn unity_dc_gain() {
        for order in [2, 4] {
            let c = design_lowpass(5.0, 500.0, order).unwrap();
            assert_eq!(c.len(), order / 2);
            for s in &c {
                assert!((s.dc_gain() - 1.0).abs() < 1e-9);
                assert!(s.is_stable());
            }
        }
    }

    #[test]
    fn attenuates_fifty_hertz() {
        let c = default_design();
        let omega = 2.0 * PI * 50.0 / 500.0;
        let db = 20.0 * c[0].magnitude_at(omega).log10();
        assert!(db <= -38.0, "{db} dB");
    }

    #[test]
    fn magnitude_is_monotone() {
        let c = design_lowpass(5.0, 500.0, 4).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=500 {
            let omega = PI * i as f64 / 500.0 * 0.999;
            let m: f64 = c.iter().map(|s| s.magnitude_at(omega)).product();
            assert!(m <= prev + 1e-12);
            prev = m;
        }
    }

    #[test]
    fn rejects_invalid_designs() {
        assert!(matches!(design_lowpass(300.0, 500.0, 2), Err(Error::InvalidCutoff { .. })));
        assert!(design_lowpass(0.0, 500.0, 2).is_err());
        assert!(design_lowpass(5.0, 500.0, 3).is_err());
    }

    #[test]
    fn step_response_settles() {
        let c = default_design();
        let mut s = FilterState::zeroed(c.len());
        let mut y = 0.0;
        for _ in 0..250 {
            y = filter_step(&mut s, &c, 2.5);
        }
        assert!((y - 2.5).abs() < 0.025, "{y}");
    }

    #[test]
    fn zero_in_zero_out() {
        let c = default_design();
        let mut s = FilterState::zeroed(1);
        for _ in 0..100 {
            assert_eq!(filter_step(&mut s, &c, 0.0), 0.0);
        }
    }

    #[test]
    fn impulse_response_sums_to_dc_gain() {
        let c = default_design();
        let mut s = FilterState::zeroed(1);
        let sum: f64 = (0..5000).map(|k| filter_step(&mut s, &c, if k == 0 { 1.0 } else { 0.0 })).sum();
        assert!((sum - 1.0).abs() < 1e-6, "{sum}");
    }

    #[test]
    fn warm_start_passes_first_sample() {
        let mut f = LowPass::new(default_design(), true);
        assert!((f.step(7.0) - 7.0).abs() < 1e-12);
        assert!((f.step(7.0) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_output_on_random_input() {
        let c = default_design();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut s = FilterState::zeroed(1);
            let xs: Vec<f64> = (0..2000).map(|_| rng.random_range(-40.0..40.0)).collect();
            let max_x = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for x in xs {
                assert!(filter_step(&mut s, &c, x).abs() <= 2.0 * max_x);
            }
        }
    }

    #[test]
    fn hold_resampling_of_constant() {
        let input: Vec<Sample> = (0..200).map(|k| Sample { t: k as f64 / 200.0, value: 3.0 }).collect();
        let out = resample_hold(&input, 200.0, 500.0, ResampleMode::Hold).unwrap();
        assert_eq!(out.len(), 498);
        assert!(out.iter().all(|s| s.value == 3.0));
        assert!(out.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn linear_resampling_of_ramp() {
        let input: Vec<Sample> = (0..=200).map(|k| Sample { t: k as f64 / 200.0, value: k as f64 / 200.0 }).collect();
        for mode in [ResampleMode::Linear, ResampleMode::Hold] {
            let out = resample_hold(&input, 200.0, 500.0, mode).unwrap();
            assert_eq!(out.len(), 501);
            let worst = out.iter().map(|s| (s.value - s.t).abs()).fold(0.0, f64::max);
            assert!(worst < 1.0 / 200.0, "{mode:?}: {worst}");
        }
    }

    #[test]
    fn out_of_order_input_is_rejected() {
        let input = [Sample { t: 0.0, value: 0.0 }, Sample { t: 0.01, value: 0.0 }, Sample { t: 0.005, value: 1.0 }];
        assert!(matches!(
            resample_hold(&input, 200.0, 500.0, ResampleMode::Hold),
            Err(Error::NonMonotoneInput { index: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn filter_is_linear(xs in prop::collection::vec(-50.0..50.0f64, 1..300), a in -10.0..10.0f64) {
            let c = default_design();
            let mut s1 = FilterState::zeroed(1);
            let mut s2 = FilterState::zeroed(1);
            for x in xs {
                let y1 = filter_step(&mut s1, &c, a * x);
                let y2 = a * filter_step(&mut s2, &c, x);
                prop_assert!((y1 - y2).abs() <= 1e-9 * (1.0 + y2.abs()));
            }
        }
    }
}
