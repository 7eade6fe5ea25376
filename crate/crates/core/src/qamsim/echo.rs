//! Two-reflection echo synthesis `S(t) = a1 S0(t - t1) + a2 S0*(t - t2)` and
//! the matched-filter estimator of its parameters.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::pulse::ReferencePulse;
use crate::error::{Error, Result};

/// Amplitudes and delays of the two reflections. Delays are relative to the
/// reference pulse position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoParams {
    pub a1: f64,
    pub a2: f64,
    pub t1: f64,
    pub t2: f64,
    /// Frequency-dependent attenuation of the second reflection, in nepers
    /// per MHz: magnitude factor `exp(-attenuation * |f| / 1 MHz)`.
    pub attenuation: f64,
}

impl EchoParams {
    pub fn new(a1: f64, t1: f64, a2: f64, t2: f64) -> Self {
        Self {
            a1,
            a2,
            t1,
            t2,
            attenuation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 >= 0.0) {
            return Err(Error::InvalidArgument("t1 must be >= 0".into()));
        }
        if self.a2 != 0.0 && !(self.t2 > self.t1) {
            return Err(Error::InvalidArgument("t2 must exceed t1".into()));
        }
        if !(self.attenuation >= 0.0) {
            return Err(Error::InvalidArgument("attenuation must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoRecord {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub params: Option<EchoParams>,
}

fn fft_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k * fs / n as f64
}

/// Delays are applied as a linear phase ramp on the pulse spectrum, so they
/// can be fractional and the operation is norm-preserving (circular on the
/// window).
pub fn synth_echo(pulse: &ReferencePulse, params: &EchoParams) -> Result<EchoRecord> {
    params.validate()?;
    let n = pulse.len();
    let fs = pulse.fs();
    // keep the delayed pulse (4 sigma envelope) inside the window
    let limit = pulse.duration() / 2.0 - 4.0 * pulse.sigma_t();
    for (a, t) in [(params.a1, params.t1), (params.a2, params.t2)] {
        if a != 0.0 && t.abs() > limit {
            return Err(Error::DelayOutOfWindow {
                delay: t,
                window: pulse.duration(),
            });
        }
    }
    let mut fft = FftPlanner::new();
    let mut spec: Vec<Complex<f64>> = pulse.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.plan_fft_forward(n).process(&mut spec);
    let mut out: Vec<Complex<f64>> = spec
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let f = fft_freq(k, n, fs);
            let first = Complex::from_polar(params.a1, -2.0 * PI * f * params.t1);
            let decay = (-params.attenuation * f.abs() / 1e6).exp();
            let second = Complex::from_polar(params.a2 * decay, -2.0 * PI * f * params.t2);
            s * (first + second)
        })
        .collect();
    fft.plan_fft_inverse(n).process(&mut out);
    let samples = out.iter().map(|c| c.re / n as f64).collect();
    Ok(EchoRecord {
        samples,
        fs,
        params: Some(*params),
    })
}

/// Magnitude of the analytic signal.
pub fn envelope(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mut fft = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *b *= w;
    }
    fft.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}

/// Width, in seconds, of the region where the envelope is at least half its peak.
pub fn minus6db_width(signal: &[f64], fs: f64) -> f64 {
    let env = envelope(signal);
    let peak = env.iter().copied().fold(0.0, f64::max);
    let half = peak / 2.0;
    let above: Vec<usize> = env
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= half)
        .map(|(i, _)| i)
        .collect();
    match (above.first(), above.last()) {
        (Some(&lo), Some(&hi)) => {
            // linear interpolation of both crossings
            let left = if lo > 0 {
                lo as f64 - (env[lo] - half) / (env[lo] - env[lo - 1])
            } else {
                lo as f64
            };
            let right = if hi + 1 < env.len() {
                hi as f64 + (env[hi] - half) / (env[hi] - env[hi + 1])
            } else {
                hi as f64
            };
            (right - left) / fs
        }
        _ => 0.0,
    }
}

/// Estimated parameters plus whether two distinct reflections were found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoEstimate {
    pub params: EchoParams,
    /// `false` when fewer than two separated peaks were found (single
    /// reflection or overlapping, unresolved echoes); then `a2 = 0`.
    pub resolved: bool,
}

/// Peaks below this fraction of the strongest correlation peak are ignored.
pub const PEAK_THRESHOLD: f64 = 0.2;

/// Matched filter: normalised cross-correlation with `S0`, the two largest
/// peaks at least one -6 dB pulse width apart, parabolic sub-sample
/// refinement of position and height.
pub fn estimate_echo_params(record: &EchoRecord, pulse: &ReferencePulse) -> Result<EchoEstimate> {
    if (record.fs - pulse.fs()).abs() > 1e-9 * pulse.fs() {
        return Err(Error::InvalidArgument("record and pulse sampling rates differ".into()));
    }
    let s = &record.samples;
    let p = pulse.samples();
    if s.is_empty() {
        return Err(Error::EmptyInput);
    }
    let energy: f64 = p.iter().map(|v| v * v).sum();
    let (ns, np) = (s.len() as isize, p.len() as isize);
    // lag l: sum_i s[i] p[i - l]; record sample i and pulse sample j share time when i - j = l
    let lags: Vec<isize> = (-(np - 1)..ns).collect();
    let corr: Vec<f64> = lags
        .iter()
        .map(|&l| {
            let lo = l.max(0);
            let hi = (l + np).min(ns);
            (lo..hi).map(|i| s[i as usize] * p[(i - l) as usize]).sum::<f64>() / energy
        })
        .collect();
    let env = envelope(&corr);
    let global = env.iter().copied().fold(0.0, f64::max);
    if !(global > 0.0) {
        return Ok(EchoEstimate {
            params: EchoParams::new(0.0, 0.0, 0.0, 0.0),
            resolved: false,
        });
    }
    // candidate reflections are envelope maxima; carrier maxima refine them
    let mut peaks: Vec<usize> = (1..env.len() - 1)
        .filter(|&i| env[i] >= env[i - 1] && env[i] > env[i + 1] && env[i] >= PEAK_THRESHOLD * global)
        .collect();
    peaks.sort_by(|&a, &b| env[b].total_cmp(&env[a]));
    let min_sep = pulse.minus6db_width() * pulse.fs();
    let mut chosen: Vec<usize> = Vec::with_capacity(2);
    for i in peaks {
        if chosen.iter().all(|&c| (c as f64 - i as f64).abs() >= min_sep) {
            chosen.push(i);
            if chosen.len() == 2 {
                break;
            }
        }
    }
    let carrier_peak = |i: usize| -> usize {
        let half_period = (0.5 * pulse.fs() / pulse.f0()).ceil() as usize;
        let lo = i.saturating_sub(half_period).max(1);
        let hi = (i + half_period).min(corr.len() - 2);
        (lo..=hi).max_by(|&a, &b| corr[a].total_cmp(&corr[b])).unwrap_or(i)
    };
    // record and reference share the centred window, so lag 0 is zero delay
    let refine = |i: usize| -> (f64, f64) {
        let (a, b, c) = (corr[i - 1], corr[i], corr[i + 1]);
        let denom = a - 2.0 * b + c;
        let delta = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let height = b - 0.25 * (a - c) * delta;
        ((lags[i] as f64 + delta) / pulse.fs(), height)
    };
    let mut found: Vec<(f64, f64)> = chosen.into_iter().map(|i| refine(carrier_peak(i))).collect();
    found.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(match found.as_slice() {
        [(t1, a1), (t2, a2)] => EchoEstimate {
            params: EchoParams {
                a1: *a1,
                a2: *a2,
                t1: *t1,
                t2: *t2,
                attenuation: 0.0,
            },
            resolved: true,
        },
        [(t1, a1)] => EchoEstimate {
            params: EchoParams {
                a1: *a1,
                a2: 0.0,
                t1: *t1,
                t2: *t1,
                attenuation: 0.0,
            },
            resolved: false,
        },
        _ => EchoEstimate {
            params: EchoParams::new(0.0, 0.0, 0.0, 0.0),
            resolved: false,
        },
    })
}

/// Thin-section speed of sound from the two interface delays:
/// `c = 2 d / (t2 - t1)`.
pub fn sos_from_delays(t1: f64, t2: f64, thickness: f64) -> Result<f64> {
    if !(t2 > t1) {
        return Err(Error::InvalidArgument(format!("t2 ({t2}) must exceed t1 ({t1})")));
    }
    if !(thickness > 0.0) {
        return Err(Error::InvalidArgument("thickness must be > 0".into()));
    }
    Ok(2.0 * thickness / (t2 - t1))
}

/// Inter-echo delay produced by a section of speed `c`.
pub fn delay_from_sos(c: f64, thickness: f64) -> f64 {
    2.0 * thickness / c
}
