use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gaussian-modulated sinusoid used as the single-reflection reference `S0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePulse {
    f0: f64,
    fractional_bandwidth: f64,
    fs: f64,
    duration: f64,
    samples: Vec<f64>,
}

impl ReferencePulse {
    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn fractional_bandwidth(&self) -> f64 {
        self.fractional_bandwidth
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Window length in seconds (`len / fs`).
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Standard deviation of the Gaussian envelope, in seconds.
    pub fn sigma_t(&self) -> f64 {
        envelope_sigma(self.f0, self.fractional_bandwidth)
    }

    /// Full width of the envelope at half amplitude (-6 dB), in seconds.
    pub fn minus6db_width(&self) -> f64 {
        2.0 * self.sigma_t() * (2.0 * 2f64.ln()).sqrt()
    }

    /// Time of sample `i` relative to the window centre.
    pub fn time_of(&self, i: usize) -> f64 {
        (i as f64 - (self.samples.len() / 2) as f64) / self.fs
    }

    /// `sum s^2 / fs`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.fs
    }
}

/// Envelope sigma such that the amplitude spectrum falls to one half at
/// `f0 (1 +/- bw / 2)`.
fn envelope_sigma(f0: f64, bw: f64) -> f64 {
    (2.0 * 2f64.ln()).sqrt() / (PI * bw * f0)
}

/// `s(t) = exp(-t^2 / 2 sigma_t^2) cos(2 pi f0 t)` on an odd-length window
/// centred on `t = 0`.
pub fn synth_reference(f0: f64, fractional_bandwidth: f64, fs: f64, duration: f64) -> Result<ReferencePulse> {
    if !(f0 > 0.0 && fractional_bandwidth > 0.0 && fs > 0.0 && duration > 0.0) {
        return Err(Error::InvalidArgument("pulse parameters must be positive".into()));
    }
    let required = 2.0 * f0 * (1.0 + fractional_bandwidth);
    if fs <= required {
        return Err(Error::Nyquist { fs, required });
    }
    let mut len = (duration * fs).round() as usize;
    if len.is_multiple_of(2) {
        len += 1;
    }
    let sigma = envelope_sigma(f0, fractional_bandwidth);
    let half = (len / 2) as f64;
    let samples = (0..len)
        .map(|i| {
            let t = (i as f64 - half) / fs;
            (-t * t / (2.0 * sigma * sigma)).exp() * (2.0 * PI * f0 * t).cos()
        })
        .collect();
    Ok(ReferencePulse {
        f0,
        fractional_bandwidth,
        fs,
        duration: len as f64 / fs,
        samples,
    })
}
