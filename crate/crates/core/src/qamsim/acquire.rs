use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::echo::{delay_from_sos, estimate_echo_params, sos_from_delays, synth_echo, EchoParams};
use super::phantom::{Phantom, SOS_UNIT};
use super::pulse::{synth_reference, ReferencePulse};
use crate::error::{Error, Result};
use crate::map::ParametricMap;

/// Pulse and echo settings for a raster scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionSettings {
    pub f0: f64,
    pub fractional_bandwidth: f64,
    pub fs: f64,
    pub duration: f64,
    pub a1: f64,
    pub a2: f64,
    /// Delay of the first interface echo; the second follows after `2 d / c`.
    pub t1: f64,
    pub attenuation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for AcquisitionSettings {
    fn default() -> Self {
        Self {
            f0: 500e6,
            fractional_bandwidth: 0.6,
            fs: 4e9,
            duration: 80e-9,
            a1: 0.3,
            a2: 0.5,
            t1: 10e-9,
            attenuation: 0.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl AcquisitionSettings {
    pub fn pulse(&self) -> Result<ReferencePulse> {
        synth_reference(self.f0, self.fractional_bandwidth, self.fs, self.duration)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    /// Estimated SoS map; unresolved pixels hold the median of resolved ones.
    pub map: ParametricMap,
    /// Row-major flags for pixels whose echoes could not be separated.
    pub unresolved: Vec<bool>,
}

impl Acquisition {
    pub fn unresolved_count(&self) -> usize {
        self.unresolved.iter().filter(|&&u| u).count()
    }
}

fn pixel_record(
    phantom: &Phantom,
    pulse: &ReferencePulse,
    settings: &AcquisitionSettings,
    i: usize,
) -> Result<Vec<f64>> {
    let c = phantom.sos_map.data()[i];
    let params = EchoParams {
        a1: settings.a1,
        a2: settings.a2,
        t1: settings.t1,
        t2: settings.t1 + delay_from_sos(c, phantom.thickness),
        attenuation: settings.attenuation,
    };
    let mut samples = synth_echo(pulse, &params)?.samples;
    if settings.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(i as u64);
        let normal = Normal::new(0.0, settings.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for s in &mut samples {
            *s += normal.sample(&mut rng);
        }
    }
    Ok(samples)
}

/// Simulated RF traces for every pixel, row-major.
pub fn acquire_rf(phantom: &Phantom, pulse: &ReferencePulse, settings: &AcquisitionSettings) -> Result<RfCube> {
    check_settings(pulse, settings)?;
    let n = phantom.sos_map.len();
    let traces = (0..n)
        .into_par_iter()
        .map(|i| pixel_record(phantom, pulse, settings, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(RfCube {
        rows: phantom.sos_map.rows(),
        cols: phantom.sos_map.cols(),
        samples_per_trace: pulse.len(),
        fs: pulse.fs(),
        f0: pulse.f0(),
        data: traces.into_iter().flatten().collect(),
    })
}

fn check_settings(pulse: &ReferencePulse, settings: &AcquisitionSettings) -> Result<()> {
    if (pulse.fs() - settings.fs).abs() > 1e-9 * settings.fs {
        return Err(Error::InvalidArgument(
            "pulse and settings sampling rates differ".into(),
        ));
    }
    if !(settings.noise_std >= 0.0) {
        return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
    }
    Ok(())
}

/// Raster scan: per pixel synthesise the two-interface echo for the
/// phantom's SoS, estimate the delays and convert back to SoS.
pub fn acquire_and_map(
    phantom: &Phantom,
    pulse: &ReferencePulse,
    settings: &AcquisitionSettings,
) -> Result<Acquisition> {
    check_settings(pulse, settings)?;
    let n = phantom.sos_map.len();
    let estimates = (0..n)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let samples = pixel_record(phantom, pulse, settings, i)?;
            let record = super::echo::EchoRecord {
                samples,
                fs: pulse.fs(),
                params: None,
            };
            let e = estimate_echo_params(&record, pulse)?;
            if !e.resolved {
                return Ok(None);
            }
            Ok(sos_from_delays(e.params.t1, e.params.t2, phantom.thickness).ok())
        })
        .collect::<Result<Vec<_>>>()?;
    let unresolved: Vec<bool> = estimates.iter().map(Option::is_none).collect();
    let mut good: Vec<f64> = estimates.iter().flatten().copied().collect();
    let fill = if good.is_empty() {
        phantom.c0
    } else {
        good.sort_by(f64::total_cmp);
        let m = good.len();
        if m % 2 == 1 {
            good[m / 2]
        } else {
            0.5 * (good[m / 2 - 1] + good[m / 2])
        }
    };
    let data = estimates.into_iter().map(|e| e.unwrap_or(fill)).collect();
    let map = ParametricMap::new(phantom.sos_map.rows(), phantom.sos_map.cols(), data, SOS_UNIT)?;
    Ok(Acquisition { map, unresolved })
}

/// Raw RF traces, `rows * cols` traces of `samples_per_trace` samples each.
#[derive(Debug, Clone, PartialEq)]
pub struct RfCube {
    pub rows: usize,
    pub cols: usize,
    pub samples_per_trace: usize,
    pub fs: f64,
    pub f0: f64,
    pub data: Vec<f64>,
}

impl RfCube {
    pub fn trace(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.samples_per_trace;
        &self.data[start..start + self.samples_per_trace]
    }

    pub fn header_text(&self) -> String {
        format!(
            "rows = {}\ncols = {}\nsamples = {}\nfs = {:?}\nf0 = {:?}\ndtype = f32le\norder = row-major, trace-contiguous\n",
            self.rows, self.cols, self.samples_per_trace, self.fs, self.f0
        )
    }

    /// Writes `<stem>.raw` (f32 little-endian) and `<stem>.hdr`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let stem = stem.as_ref();
        let mut raw = BufWriter::new(File::create(stem.with_extension("raw"))?);
        for &v in &self.data {
            raw.write_all(&(v as f32).to_le_bytes())?;
        }
        raw.flush()?;
        std::fs::write(stem.with_extension("hdr"), self.header_text())?;
        Ok(())
    }
}
