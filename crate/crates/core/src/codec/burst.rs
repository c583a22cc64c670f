use std::f64::consts::PI;

use super::{samples, CodecConfig};
use crate::error::{Error, Result};

/// Sine of `n` samples with raised-cosine edges of `ramp_n` samples.
///
/// Sample 0 is exactly zero.
pub fn tone(freq_hz: f64, n: usize, ramp_n: usize, amplitude: f64, rate_hz: f64) -> Vec<f32> {
    let w = 2.0 * PI * freq_hz / rate_hz;
    (0..n)
        .map(|i| {
            let edge = i.min(n - 1 - i);
            let env = if edge < ramp_n {
                0.5 * (1.0 - (PI * edge as f64 / ramp_n as f64).cos())
            } else {
                1.0
            };
            (amplitude * env * (w * i as f64).sin()) as f32
        })
        .collect()
}

/// The marker burst for a tone of `freq_hz` under `cfg`.
pub fn encode_burst(freq_hz: f64, cfg: &CodecConfig) -> Result<Vec<f32>> {
    if freq_hz >= cfg.nyquist_hz() {
        return Err(Error::AboveNyquist {
            freq_hz,
            nyquist_hz: cfg.nyquist_hz(),
        });
    }
    Ok(tone(
        freq_hz,
        cfg.burst_samples(),
        cfg.ramp_samples(),
        cfg.amplitude,
        cfg.sample_rate_hz,
    ))
}

/// Adds `burst` into `stream` starting at sample `start`.
pub fn inject_at(stream: &mut [f32], start: usize, burst: &[f32]) -> Result<()> {
    if burst.is_empty() {
        return Ok(());
    }
    let end = start
        .checked_add(burst.len())
        .filter(|&e| e <= stream.len())
        .ok_or(Error::BurstOverrun {
            start,
            len: burst.len(),
            stream_len: stream.len(),
        })?;
    for (s, b) in stream[start..end].iter_mut().zip(burst) {
        *s += b;
    }
    Ok(())
}

/// Copy of `stream` with `burst` added from `floor(onset_s * rate)`.
pub fn inject(stream: &[f32], onset_s: f64, burst: &[f32], rate_hz: f64) -> Result<Vec<f32>> {
    if !(onset_s >= 0.0) {
        return Err(Error::Invalid(format!("onset {onset_s} s is negative")));
    }
    let mut out = stream.to_vec();
    inject_at(&mut out, samples(onset_s, rate_hz), burst)?;
    Ok(out)
}
