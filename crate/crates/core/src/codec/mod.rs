//! Sine-burst event markers and the two-pulse gaze code.
//!
//! Events are encoded as short raised-cosine tone bursts, one frequency per
//! event code, and recovered by a sliding Goertzel detector. Gaze direction
//! is written to an auxiliary channel as a pair of pulses whose first
//! frequency selects left/right and whose second duration selects top/bottom.

mod burst;
mod detect;
mod gaze;
mod goertzel;
pub mod stream_io;

pub use burst::{encode_burst, inject, inject_at, tone};
pub use detect::{detect_bursts, BurstDetector, Detection};
pub use gaze::{decode_gaze, encode_gaze, GazeCodeTable, GazeDecode, GazeDiagnostic};
pub use goertzel::{goertzel_power, Goertzel};
pub use stream_io::{read_codebook, read_stream, write_codebook, write_stream, StreamMeta};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parameters shared by the burst encoder and detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub sample_rate_hz: f64,
    /// Event code to tone frequency.
    pub codebook: BTreeMap<u32, f64>,
    pub burst_duration_s: f64,
    /// Peak amplitude as a fraction of full scale.
    pub amplitude: f64,
    /// Raised-cosine edge length at each end of a burst.
    pub ramp_s: f64,
    pub detect_window_s: f64,
    pub detect_hop_s: f64,
    /// Tone-bin power over mean DFT-bin power required for a detection.
    pub power_threshold_ratio: f64,
    /// Consecutive above-threshold windows needed to confirm a burst.
    #[serde(default = "default_min_run")]
    pub min_run_windows: usize,
}

fn default_min_run() -> usize {
    3
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig::audio()
    }
}

impl CodecConfig {
    /// 44.1 kHz audio markers, eight codes from 1000 Hz in 250 Hz steps.
    pub fn audio() -> Self {
        CodecConfig {
            sample_rate_hz: 44_100.0,
            codebook: (0..8).map(|c| (c, 1000.0 + 250.0 * c as f64)).collect(),
            burst_duration_s: 0.050,
            amplitude: 0.8,
            ramp_s: 0.005,
            detect_window_s: 0.025,
            detect_hop_s: 0.005,
            power_threshold_ratio: 10.0,
            min_run_windows: default_min_run(),
        }
    }

    /// Event bursts on the 500 Hz AUX1 channel. The audio codebook lies far
    /// above this channel's Nyquist limit, so codes map to 30..205 Hz here.
    pub fn aux() -> Self {
        CodecConfig {
            sample_rate_hz: crate::session::DEFAULT_SAMPLE_RATE_HZ,
            codebook: (0..8).map(|c| (c, 30.0 + 25.0 * c as f64)).collect(),
            burst_duration_s: 0.2,
            amplitude: 0.8,
            ramp_s: 0.004,
            detect_window_s: 0.1,
            detect_hop_s: 0.01,
            power_threshold_ratio: 4.0,
            min_run_windows: default_min_run(),
        }
    }

    pub fn with_codebook(mut self, codebook: BTreeMap<u32, f64>) -> Self {
        self.codebook = codebook;
        self
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    pub fn frequency(&self, code: u32) -> Result<f64> {
        self.codebook
            .get(&code)
            .copied()
            .ok_or(Error::UnknownCode(code))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.sample_rate_hz > 0.0) {
            return bad(format!(
                "sample rate {} must be positive",
                self.sample_rate_hz
            ));
        }
        if self.codebook.is_empty() {
            return bad("codebook is empty".into());
        }
        for (&code, &f) in &self.codebook {
            if !(f > 0.0) {
                return bad(format!("code {code}: frequency {f} must be positive"));
            }
            if f >= self.nyquist_hz() {
                return Err(Error::AboveNyquist {
                    freq_hz: f,
                    nyquist_hz: self.nyquist_hz(),
                });
            }
        }
        let mut freqs: Vec<f64> = self.codebook.values().copied().collect();
        freqs.sort_by(f64::total_cmp);
        let min_spacing = 2.0 / self.detect_window_s;
        if let Some(w) = freqs.windows(2).find(|w| w[1] - w[0] < min_spacing) {
            return bad(format!(
                "codebook frequencies {} and {} Hz are closer than {min_spacing} Hz",
                w[0], w[1]
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return bad(format!("amplitude {} outside (0, 1]", self.amplitude));
        }
        if !(self.ramp_s >= 0.0 && self.burst_duration_s >= 2.0 * self.ramp_s) {
            return bad("burst must be at least two ramps long".into());
        }
        if !(self.detect_hop_s > 0.0 && self.detect_window_s >= self.detect_hop_s) {
            return bad("detection hop must be positive and no longer than the window".into());
        }
        if self.window_samples() < 2 {
            return bad("detection window shorter than two samples".into());
        }
        if !(self.power_threshold_ratio > 0.0) {
            return bad("power threshold ratio must be positive".into());
        }
        if self.min_run_windows == 0 {
            return bad("min_run_windows must be at least 1".into());
        }
        Ok(())
    }

    pub(crate) fn window_samples(&self) -> usize {
        samples(self.detect_window_s, self.sample_rate_hz)
    }

    pub(crate) fn burst_samples(&self) -> usize {
        samples(self.burst_duration_s, self.sample_rate_hz)
    }

    pub(crate) fn ramp_samples(&self) -> usize {
        samples(self.ramp_s, self.sample_rate_hz)
    }

    /// Hex SHA-256 of the canonical JSON form, recorded in session manifests.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("codec config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// `floor(duration * rate)` with a guard against representation error
/// (0.05 * 44100 must give 2205, not 2204).
pub(crate) fn samples(duration_s: f64, rate_hz: f64) -> usize {
    (duration_s * rate_hz + 1e-9).floor().max(0.0) as usize
}
