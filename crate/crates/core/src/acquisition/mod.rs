//! Simulated two-computer acquisition.
//!
//! A producer streams audio with injected marker bursts, a decoder service
//! detects them and sends event messages, and a recorder writes each event
//! into AUX1 at its delay-compensated onset. All roles talk over local TCP.
//!
//! Time is simulated nanoseconds since the stream start. In
//! [`TimeMode::Virtual`] every timestamp is derived from stream positions and
//! the [`LinkModel`], so runs are reproducible. In [`TimeMode::Wall`] the
//! clock is the scaled wall clock and link delays are real sleeps.

mod roles;
pub mod wire;

pub use roles::{
    estimate_link_delay, run_decoder, run_echo, run_producer, run_recorder, simulate,
    simulate_in_process, Compensation, DecoderStats, RecorderConfig, RecorderState, SimOptions,
    SimReport,
};
pub use wire::Message;

use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{samples, CodecConfig};
use crate::error::{Error, Result};
use crate::session::{GazeDirection, GazeInterval, Session};
use crate::synth::{eeg_for_gaze, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub onset_s: f64,
    pub code: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventScript {
    pub events: Vec<ScriptEvent>,
    pub total_duration_s: f64,
}

impl EventScript {
    /// Checks ordering, range and that every burst ends before the script does.
    pub fn validate(&self, cfg: &CodecConfig) -> Result<()> {
        if !(self.total_duration_s > 0.0) {
            return Err(Error::InvalidConfig(
                "script duration must be positive".into(),
            ));
        }
        for (i, e) in self.events.iter().enumerate() {
            cfg.frequency(e.code)?;
            if !(e.onset_s >= 0.0 && e.onset_s + cfg.burst_duration_s <= self.total_duration_s) {
                return Err(Error::InvalidConfig(format!(
                    "event {i} at {} s does not fit in [0, {})",
                    e.onset_s, self.total_duration_s
                )));
            }
            if i > 0 && e.onset_s <= self.events[i - 1].onset_s {
                return Err(Error::InvalidConfig(format!(
                    "event {i} onset is not increasing"
                )));
            }
        }
        Ok(())
    }

    /// `n` events with uniform codes and uniform gaps in `[min_gap_s, max_gap_s]`.
    pub fn random(n: usize, n_codes: u32, min_gap_s: f64, max_gap_s: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        let events = (0..n)
            .map(|_| {
                t += rng.random_range(min_gap_s..=max_gap_s);
                ScriptEvent {
                    onset_s: (t * 1000.0f64).round() / 1000.0,
                    code: rng.random_range(0..n_codes),
                }
            })
            .collect();
        EventScript {
            events,
            total_duration_s: t + max_gap_s,
        }
    }
}

/// A gaze direction holding from `t_s` until the next switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSwitch {
    pub t_s: f64,
    pub direction: GazeDirection,
}

pub fn gaze_pairs(switches: &[GazeSwitch]) -> Vec<(f64, GazeDirection)> {
    switches.iter().map(|g| (g.t_s, g.direction)).collect()
}

/// Residual magnitudes of recorded against scripted onsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub samples: Vec<u64>,
    pub mean_ns: u64,
    pub p95_ns: u64,
    pub max_ns: u64,
}

impl LinkStats {
    pub fn from_samples(samples: Vec<u64>) -> Self {
        if samples.is_empty() {
            return LinkStats {
                samples,
                mean_ns: 0,
                p95_ns: 0,
                max_ns: 0,
            };
        }
        let mut sorted = samples.clone();
        sorted.sort_unstable();
        let n = sorted.len();
        let mean = (sorted.iter().map(|&v| v as u128).sum::<u128>() / n as u128) as u64;
        // nearest rank
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        LinkStats {
            mean_ns: mean,
            p95_ns: sorted[rank - 1],
            max_ns: sorted[n - 1],
            samples,
        }
    }
}

/// Matches session events to the script in order and summarizes the residuals.
pub fn latency_report(session: &Session, script: &EventScript) -> Result<LinkStats> {
    if session.events.len() != script.events.len() {
        return Err(Error::Mismatch(format!(
            "session holds {} events, script {}",
            session.events.len(),
            script.events.len()
        )));
    }
    let mut residuals = Vec::with_capacity(script.events.len());
    for (i, (got, want)) in session.events.iter().zip(&script.events).enumerate() {
        if got.code != want.code {
            return Err(Error::Mismatch(format!(
                "event {i} has code {}, script says {}",
                got.code, want.code
            )));
        }
        residuals.push(((got.onset_s - want.onset_s).abs() * 1e9).round() as u64);
    }
    Ok(LinkStats::from_samples(residuals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    #[default]
    Virtual,
    Wall,
}

/// Shared simulated clock. `compress` is simulated seconds per wall second;
/// an infinite factor disables pacing and is only valid in virtual mode.
#[derive(Debug, Clone, Copy)]
pub struct SimClock {
    pub mode: TimeMode,
    pub compress: f64,
    origin: Instant,
}

impl SimClock {
    pub fn new(mode: TimeMode, compress: f64) -> Result<Self> {
        let ok = match mode {
            TimeMode::Virtual => compress >= 1.0,
            TimeMode::Wall => compress >= 1.0 && compress.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "time compression {compress} invalid in {mode:?} mode"
            )));
        }
        Ok(SimClock {
            mode,
            compress,
            origin: Instant::now(),
        })
    }

    /// Simulated nanoseconds since the origin, from the wall clock.
    pub fn now_ns(&self) -> i64 {
        (self.origin.elapsed().as_nanos() as f64 * self.compress) as i64
    }

    fn wall(&self, sim_ns: i64) -> Option<Duration> {
        (self.compress.is_finite() && sim_ns > 0)
            .then(|| Duration::from_nanos((sim_ns as f64 / self.compress) as u64))
    }

    /// Blocks until simulated time `sim_ns`.
    pub fn wait_until(&self, sim_ns: i64) {
        if let Some(target) = self.wall(sim_ns) {
            if let Some(rest) = target.checked_sub(self.origin.elapsed()) {
                thread::sleep(rest);
            }
        }
    }

    pub fn sleep(&self, sim_ns: i64) {
        if let Some(d) = self.wall(sim_ns) {
            thread::sleep(d);
        }
    }
}

/// Artificial one-way delay per message: base plus seeded uniform jitter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkModel {
    pub one_way_delay_ns: u64,
    pub jitter_ns: u64,
    pub seed: u64,
}

impl LinkModel {
    pub fn fixed(one_way_delay_ns: u64) -> Self {
        LinkModel {
            one_way_delay_ns,
            ..LinkModel::default()
        }
    }

    /// Delay of message `seq`; a pure function of the model and `seq`.
    pub fn delay_ns(&self, seq: u64) -> u64 {
        if self.jitter_ns == 0 {
            return self.one_way_delay_ns;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(seq);
        self.one_way_delay_ns + rng.random_range(0..=self.jitter_ns)
    }
}

/// A clock plus the delay model of the network it runs over.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub clock: SimClock,
    pub model: LinkModel,
}

impl Link {
    /// Sender side: in wall mode the delay is spent before writing.
    pub fn before_send(&self, seq: u64) {
        if self.clock.mode == TimeMode::Wall {
            self.clock.sleep(self.model.delay_ns(seq) as i64);
        }
    }

    /// Receiver side: when message `seq` stamped `sent_ns` arrives.
    pub fn arrival_ns(&self, seq: u64, sent_ns: i64) -> i64 {
        match self.clock.mode {
            TimeMode::Virtual => sent_ns + self.model.delay_ns(seq) as i64,
            TimeMode::Wall => self.clock.now_ns(),
        }
    }
}

/// EEG rows under a recorder's markers.
pub trait EegSource {
    fn render(
        &mut self,
        n_samples: usize,
        rate_hz: f64,
        gaze: &[GazeInterval],
    ) -> Result<Vec<Vec<f32>>>;
}

/// Flat zero EEG.
#[derive(Debug, Clone, Copy, Default)]
pub struct SilentEeg;

impl EegSource for SilentEeg {
    fn render(
        &mut self,
        n_samples: usize,
        _rate_hz: f64,
        _gaze: &[GazeInterval],
    ) -> Result<Vec<Vec<f32>>> {
        Ok(vec![vec![0.0; n_samples]; crate::session::EEG_LABELS.len()])
    }
}

/// Synthetic EEG whose band signatures follow the gaze schedule.
#[derive(Debug, Clone)]
pub struct SynthEeg {
    pub base: SynthSpec,
}

impl EegSource for SynthEeg {
    fn render(
        &mut self,
        n_samples: usize,
        rate_hz: f64,
        gaze: &[GazeInterval],
    ) -> Result<Vec<Vec<f32>>> {
        let mut spec = self.base.clone();
        spec.sample_rate_hz = rate_hz;
        let duration = n_samples as f64 / rate_hz;
        let mut rows = eeg_for_gaze(&spec, gaze, duration)?;
        for r in &mut rows {
            r.resize(n_samples, 0.0);
        }
        Ok(rows)
    }
}

/// Audio samples for the whole script with bursts injected.
pub fn render_audio(script: &EventScript, cfg: &CodecConfig) -> Result<Vec<f32>> {
    script.validate(cfg)?;
    let mut audio = vec![0.0f32; samples(script.total_duration_s, cfg.sample_rate_hz)];
    for e in &script.events {
        let burst = crate::codec::encode_burst(cfg.frequency(e.code)?, cfg)?;
        crate::codec::inject_at(&mut audio, samples(e.onset_s, cfg.sample_rate_hz), &burst)?;
    }
    Ok(audio)
}
