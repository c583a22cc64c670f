use serde::{Deserialize, Serialize};

use super::{CodecConfig, Goertzel};
use crate::error::Result;

/// A confirmed tone burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub code: u32,
    /// Stream time of the last grid point before the first active window.
    pub onset_s: f64,
    /// Stream time at which the burst was confirmed.
    pub detected_at_s: f64,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    code: u32,
    /// Grid index of the first active window.
    first: u64,
    len: usize,
}

/// Streaming sliding-window Goertzel detector.
///
/// Windows end on the grid `round(j * hop * rate)` for `j >= 1` and cover
/// the preceding `W` samples, zero-padded before the stream start. A window
/// is active when its strongest code's bin power exceeds
/// `power_threshold_ratio * sum(x^2)`; the latter is the mean DFT-bin power.
/// A run of `min_run_windows` active windows with the same strongest code
/// yields one detection.
#[derive(Debug, Clone)]
pub struct BurstDetector {
    cfg: CodecConfig,
    filters: Vec<(u32, Goertzel)>,
    ring: Vec<f32>,
    head: usize,
    consumed: u64,
    next_grid: u64,
    next_end: u64,
    run: Option<Run>,
    emitted: bool,
}

impl BurstDetector {
    pub fn new(cfg: &CodecConfig) -> Result<Self> {
        cfg.validate()?;
        let filters = cfg
            .codebook
            .iter()
            .map(|(&c, &f)| (c, Goertzel::new(f, cfg.sample_rate_hz)))
            .collect();
        let mut det = BurstDetector {
            cfg: cfg.clone(),
            filters,
            ring: vec![0.0; cfg.window_samples()],
            head: 0,
            consumed: 0,
            next_grid: 1,
            next_end: 0,
            run: None,
            emitted: false,
        };
        det.next_end = det.grid_end(1);
        Ok(det)
    }

    pub fn config(&self) -> &CodecConfig {
        &self.cfg
    }

    /// Samples consumed so far.
    pub fn position(&self) -> u64 {
        self.consumed
    }

    fn grid_end(&self, j: u64) -> u64 {
        (j as f64 * self.cfg.detect_hop_s * self.cfg.sample_rate_hz).round() as u64
    }

    /// Feeds a chunk and returns detections confirmed within it, in onset order.
    pub fn push(&mut self, chunk: &[f32]) -> Vec<Detection> {
        let mut out = Vec::new();
        for &x in chunk {
            self.ring[self.head] = x;
            self.head = (self.head + 1) % self.ring.len();
            self.consumed += 1;
            // `round` can repeat a grid end only for hops under one sample,
            // which validation does not forbid; evaluate each end once.
            while self.consumed == self.next_end {
                if let Some(d) = self.evaluate() {
                    out.push(d);
                }
                self.next_grid += 1;
                self.next_end = self.grid_end(self.next_grid);
            }
        }
        out
    }

    fn evaluate(&mut self) -> Option<Detection> {
        let j = self.next_grid;
        let (older, newer) = self.ring.split_at(self.head);
        let window = newer.iter().chain(older.iter()).copied();
        let energy: f64 = window.clone().map(|v| f64::from(v) * f64::from(v)).sum();
        let mut best: Option<(u32, f64)> = None;
        if energy > 0.0 {
            for (code, g) in &self.filters {
                let p = g.power(window.clone());
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((*code, p));
                }
            }
        }
        let active = best.filter(|&(_, p)| p > self.cfg.power_threshold_ratio * energy);

        match (active, self.run.as_mut()) {
            (Some((code, _)), Some(run)) if run.code == code => run.len += 1,
            (Some((code, _)), _) => {
                self.run = Some(Run {
                    code,
                    first: j,
                    len: 1,
                });
                self.emitted = false;
            }
            (None, _) => {
                self.run = None;
                return None;
            }
        }
        let run = self.run.expect("run set above");
        if !self.emitted && run.len >= self.cfg.min_run_windows {
            self.emitted = true;
            let rate = self.cfg.sample_rate_hz;
            return Some(Detection {
                code: run.code,
                onset_s: self.grid_end(run.first - 1) as f64 / rate,
                detected_at_s: self.grid_end(j) as f64 / rate,
            });
        }
        None
    }
}

/// Runs a fresh [`BurstDetector`] over a whole stream.
pub fn detect_bursts(stream: &[f32], cfg: &CodecConfig) -> Result<Vec<Detection>> {
    Ok(BurstDetector::new(cfg)?.push(stream))
}
