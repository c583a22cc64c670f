use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{GazeDirection, GazeInterval, Recording};
use crate::spectrum::{band_sum, Periodogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// One summed periodogram power per band.
    BandPower,
    /// The raw window samples.
    RawWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub window_len_samples: usize,
    pub mode: FeatureMode,
    pub bands_hz: Vec<(f64, f64)>,
}

pub const DEFAULT_BANDS_HZ: [(f64, f64); 5] = [
    (0.5, 4.0),
    (4.0, 8.0),
    (8.0, 13.0),
    (13.0, 30.0),
    (30.0, 100.0),
];

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            window_len_samples: 500,
            mode: FeatureMode::BandPower,
            bands_hz: DEFAULT_BANDS_HZ.to_vec(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        if self.window_len_samples < 2 {
            return Err(Error::InvalidConfig(
                "feature window must hold at least 2 samples".into(),
            ));
        }
        if self.mode == FeatureMode::RawWindow {
            return Ok(());
        }
        if self.bands_hz.is_empty() {
            return Err(Error::InvalidConfig("no feature bands".into()));
        }
        let nyq = rate_hz / 2.0;
        let mut prev_hi = 0.0;
        for &(lo, hi) in &self.bands_hz {
            if !(lo > 0.0 && lo < hi && hi <= nyq) {
                return Err(Error::InvalidConfig(format!(
                    "band [{lo}, {hi}) Hz must lie inside (0, {nyq}]"
                )));
            }
            if lo < prev_hi {
                return Err(Error::InvalidConfig(format!(
                    "band [{lo}, {hi}) Hz overlaps or precedes the previous band"
                )));
            }
            prev_hi = hi;
        }
        Ok(())
    }

    /// Feature dimension `p`.
    pub fn dim(&self) -> usize {
        match self.mode {
            FeatureMode::BandPower => self.bands_hz.len(),
            FeatureMode::RawWindow => self.window_len_samples,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        match self.mode {
            FeatureMode::BandPower => self
                .bands_hz
                .iter()
                .map(|(lo, hi)| format!("power_{lo}_{hi}_hz"))
                .collect(),
            FeatureMode::RawWindow => (0..self.window_len_samples)
                .map(|i| format!("x{i}"))
                .collect(),
        }
    }
}

/// The named rows of `rec` joined end to end.
pub fn concatenate_channels<S: AsRef<str>>(rec: &Recording, order: &[S]) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(order.len() * rec.n_samples());
    for label in order {
        let label = label.as_ref();
        let i = rec
            .channel_index(label)
            .ok_or_else(|| Error::MissingChannel(label.to_string()))?;
        if rec.channels[i].is_aux() {
            return Err(Error::Invalid(format!(
                "{label} is an aux channel, not EEG"
            )));
        }
        trace.extend(rec.data[i].iter().map(|&v| f64::from(v)));
    }
    Ok(trace)
}

/// Non-overlapping windows of the trace, trailing remainder dropped.
pub fn extract_features(trace: &[f64], rate_hz: f64, cfg: &FeatureConfig) -> Result<DMatrix<f64>> {
    cfg.validate(rate_hz)?;
    let w = cfg.window_len_samples;
    if trace.len() < w {
        return Err(Error::Invalid(format!(
            "trace of {} samples is shorter than one {w}-sample window",
            trace.len()
        )));
    }
    let windows: Vec<&[f64]> = trace.chunks_exact(w).collect();
    let p = cfg.dim();
    let mut out = DMatrix::zeros(windows.len(), p);
    match cfg.mode {
        FeatureMode::RawWindow => {
            for (r, win) in windows.iter().enumerate() {
                for (c, &v) in win.iter().enumerate() {
                    out[(r, c)] = v;
                }
            }
        }
        FeatureMode::BandPower => {
            let mut pg = Periodogram::new(w);
            for (r, win) in windows.iter().enumerate() {
                let power = pg.power(win);
                for (c, &(lo, hi)) in cfg.bands_hz.iter().enumerate() {
                    out[(r, c)] = band_sum(&power, w, rate_hz, lo, hi);
                }
            }
        }
    }
    Ok(out)
}

/// Features of every EEG channel concatenated, in recording order.
pub fn recording_features(rec: &Recording, cfg: &FeatureConfig) -> Result<DMatrix<f64>> {
    let order: Vec<&str> = rec
        .channels
        .iter()
        .filter(|c| !c.is_aux())
        .map(|c| c.as_str())
        .collect();
    extract_features(&concatenate_channels(rec, &order)?, rec.sample_rate_hz, cfg)
}

/// Per-interval feature blocks for the intervals with a known direction.
pub fn interval_features(
    rec: &Recording,
    intervals: &[GazeInterval],
    cfg: &FeatureConfig,
) -> Result<Vec<(GazeDirection, DMatrix<f64>)>> {
    intervals
        .iter()
        .filter(|iv| iv.direction.is_known())
        .map(|iv| {
            Ok((
                iv.direction,
                recording_features(&rec.slice(iv.t0_s, iv.t1_s), cfg)?,
            ))
        })
        .collect()
}

/// Stacks labelled feature blocks into one training matrix.
pub fn stack_labelled(
    blocks: &[(GazeDirection, DMatrix<f64>)],
) -> Result<(DMatrix<f64>, Vec<GazeDirection>)> {
    let p = blocks.first().map_or(0, |b| b.1.ncols());
    if let Some(b) = blocks.iter().find(|b| b.1.ncols() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: b.1.ncols(),
        });
    }
    let n: usize = blocks.iter().map(|b| b.1.nrows()).sum();
    let mut x = DMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(n);
    let mut r0 = 0;
    for (d, m) in blocks {
        x.view_mut((r0, 0), (m.nrows(), p)).copy_from(m);
        labels.extend(std::iter::repeat_n(*d, m.nrows()));
        r0 += m.nrows();
    }
    Ok((x, labels))
}
