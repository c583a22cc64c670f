//! Band-pass filtering and ICA-based artifact removal.

mod filter;
mod ica;
mod scoring;

pub use filter::{bandpass, Biquad, Sos, DEFAULT_HI_HZ, DEFAULT_LO_HZ};
pub use ica::{
    fastica, remove_and_reconstruct, whiten, whiten_k, IcaConfig, IcaDecomposition, Whitened,
};
pub use scoring::{combine, score_components, ComponentScore, DEFAULT_LOWFREQ_HZ, FRONTAL_LABELS};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::session::Recording;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    /// `None` skips the band-pass stage.
    pub band_hz: Option<(f64, f64)>,
    /// Components to extract; `None` means one per EEG channel.
    pub k: Option<usize>,
    pub ica: IcaConfig,
    pub flag_threshold: f64,
    pub lowfreq_hz: f64,
    /// Replaces automatic flagging when set.
    pub explicit_flags: Option<Vec<usize>>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            band_hz: Some((DEFAULT_LO_HZ, DEFAULT_HI_HZ)),
            k: None,
            ica: IcaConfig::default(),
            flag_threshold: 0.6,
            lowfreq_hz: DEFAULT_LOWFREQ_HZ,
            explicit_flags: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub scores: Vec<ComponentScore>,
    pub flagged: Vec<usize>,
    pub automatic: bool,
    pub flag_threshold: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// EEG rows of `rec` as an `f64` matrix, with their row indices.
pub fn eeg_matrix(rec: &Recording) -> (DMatrix<f64>, Vec<usize>) {
    let rows: Vec<usize> = (0..rec.n_channels())
        .filter(|&i| !rec.channels[i].is_aux())
        .collect();
    let n = rec.n_samples();
    let m = DMatrix::from_fn(rows.len(), n, |r, c| f64::from(rec.data[rows[r]][c]));
    (m, rows)
}

/// Band-pass, decompose, flag and remove artifact components.
///
/// Aux channels are carried through unchanged.
pub fn clean_recording(rec: &Recording, cfg: &CleanConfig) -> Result<(Recording, CleanReport)> {
    let filtered = match cfg.band_hz {
        Some((lo, hi)) => bandpass(rec, lo, hi)?,
        None => rec.clone(),
    };
    let (x, rows) = eeg_matrix(&filtered);
    let labels: Vec<_> = rows.iter().map(|&i| rec.channels[i].clone()).collect();
    let k = cfg.k.unwrap_or(rows.len());
    let dec = fastica(&x, &labels, k, &cfg.ica)?;
    let scores = score_components(&dec, rec.sample_rate_hz, cfg.lowfreq_hz);
    let (flagged, automatic) = match &cfg.explicit_flags {
        Some(f) => {
            let mut f = f.clone();
            f.sort_unstable();
            f.dedup();
            (f, false)
        }
        None => (
            scores
                .iter()
                .filter(|s| s.combined > cfg.flag_threshold)
                .map(|s| s.component_index)
                .collect(),
            true,
        ),
    };
    let xhat = remove_and_reconstruct(&dec, &flagged)?;
    let mut out = filtered;
    for (r, &i) in rows.iter().enumerate() {
        out.data[i] = xhat.row(r).iter().map(|&v| v as f32).collect();
    }
    let report = CleanReport {
        scores,
        flagged,
        automatic,
        flag_threshold: cfg.flag_threshold,
        converged: dec.converged,
        iterations: dec.iterations,
    };
    Ok((out, report))
}
