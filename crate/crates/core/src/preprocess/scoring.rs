use serde::{Deserialize, Serialize};

use super::ica::IcaDecomposition;
use crate::spectrum::{band_sum, Periodogram};

/// Electrodes nearest the eyes.
pub const FRONTAL_LABELS: [&str; 4] = ["Fp1", "Fp2", "F7", "F8"];
pub const DEFAULT_LOWFREQ_HZ: f64 = 4.0;

/// How artifact-like one independent component looks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub component_index: usize,
    /// Source power in `0 < f < lowfreq_hz` over all power above DC.
    pub lowfreq_fraction: f64,
    /// `|mixing|` mass on the frontal electrodes over total `|mixing|` mass.
    pub frontal_fraction: f64,
    /// Peak channel amplitude over the median across components.
    pub amplitude_ratio: f64,
    pub combined: f64,
}

pub fn combine(lowfreq: f64, frontal: f64, amplitude_ratio: f64) -> f64 {
    (lowfreq + frontal + (amplitude_ratio / 3.0).min(1.0)) / 3.0
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Scores every component of `dec`.
///
/// A component's amplitude is its peak contribution to any channel,
/// `max|s_j| * max|A_ij|`; sources have unit variance, so the mixing scale
/// carries the physical size.
pub fn score_components(
    dec: &IcaDecomposition,
    rate_hz: f64,
    lowfreq_hz: f64,
) -> Vec<ComponentScore> {
    let k = dec.k();
    let n = dec.sources.ncols();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let frontal: Vec<usize> = dec
        .channel_labels
        .iter()
        .enumerate()
        .filter(|(_, l)| FRONTAL_LABELS.contains(&l.as_str()))
        .map(|(i, _)| i)
        .collect();

    let mut pg = Periodogram::new(n);
    let nyq = rate_hz / 2.0 + 1.0;
    let mut amplitude = Vec::with_capacity(k);
    let mut partial = Vec::with_capacity(k);
    for j in 0..k {
        let s: Vec<f64> = dec.sources.row(j).iter().copied().collect();
        let p = pg.power(&s);
        let low = band_sum(&p, n, rate_hz, f64::MIN_POSITIVE, lowfreq_hz);
        let total = band_sum(&p, n, rate_hz, f64::MIN_POSITIVE, nyq);
        let lowfreq = if total > 0.0 { low / total } else { 0.0 };

        let col = dec.mixing.column(j);
        let mass: f64 = col.iter().map(|v| v.abs()).sum();
        let front: f64 = frontal.iter().map(|&i| col[i].abs()).sum();
        let frontal_fraction = if mass > 0.0 { front / mass } else { 0.0 };

        let peak_s = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let peak_a = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        amplitude.push(peak_s * peak_a);
        partial.push((lowfreq, frontal_fraction));
    }
    let med = median(&amplitude);
    partial
        .into_iter()
        .zip(amplitude)
        .enumerate()
        .map(|(j, ((lowfreq, frontal), amp))| {
            let ratio = if med > 0.0 { amp / med } else { 0.0 };
            ComponentScore {
                component_index: j,
                lowfreq_fraction: lowfreq,
                frontal_fraction: frontal,
                amplitude_ratio: ratio,
                combined: combine(lowfreq, frontal, ratio),
            }
        })
        .collect()
}
