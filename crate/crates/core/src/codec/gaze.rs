use serde::{Deserialize, Serialize};

use super::{goertzel_power, samples, tone};
use crate::error::{Error, Result};
use crate::session::GazeDirection;

/// Two-pulse gaze code: pulse 1 frequency selects left/right, pulse 2
/// duration selects top/bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeCodeTable {
    pub freq_left_hz: f64,
    pub freq_right_hz: f64,
    pub pulse1_s: f64,
    pub gap_s: f64,
    pub pulse2_hz: f64,
    pub pulse2_top_s: f64,
    pub pulse2_bottom_s: f64,
    /// Fraction of aux full scale.
    pub amplitude: f64,
    pub ramp_s: f64,
    /// A pulse with no partner within this span is malformed.
    pub pair_window_s: f64,
}

impl Default for GazeCodeTable {
    fn default() -> Self {
        GazeCodeTable {
            freq_left_hz: 40.0,
            freq_right_hz: 80.0,
            pulse1_s: 0.100,
            gap_s: 0.050,
            pulse2_hz: 120.0,
            pulse2_top_s: 0.100,
            pulse2_bottom_s: 0.200,
            amplitude: 0.8,
            ramp_s: 0.005,
            pair_window_s: 1.0,
        }
    }
}

impl GazeCodeTable {
    pub fn validate(&self, rate_hz: f64) -> Result<()> {
        let nyquist = rate_hz / 2.0;
        for f in [self.freq_left_hz, self.freq_right_hz, self.pulse2_hz] {
            if !(f > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "gaze frequency {f} must be positive"
                )));
            }
            if f >= nyquist {
                return Err(Error::AboveNyquist {
                    freq_hz: f,
                    nyquist_hz: nyquist,
                });
            }
        }
        let distinct = self.freq_left_hz != self.freq_right_hz
            && self.pulse2_top_s != self.pulse2_bottom_s
            && self.pulse2_hz != self.freq_left_hz
            && self.pulse2_hz != self.freq_right_hz;
        if !distinct {
            return Err(Error::InvalidConfig(
                "gaze code combinations are not distinct".into(),
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gaze amplitude {} outside (0, 1]",
                self.amplitude
            )));
        }
        let shortest = self
            .pulse1_s
            .min(self.pulse2_top_s)
            .min(self.pulse2_bottom_s);
        if !(self.ramp_s >= 0.0 && shortest >= 2.0 * self.ramp_s && self.gap_s > 0.0) {
            return Err(Error::InvalidConfig(
                "gaze pulses shorter than their ramps".into(),
            ));
        }
        Ok(())
    }

    fn pulse1_freq(&self, d: GazeDirection) -> f64 {
        match d {
            GazeDirection::TopLeft | GazeDirection::BottomLeft => self.freq_left_hz,
            _ => self.freq_right_hz,
        }
    }

    fn pulse2_dur(&self, d: GazeDirection) -> f64 {
        match d {
            GazeDirection::TopLeft | GazeDirection::TopRight => self.pulse2_top_s,
            _ => self.pulse2_bottom_s,
        }
    }

    /// Total code length in seconds.
    pub fn code_duration_s(&self, d: GazeDirection) -> f64 {
        self.pulse1_s + self.gap_s + self.pulse2_dur(d)
    }
}

/// Pulse 1, a silent gap, then pulse 2.
pub fn encode_gaze(
    direction: GazeDirection,
    table: &GazeCodeTable,
    rate_hz: f64,
) -> Result<Vec<f32>> {
    if !direction.is_known() {
        return Err(Error::UnknownDirection);
    }
    table.validate(rate_hz)?;
    let ramp = samples(table.ramp_s, rate_hz);
    let mut out = tone(
        table.pulse1_freq(direction),
        samples(table.pulse1_s, rate_hz),
        ramp,
        table.amplitude,
        rate_hz,
    );
    out.resize(out.len() + samples(table.gap_s, rate_hz), 0.0);
    out.extend(tone(
        table.pulse2_hz,
        samples(table.pulse2_dur(direction), rate_hz),
        ramp,
        table.amplitude,
        rate_hz,
    ));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeDiagnostic {
    pub onset_s: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GazeDecode {
    /// Decoded directions with the onset of their first pulse.
    pub codes: Vec<(GazeDirection, f64)>,
    pub diagnostics: Vec<GazeDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PulseKind {
    Left,
    Right,
    Second,
}

#[derive(Debug, Clone, Copy)]
struct Pulse {
    start: usize,
    end: usize,
    kind: PulseKind,
}

/// Decodes every pulse pair on an aux channel given in full-scale units.
pub fn decode_gaze(aux: &[f32], table: &GazeCodeTable, rate_hz: f64) -> Result<GazeDecode> {
    table.validate(rate_hz)?;
    let threshold = 0.3 * table.amplitude;
    let quiet = 1e-3 * table.amplitude;
    let ramp = samples(table.ramp_s, rate_hz);
    // below-threshold stretches inside one pulse are zero crossings, a few
    // samples at most; the inter-pulse gap is far longer
    let merge = (samples(table.gap_s, rate_hz) / 3).max(2);

    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, v) in aux.iter().enumerate() {
        if f64::from(v.abs()) <= threshold {
            continue;
        }
        match spans.last_mut() {
            Some((_, end)) if i - *end <= merge => *end = i + 1,
            _ => spans.push((i, i + 1)),
        }
    }

    let pulses: Vec<Pulse> = spans
        .into_iter()
        .map(|(first, end)| {
            // walk back over the ramp; a tone's first sample is exactly zero
            let mut start = first;
            while start > 0 && first - start <= ramp && f64::from(aux[start - 1].abs()) > quiet {
                start -= 1;
            }
            let start = start.saturating_sub(1);
            let seg = &aux[first..end];
            let powers = [
                (
                    PulseKind::Left,
                    goertzel_power(seg, table.freq_left_hz, rate_hz),
                ),
                (
                    PulseKind::Right,
                    goertzel_power(seg, table.freq_right_hz, rate_hz),
                ),
                (
                    PulseKind::Second,
                    goertzel_power(seg, table.pulse2_hz, rate_hz),
                ),
            ];
            let kind = powers
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|p| p.0)
                .expect("three candidates");
            Pulse { start, end, kind }
        })
        .collect();

    let t = |i: usize| i as f64 / rate_hz;
    let split = 0.5 * (table.pulse2_top_s + table.pulse2_bottom_s);
    let mut out = GazeDecode::default();
    let mut i = 0;
    while i < pulses.len() {
        let p = pulses[i];
        let partner = pulses.get(i + 1).filter(|q| {
            q.kind == PulseKind::Second && t(q.start) - t(p.end) <= table.pair_window_s
        });
        match (p.kind, partner) {
            (PulseKind::Left | PulseKind::Right, Some(q)) => {
                let top = t(q.end - q.start) < split;
                let direction = match (p.kind, top) {
                    (PulseKind::Left, true) => GazeDirection::TopLeft,
                    (PulseKind::Left, false) => GazeDirection::BottomLeft,
                    (_, true) => GazeDirection::TopRight,
                    (_, false) => GazeDirection::BottomRight,
                };
                out.codes.push((direction, t(p.start)));
                i += 2;
            }
            _ => {
                out.diagnostics.push(GazeDiagnostic {
                    onset_s: t(p.start),
                    message: format!(
                        "lone {} pulse of {:.0} ms without a partner",
                        match p.kind {
                            PulseKind::Left => "left",
                            PulseKind::Right => "right",
                            PulseKind::Second => "second",
                        },
                        1e3 * t(p.end - p.start)
                    ),
                });
                i += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::inject;

    const RATE: f64 = 500.0;

    #[test]
    fn code_lengths() {
        let t = GazeCodeTable::default();
        assert_eq!(
            encode_gaze(GazeDirection::TopLeft, &t, RATE).unwrap().len(),
            125
        );
        assert_eq!(
            encode_gaze(GazeDirection::BottomRight, &t, RATE)
                .unwrap()
                .len(),
            175
        );
    }

    #[test]
    fn unknown_direction_rejected() {
        let t = GazeCodeTable::default();
        assert!(matches!(
            encode_gaze(GazeDirection::Unknown, &t, RATE),
            Err(Error::UnknownDirection)
        ));
    }

    #[test]
    fn silent_channel_decodes_to_nothing() {
        let d = decode_gaze(&[0.0; 1000], &GazeCodeTable::default(), RATE).unwrap();
        assert_eq!(d, GazeDecode::default());
    }

    #[test]
    fn round_trip_each_direction() {
        let t = GazeCodeTable::default();
        for dir in GazeDirection::QUADRANTS {
            let code = encode_gaze(dir, &t, RATE).unwrap();
            let s = inject(&[0.0; 1000], 1.0, &code, RATE).unwrap();
            let d = decode_gaze(&s, &t, RATE).unwrap();
            assert_eq!(d.codes.len(), 1, "{dir}");
            assert_eq!(d.codes[0].0, dir);
            assert!(
                (d.codes[0].1 - 1.0).abs() <= 0.01,
                "{dir}: {}",
                d.codes[0].1
            );
            assert!(d.diagnostics.is_empty());
        }
    }

    #[test]
    fn back_to_back_sequence() {
        let t = GazeCodeTable::default();
        let mut s = vec![0.0f32; 1500];
        for (k, dir) in GazeDirection::QUADRANTS.into_iter().enumerate() {
            let code = encode_gaze(dir, &t, RATE).unwrap();
            s = inject(&s, 0.1 + 0.5 * k as f64, &code, RATE).unwrap();
        }
        let d = decode_gaze(&s, &t, RATE).unwrap();
        let dirs: Vec<GazeDirection> = d.codes.iter().map(|c| c.0).collect();
        assert_eq!(dirs, GazeDirection::QUADRANTS.to_vec());
    }

    #[test]
    fn lone_pulse_is_a_diagnostic() {
        let t = GazeCodeTable::default();
        let code = encode_gaze(GazeDirection::TopLeft, &t, RATE).unwrap();
        let s = inject(&[0.0; 2000], 0.5, &code[..50], RATE).unwrap();
        let d = decode_gaze(&s, &t, RATE).unwrap();
        assert!(d.codes.is_empty());
        assert_eq!(d.diagnostics.len(), 1);
        assert!((d.diagnostics[0].onset_s - 0.5).abs() <= 0.01);
    }
}
