//! Recordings, event markers, gaze labels and the on-disk session directory.

pub(crate) mod io;

pub use io::{load_session, save_session, DataEncoding, Manifest, FORMAT_VERSION};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical acquisition rate of the EEG amplifier.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 500.0;

/// Symmetric amplitude bound for valid samples, in microvolts.
pub const MAX_ABS_UV: f32 = 12_000.0;

/// Full-scale value of the auxiliary channels, in microvolts. Codes written
/// to AUX1/AUX2 are expressed as fractions of this value.
pub const AUX_FULL_SCALE_UV: f64 = 1_000.0;

/// The 19 EEG electrodes of the 10-20 montage, in recording order.
pub const EEG_LABELS: [&str; 19] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz",
    "P4", "T6", "O1", "O2",
];

pub const AUX_EVENT_LABEL: &str = "AUX1";
pub const AUX_GAZE_LABEL: &str = "AUX2";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelLabel(pub String);

impl ChannelLabel {
    pub fn new(label: impl Into<String>) -> Self {
        ChannelLabel(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_aux(&self) -> bool {
        self.0 == AUX_EVENT_LABEL || self.0 == AUX_GAZE_LABEL
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChannelLabel {
    fn from(s: &str) -> Self {
        ChannelLabel(s.to_string())
    }
}

/// 19 EEG labels followed by AUX1 and AUX2.
pub fn canonical_labels() -> Vec<ChannelLabel> {
    EEG_LABELS
        .iter()
        .copied()
        .chain([AUX_EVENT_LABEL, AUX_GAZE_LABEL])
        .map(ChannelLabel::from)
        .collect()
}

pub fn eeg_labels() -> Vec<ChannelLabel> {
    EEG_LABELS.iter().copied().map(ChannelLabel::from).collect()
}

/// Fixed-rate multichannel sample matrix in microvolts.
///
/// Samples are stored as `f32`, which holds a 24-bit converter value exactly
/// and matches the binary session encoding bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sample_rate_hz: f64,
    pub channels: Vec<ChannelLabel>,
    /// One row per channel.
    pub data: Vec<Vec<f32>>,
    pub start_time_ns: i64,
}

impl Recording {
    pub fn new(sample_rate_hz: f64, channels: Vec<ChannelLabel>, data: Vec<Vec<f32>>) -> Self {
        Recording {
            sample_rate_hz,
            channels,
            data,
            start_time_ns: 0,
        }
    }

    /// Zero-filled recording over the given channels.
    pub fn zeros(sample_rate_hz: f64, channels: Vec<ChannelLabel>, n_samples: usize) -> Self {
        let data = vec![vec![0.0; n_samples]; channels.len()];
        Recording::new(sample_rate_hz, channels, data)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.as_str() == label)
    }

    pub fn channel(&self, label: &str) -> Result<&[f32]> {
        self.channel_index(label)
            .map(|i| self.data[i].as_slice())
            .ok_or_else(|| Error::MissingChannel(label.to_string()))
    }

    pub fn channel_mut(&mut self, label: &str) -> Result<&mut Vec<f32>> {
        match self.channel_index(label) {
            Some(i) => Ok(&mut self.data[i]),
            None => Err(Error::MissingChannel(label.to_string())),
        }
    }

    /// True for the 19 EEG + AUX1/AUX2 layout in canonical order.
    pub fn is_canonical(&self) -> bool {
        self.channels == canonical_labels()
    }

    /// Samples in `[t0_s, t1_s)`, clipped to the recording.
    pub fn slice(&self, t0_s: f64, t1_s: f64) -> Recording {
        let n = self.n_samples();
        let i0 = ((t0_s * self.sample_rate_hz).round().max(0.0) as usize).min(n);
        let i1 = ((t1_s * self.sample_rate_hz).round().max(0.0) as usize).clamp(i0, n);
        Recording {
            sample_rate_hz: self.sample_rate_hz,
            channels: self.channels.clone(),
            data: self.data.iter().map(|row| row[i0..i1].to_vec()).collect(),
            start_time_ns: self.start_time_ns + (i0 as f64 / self.sample_rate_hz * 1e9) as i64,
        }
    }
}

/// One failed [`Recording`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonPositiveRate(f64),
    ChannelCountMismatch {
        labels: usize,
        rows: usize,
    },
    RaggedRow {
        channel: String,
        len: usize,
        expected: usize,
    },
    DuplicateLabel(String),
    SampleOutOfRange {
        channel: String,
        index: usize,
        value: f32,
    },
}

impl Violation {
    /// Amplitude violations leave the recording loadable; everything else
    /// makes it structurally unusable.
    pub fn is_structural(&self) -> bool {
        !matches!(self, Violation::SampleOutOfRange { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveRate(r) => write!(f, "sample rate {r} Hz is not positive"),
            Violation::ChannelCountMismatch { labels, rows } => {
                write!(f, "{labels} channel labels but {rows} data rows")
            }
            Violation::RaggedRow {
                channel,
                len,
                expected,
            } => write!(
                f,
                "channel {channel} has {len} samples, expected {expected}"
            ),
            Violation::DuplicateLabel(l) => write!(f, "duplicate channel label {l}"),
            Violation::SampleOutOfRange {
                channel,
                index,
                value,
            } => write!(
                f,
                "channel {channel} sample {index} = {value} uV outside ±{MAX_ABS_UV} uV"
            ),
        }
    }
}

/// Checks every [`Recording`] invariant; an empty list means the recording is valid.
pub fn validate_recording(rec: &Recording) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(rec.sample_rate_hz > 0.0 && rec.sample_rate_hz.is_finite()) {
        out.push(Violation::NonPositiveRate(rec.sample_rate_hz));
    }
    if rec.channels.len() != rec.data.len() {
        out.push(Violation::ChannelCountMismatch {
            labels: rec.channels.len(),
            rows: rec.data.len(),
        });
    }
    let mut seen = HashSet::new();
    for label in &rec.channels {
        if !seen.insert(label.as_str()) {
            out.push(Violation::DuplicateLabel(label.0.clone()));
        }
    }
    let expected = rec.n_samples();
    for (i, row) in rec.data.iter().enumerate() {
        let channel = rec
            .channels
            .get(i)
            .map_or_else(|| format!("#{i}"), |c| c.0.clone());
        if row.len() != expected {
            out.push(Violation::RaggedRow {
                channel: channel.clone(),
                len: row.len(),
                expected,
            });
        }
        for (index, &value) in row.iter().enumerate() {
            // NaN fails the comparison as well
            if !(value.abs() <= MAX_ABS_UV) {
                out.push(Violation::SampleOutOfRange {
                    channel: channel.clone(),
                    index,
                    value,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventSource {
    Script,
    DecodedAudio,
    DecodedAux1,
    DecodedAux2,
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMarker {
    pub code: u32,
    /// Seconds relative to recording start.
    pub onset_s: f64,
    pub source: EventSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_receive_time_ns: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GazeDirection {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    Unknown,
}

impl GazeDirection {
    /// The four trainable quadrants.
    pub const QUADRANTS: [GazeDirection; 4] = [
        GazeDirection::TopLeft,
        GazeDirection::TopRight,
        GazeDirection::BottomLeft,
        GazeDirection::BottomRight,
    ];

    pub fn is_known(self) -> bool {
        self != GazeDirection::Unknown
    }

    pub fn name(self) -> &'static str {
        match self {
            GazeDirection::TopLeft => "TopLeft",
            GazeDirection::TopRight => "TopRight",
            GazeDirection::BottomLeft => "BottomLeft",
            GazeDirection::BottomRight => "BottomRight",
            GazeDirection::Unknown => "Unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::QUADRANTS
            .into_iter()
            .chain([GazeDirection::Unknown])
            .find(|d| d.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for GazeDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Gaze label over the half-open interval `[t0_s, t1_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeInterval {
    pub t0_s: f64,
    pub t1_s: f64,
    pub direction: GazeDirection,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SessionInfo {
    pub subject: String,
    pub codec_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub recording: Recording,
    pub events: Vec<EventMarker>,
    pub gaze_labels: Vec<GazeInterval>,
    pub info: SessionInfo,
}

impl Session {
    pub fn new(recording: Recording) -> Self {
        Session {
            recording,
            events: Vec::new(),
            gaze_labels: Vec::new(),
            info: SessionInfo::default(),
        }
    }

    /// Structural problems that make the session unsuitable for saving.
    ///
    /// Out-of-range samples are not reported here; see [`validate_recording`].
    pub fn structural_problems(&self) -> Vec<String> {
        let mut out: Vec<String> = validate_recording(&self.recording)
            .into_iter()
            .filter(Violation::is_structural)
            .map(|v| v.to_string())
            .collect();
        for (i, e) in self.events.iter().enumerate() {
            if !(e.onset_s >= 0.0) {
                out.push(format!("event {i} has negative onset {}", e.onset_s));
            }
        }
        if self.events.windows(2).any(|w| w[1].onset_s < w[0].onset_s) {
            out.push("events are not sorted by onset".to_string());
        }
        let duration = self.recording.duration_s();
        // half a sample of slack for intervals computed from rounded times
        let slack = 0.5 / self.recording.sample_rate_hz.max(f64::MIN_POSITIVE);
        for (i, g) in self.gaze_labels.iter().enumerate() {
            if !(g.t0_s >= 0.0 && g.t1_s > g.t0_s && g.t1_s <= duration + slack) {
                out.push(format!(
                    "gaze interval {i} [{}, {}) outside [0, {duration}]",
                    g.t0_s, g.t1_s
                ));
            }
        }
        let mut sorted: Vec<&GazeInterval> = self.gaze_labels.iter().collect();
        sorted.sort_by(|a, b| a.t0_s.total_cmp(&b.t0_s));
        if sorted.windows(2).any(|w| w[1].t0_s < w[0].t1_s) {
            out.push("gaze intervals overlap".to_string());
        }
        out
    }

    pub fn sort_events(&mut self) {
        self.events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    }
}

/// Gaze intervals from a list of `(start time, direction)` switch points.
///
/// Each direction holds until the next switch point or `duration_s`.
pub fn intervals_from_switches(
    switches: &[(f64, GazeDirection)],
    duration_s: f64,
) -> Vec<GazeInterval> {
    let mut sorted = switches.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    sorted
        .iter()
        .enumerate()
        .filter_map(|(i, &(t0, direction))| {
            let t1 = sorted
                .get(i + 1)
                .map_or(duration_s, |next| next.0)
                .min(duration_s);
            (t1 > t0).then_some(GazeInterval {
                t0_s: t0.max(0.0),
                t1_s: t1,
                direction,
            })
        })
        .collect()
}
