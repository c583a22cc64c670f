use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    validate_recording, ChannelLabel, EventMarker, GazeInterval, Recording, Session, SessionInfo,
};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const DATA_BIN: &str = "data.f32le";
const DATA_CSV: &str = "data.csv";
const EVENTS: &str = "events.json";
const GAZE: &str = "gaze.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DataEncoding {
    /// Channel-major little-endian `f32`, exact.
    #[default]
    #[serde(rename = "f32le")]
    F32Le,
    /// One row per sample, six significant digits.
    #[serde(rename = "csv")]
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub sample_rate_hz: f64,
    pub channels: Vec<ChannelLabel>,
    pub n_samples: usize,
    pub data_encoding: DataEncoding,
    pub subject: String,
    pub start_time_ns: i64,
    pub codec_digest: String,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::json(format!("serializing {}", path.display()), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(format!("parsing {}", path.display()), e))
}

/// Writes `session` as a session directory at `path`, creating it if needed.
pub fn save_session(session: &Session, path: &Path, encoding: DataEncoding) -> Result<()> {
    let problems = session.structural_problems();
    if !problems.is_empty() {
        return Err(Error::InvalidSession(problems));
    }
    fs::create_dir_all(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;

    let rec = &session.recording;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        sample_rate_hz: rec.sample_rate_hz,
        channels: rec.channels.clone(),
        n_samples: rec.n_samples(),
        data_encoding: encoding,
        subject: session.info.subject.clone(),
        start_time_ns: rec.start_time_ns,
        codec_digest: session.info.codec_digest.clone(),
    };
    write_json(&path.join(MANIFEST), &manifest)?;

    match encoding {
        DataEncoding::F32Le => {
            let data_path = path.join(DATA_BIN);
            fs::write(&data_path, encode_f32le(rec.data.iter().flatten().copied()))
                .map_err(|e| Error::io(format!("writing {}", data_path.display()), e))?;
        }
        DataEncoding::Csv => write_csv(&path.join(DATA_CSV), rec)?,
    }
    write_json(&path.join(EVENTS), &session.events)?;
    write_json(&path.join(GAZE), &session.gaze_labels)?;
    Ok(())
}

/// Reads a session directory and re-validates it.
///
/// Events are re-sorted by onset. Out-of-range samples are tolerated so that
/// damaged recordings can still be inspected.
pub fn load_session(path: &Path) -> Result<Session> {
    let manifest: Manifest = read_json(&path.join(MANIFEST))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Invalid(format!(
            "unsupported session format version {}",
            manifest.format_version
        )));
    }
    let n_ch = manifest.channels.len();
    let n = manifest.n_samples;
    let data = match manifest.data_encoding {
        DataEncoding::F32Le => {
            let data_path = path.join(DATA_BIN);
            let bytes = fs::read(&data_path)
                .map_err(|e| Error::io(format!("reading {}", data_path.display()), e))?;
            if bytes.len() != 4 * n_ch * n {
                return Err(Error::Mismatch(format!(
                    "manifest declares {n_ch} channels x {n} samples ({} bytes) but {} holds {} bytes",
                    4 * n_ch * n,
                    data_path.display(),
                    bytes.len()
                )));
            }
            let flat = decode_f32le(&bytes);
            if n == 0 {
                vec![Vec::new(); n_ch]
            } else {
                flat.chunks(n).map(<[f32]>::to_vec).collect()
            }
        }
        DataEncoding::Csv => read_csv(&path.join(DATA_CSV), &manifest.channels, n)?,
    };

    let recording = Recording {
        sample_rate_hz: manifest.sample_rate_hz,
        channels: manifest.channels,
        data,
        start_time_ns: manifest.start_time_ns,
    };
    let mut events: Vec<EventMarker> = read_json(&path.join(EVENTS))?;
    events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
    let gaze_labels: Vec<GazeInterval> = read_json(&path.join(GAZE))?;

    let session = Session {
        recording,
        events,
        gaze_labels,
        info: SessionInfo {
            subject: manifest.subject,
            codec_digest: manifest.codec_digest,
        },
    };
    let problems = session.structural_problems();
    if !problems.is_empty() {
        return Err(Error::InvalidSession(problems));
    }
    let amplitude = validate_recording(&session.recording).len();
    if amplitude > 0 {
        log::warn!(
            "{}: {amplitude} samples outside the amplitude bound",
            path.display()
        );
    }
    Ok(session)
}

pub(crate) fn encode_f32le(values: impl Iterator<Item = f32>) -> Vec<u8> {
    values.flat_map(f32::to_le_bytes).collect()
}

pub(crate) fn decode_f32le(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

/// `%g`-style formatting with six significant digits.
fn format_sig6(v: f32) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        return format!("{v:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn write_csv(path: &Path, rec: &Recording) -> Result<()> {
    let io_err = |e: csv::Error| {
        Error::io(
            format!("writing {}", path.display()),
            std::io::Error::other(e),
        )
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(rec.channels.iter().map(ChannelLabel::as_str))
        .map_err(io_err)?;
    let mut row = Vec::with_capacity(rec.n_channels());
    for i in 0..rec.n_samples() {
        row.clear();
        row.extend(rec.data.iter().map(|ch| format_sig6(ch[i])));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_csv(path: &Path, channels: &[ChannelLabel], n: usize) -> Result<Vec<Vec<f32>>> {
    let ctx = format!("reading {}", path.display());
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::io(ctx.clone(), std::io::Error::other(e)))?;
    let header = r
        .headers()
        .map_err(|e| Error::Mismatch(format!("{ctx}: {e}")))?
        .clone();
    if header.len() != channels.len() || header.iter().zip(channels).any(|(h, c)| h != c.as_str()) {
        return Err(Error::Mismatch(format!(
            "{ctx}: header does not match the {} manifest channels",
            channels.len()
        )));
    }
    let mut data = vec![Vec::with_capacity(n); channels.len()];
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::Mismatch(format!("{ctx}: row {i}: {e}")))?;
        for (col, field) in record.iter().enumerate() {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("{ctx}: row {i}: bad number '{field}'")))?;
            data[col].push(v);
        }
    }
    let rows = data.first().map_or(0, Vec::len);
    if rows != n {
        return Err(Error::Mismatch(format!(
            "manifest declares {n} samples but {} has {rows} rows",
            path.display()
        )));
    }
    Ok(data)
}
