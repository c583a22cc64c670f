//! Ground-truth synthetic sessions.
//!
//! Each EEG channel is a mix of ten integer-frequency sinusoid sources, two
//! per band, whose band amplitudes follow the active segment's signature,
//! plus Poisson blink transients on the frontal electrodes and white noise.
//! Every component is kept so that each pipeline stage can be checked
//! against the truth.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::{encode_burst, encode_gaze, inject_at, samples, CodecConfig, GazeCodeTable};
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::session::io::{decode_f32le, encode_f32le};
use crate::session::{
    canonical_labels, EventMarker, EventSource, GazeDirection, GazeInterval, Recording, Session,
    SessionInfo, AUX_EVENT_LABEL, AUX_FULL_SCALE_UV, AUX_GAZE_LABEL, DEFAULT_SAMPLE_RATE_HZ,
    EEG_LABELS,
};

pub const N_BANDS: usize = 5;

/// Source frequencies per band; integer hertz so that every one-second
/// window holds whole cycles.
pub const BAND_SOURCE_HZ: [[f64; 2]; N_BANDS] = [
    [1.0, 3.0],
    [5.0, 7.0],
    [9.0, 11.0],
    [17.0, 23.0],
    [37.0, 53.0],
];

/// Default per-band RMS at unit emphasis, in microvolts.
pub const BASE_BAND_RMS_UV: [f64; N_BANDS] = [3.0, 8.0, 20.0, 10.0, 5.0];

/// Blink loading per electrode, scaled by the blink amplitude.
pub const BLINK_LOADINGS: [(&str, f64); 4] =
    [("Fp1", 1.0), ("Fp2", 1.0), ("F7", 0.55), ("F8", 0.55)];

pub const BLINK_TEMPLATE_S: f64 = 0.3;
pub const BLINK_MIN_SEPARATION_S: f64 = 0.5;

/// Name of the untrained signature.
pub const NOVEL_SIGNATURE: &str = "bottom";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentLabel {
    Direction(GazeDirection),
    /// A signature with no trained direction.
    Novel(String),
}

impl SegmentLabel {
    pub fn name(&self) -> String {
        match self {
            SegmentLabel::Direction(d) => d.name().to_string(),
            SegmentLabel::Novel(n) => n.clone(),
        }
    }

    pub fn direction(&self) -> GazeDirection {
        match self {
            SegmentLabel::Direction(d) => *d,
            SegmentLabel::Novel(_) => GazeDirection::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(flatten)]
    pub label: SegmentLabel,
    pub duration_s: f64,
}

impl Segment {
    pub fn direction(d: GazeDirection, duration_s: f64) -> Self {
        Segment {
            label: SegmentLabel::Direction(d),
            duration_s,
        }
    }

    pub fn novel(name: &str, duration_s: f64) -> Self {
        Segment {
            label: SegmentLabel::Novel(name.to_string()),
            duration_s,
        }
    }
}

/// Missing JSON fields take their value from `SynthSpec::default()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub directions: Vec<Segment>,
    /// Segment name to per-band amplitude multipliers.
    pub signature_map: BTreeMap<String, Vec<f64>>,
    pub blink_rate_per_min: f64,
    pub blink_amplitude_uv: f64,
    pub noise_rms_uv: f64,
    /// Largest accepted singular-value ratio of the band loading matrix.
    pub mixing_condition_max: f64,
    pub sample_rate_hz: f64,
    pub band_rms_uv: Vec<f64>,
    pub subject: String,
}

/// Band emphasis per segment. Each quadrant raises one of bands 1..4 by
/// 2.5x. The novel signature raises both bottom-quadrant bands 4x and
/// damps both top-quadrant bands to 0.4x, which puts it outside the
/// trained directions along every band they vary in. Emphasis confined to
/// band 0 would not do: no trained direction varies there, so its
/// component is never retained.
pub fn default_signatures() -> BTreeMap<String, Vec<f64>> {
    let mut m = BTreeMap::new();
    let boosted = |b: usize| {
        (0..N_BANDS)
            .map(|i| if i == b { 2.5 } else { 1.0 })
            .collect::<Vec<_>>()
    };
    for (i, d) in GazeDirection::QUADRANTS.iter().enumerate() {
        m.insert(d.name().to_string(), boosted(i + 1));
    }
    m.insert(NOVEL_SIGNATURE.to_string(), vec![1.0, 0.4, 0.4, 4.0, 4.0]);
    m
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::quadrants(0, 60.0)
    }
}

impl SynthSpec {
    /// The four quadrants in order, `segment_s` each.
    pub fn quadrants(seed: u64, segment_s: f64) -> Self {
        SynthSpec {
            seed,
            directions: GazeDirection::QUADRANTS
                .iter()
                .map(|&d| Segment::direction(d, segment_s))
                .collect(),
            signature_map: default_signatures(),
            blink_rate_per_min: 15.0,
            blink_amplitude_uv: 150.0,
            noise_rms_uv: 10.0,
            mixing_condition_max: 10.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            band_rms_uv: BASE_BAND_RMS_UV.to_vec(),
            subject: "synthetic".into(),
        }
    }

    pub fn with_segments(mut self, segments: Vec<Segment>) -> Self {
        self.directions = segments;
        self
    }

    pub fn total_duration_s(&self) -> f64 {
        self.directions.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.sample_rate_hz > 2.0 * BAND_SOURCE_HZ[N_BANDS - 1][1]) {
            return bad(format!(
                "sample rate {} too low for the band sources",
                self.sample_rate_hz
            ));
        }
        if self.directions.is_empty() {
            return bad("no segments".into());
        }
        for s in &self.directions {
            if !(s.duration_s > 0.0) {
                return bad(format!(
                    "segment {} has non-positive duration",
                    s.label.name()
                ));
            }
            if s.label.direction() == GazeDirection::Unknown
                && matches!(s.label, SegmentLabel::Direction(_))
            {
                return bad("segments must name a quadrant or a novel signature".into());
            }
            if !self.signature_map.contains_key(&s.label.name()) {
                return bad(format!("no signature for segment {}", s.label.name()));
            }
        }
        if self.band_rms_uv.len() != N_BANDS || self.band_rms_uv.iter().any(|&v| !(v >= 0.0)) {
            return bad(format!(
                "band_rms_uv must hold {N_BANDS} non-negative values"
            ));
        }
        let normalized: Vec<(&String, Vec<f64>)> = self
            .signature_map
            .iter()
            .map(|(k, v)| {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                (k, v.iter().map(|x| x / norm).collect())
            })
            .collect();
        for (k, v) in &self.signature_map {
            if v.len() != N_BANDS || v.iter().any(|&x| !(x > 0.0)) {
                return bad(format!("signature {k} must hold {N_BANDS} positive values"));
            }
        }
        for (i, (ka, a)) in normalized.iter().enumerate() {
            for (kb, b) in &normalized[i + 1..] {
                let d = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if d < 0.5 {
                    return bad(format!("signatures {ka} and {kb} are too similar ({d:.3})"));
                }
            }
        }
        if self.blink_rate_per_min < 0.0 || self.blink_rate_per_min * BLINK_MIN_SEPARATION_S >= 60.0
        {
            return bad(format!(
                "blink rate {} per minute incompatible with the {BLINK_MIN_SEPARATION_S} s separation",
                self.blink_rate_per_min
            ));
        }
        if !(self.noise_rms_uv >= 0.0) {
            return bad("noise RMS must be non-negative".into());
        }
        if !(self.blink_amplitude_uv > 3.0 * self.noise_rms_uv) {
            return bad("blink amplitude must exceed three times the noise RMS".into());
        }
        if !(self.mixing_condition_max >= 1.0) {
            return bad("mixing_condition_max must be at least 1".into());
        }
        Ok(())
    }
}

/// Everything needed to check a pipeline stage against the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub eeg_labels: Vec<String>,
    /// Artifact- and noise-free EEG, one row per EEG channel. Stored
    /// separately as `clean.f32le`.
    #[serde(skip)]
    pub clean: Vec<Vec<f32>>,
    /// White noise added per channel; not persisted.
    #[serde(skip)]
    pub noise: Vec<Vec<f64>>,
    pub blink_times_s: Vec<f64>,
    pub blink_template: Vec<f64>,
    /// Blink signal in microvolts at unit loading.
    pub blink_waveform_uv: Vec<f64>,
    /// Per EEG channel, multiplies `blink_waveform_uv`.
    pub blink_mixing: Vec<f64>,
    /// Band loading matrix, `19 x 10` row-major.
    pub band_loadings: Vec<f64>,
    pub mixing_condition: f64,
    /// Segment name of each whole second.
    pub window_labels: Vec<String>,
    pub segments: Vec<(f64, f64, String)>,
}

/// Poisson blink onsets with a minimum separation, and the blink template.
///
/// Inter-blink gaps are `BLINK_MIN_SEPARATION_S` plus an exponential whose
/// mean keeps the overall rate at `rate_per_min`. Only blinks whose template
/// ends within `duration_s` are returned.
pub fn gen_blink(
    rate_per_min: f64,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let template = blink_template(sample_rate_hz);
    let mut times = Vec::new();
    if rate_per_min > 0.0 && duration_s > 0.0 {
        let mean_gap = 60.0 / rate_per_min;
        let extra = (mean_gap - BLINK_MIN_SEPARATION_S).max(1e-9);
        let exp = Exp::new(1.0 / extra).expect("positive rate");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = exp.sample(&mut rng);
        while t + BLINK_TEMPLATE_S <= duration_s {
            times.push(t);
            t += BLINK_MIN_SEPARATION_S + exp.sample(&mut rng);
        }
    }
    (times, template)
}

/// Biphasic raised-cosine pulse: a positive lobe over 60% of the template
/// peaking at exactly 1, then a negative lobe of depth 0.75.
pub fn blink_template(sample_rate_hz: f64) -> Vec<f64> {
    let n = samples(BLINK_TEMPLATE_S, sample_rate_hz).max(2);
    let n1 = ((n as f64 * 0.6).round() as usize).clamp(1, n - 1);
    let n2 = n - n1;
    let lobe = |i: usize, len: usize| 0.5 * (1.0 - (2.0 * PI * i as f64 / len as f64).cos());
    (0..n1)
        .map(|i| lobe(i, n1))
        .chain((0..n2).map(|i| -0.75 * lobe(i, n2)))
        .collect()
}

fn cond_number(l: &DMatrix<f64>) -> f64 {
    let e = sym_eigen(&(l.transpose() * l), 1e-14);
    let max = e.values.max();
    let min = e.values.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        (max / min).sqrt()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Synthetic EEG only: clean rows, noise rows, band loadings, condition.
struct EegParts {
    clean: Vec<Vec<f32>>,
    noise: Vec<Vec<f64>>,
    loadings: DMatrix<f64>,
    condition: f64,
}

fn band_loadings(spec: &SynthSpec) -> Result<(DMatrix<f64>, f64)> {
    let mut rng = stream(spec.seed, 1);
    let c = EEG_LABELS.len();
    for _ in 0..64 {
        let mut l = DMatrix::zeros(c, 2 * N_BANDS);
        for ch in 0..c {
            for b in 0..N_BANDS {
                let theta: f64 = rng.random_range(0.0..2.0 * PI);
                let g: f64 = rng.random_range(0.9..1.1);
                l[(ch, 2 * b)] = g * theta.cos();
                l[(ch, 2 * b + 1)] = g * theta.sin();
            }
        }
        let cond = cond_number(&l);
        if cond <= spec.mixing_condition_max {
            return Ok((l, cond));
        }
    }
    Err(Error::InvalidConfig(format!(
        "no band loading matrix with condition number <= {} found",
        spec.mixing_condition_max
    )))
}

fn gen_eeg(spec: &SynthSpec, n: usize) -> Result<EegParts> {
    let rate = spec.sample_rate_hz;
    let (loadings, condition) = band_loadings(spec)?;
    let mut phase_rng = stream(spec.seed, 2);
    let phases: Vec<f64> = (0..2 * N_BANDS)
        .map(|_| phase_rng.random_range(0.0..2.0 * PI))
        .collect();

    // per-sample band amplitude from the active segment
    let mut seg_of_sample = Vec::with_capacity(n);
    let mut t0 = 0.0;
    for (si, s) in spec.directions.iter().enumerate() {
        let end = samples(t0 + s.duration_s, rate).min(n);
        seg_of_sample.resize(end, si);
        t0 += s.duration_s;
    }
    seg_of_sample.resize(n, spec.directions.len() - 1);
    let amp: Vec<Vec<f64>> = spec
        .directions
        .iter()
        .map(|s| {
            let sig = &spec.signature_map[&s.label.name()];
            (0..N_BANDS).map(|b| spec.band_rms_uv[b] * sig[b]).collect()
        })
        .collect();

    let c = EEG_LABELS.len();
    let mut clean = vec![vec![0.0f32; n]; c];
    let mut src = vec![0.0f64; 2 * N_BANDS];
    for i in 0..n {
        let t = i as f64 / rate;
        let a = &amp[seg_of_sample[i]];
        for b in 0..N_BANDS {
            for k in 0..2 {
                let f = BAND_SOURCE_HZ[b][k];
                src[2 * b + k] = a[b] * 2f64.sqrt() * (2.0 * PI * f * t + phases[2 * b + k]).sin();
            }
        }
        for (ch, row) in clean.iter_mut().enumerate() {
            let mut v = 0.0;
            for (j, s) in src.iter().enumerate() {
                v += loadings[(ch, j)] * s;
            }
            row[i] = v as f32;
        }
    }

    let mut noise_rng = stream(spec.seed, 4);
    let noise = if spec.noise_rms_uv > 0.0 {
        let normal = Normal::new(0.0, spec.noise_rms_uv).expect("finite sigma");
        (0..c)
            .map(|_| (0..n).map(|_| normal.sample(&mut noise_rng)).collect())
            .collect()
    } else {
        vec![vec![0.0; n]; c]
    };
    Ok(EegParts {
        clean,
        noise,
        loadings,
        condition,
    })
}

/// Generates a canonical 21-channel session and its ground truth.
///
/// AUX1 carries a script-event burst at each segment start (code = segment
/// index mod 8) and AUX2 the gaze code of each quadrant segment.
pub fn gen_session(spec: &SynthSpec) -> Result<(Session, GroundTruth)> {
    spec.validate()?;
    let rate = spec.sample_rate_hz;
    let duration = spec.total_duration_s();
    let n = samples(duration, rate);
    let parts = gen_eeg(spec, n)?;

    let mut blink_seed_rng = stream(spec.seed, 3);
    let (blink_times, template) = gen_blink(
        spec.blink_rate_per_min,
        duration,
        rate,
        blink_seed_rng.random(),
    );
    let mut blink_waveform = vec![0.0f64; n];
    for &t in &blink_times {
        let start = samples(t, rate);
        for (j, &v) in template.iter().enumerate() {
            if let Some(w) = blink_waveform.get_mut(start + j) {
                *w += spec.blink_amplitude_uv * v;
            }
        }
    }
    let blink_mixing: Vec<f64> = EEG_LABELS
        .iter()
        .map(|l| {
            BLINK_LOADINGS
                .iter()
                .find(|(b, _)| b == l)
                .map_or(0.0, |(_, w)| *w)
        })
        .collect();

    let mut rec = Recording::zeros(rate, canonical_labels(), n);
    for ch in 0..EEG_LABELS.len() {
        let row = &mut rec.data[ch];
        for i in 0..n {
            let v = f64::from(parts.clean[ch][i])
                + blink_mixing[ch] * blink_waveform[i]
                + parts.noise[ch][i];
            row[i] = v as f32;
        }
    }

    let aux_cfg = CodecConfig::aux();
    let table = GazeCodeTable::default();
    let mut events = Vec::new();
    let mut gaze_labels = Vec::new();
    let mut segments = Vec::new();
    let mut t0 = 0.0;
    let aux1 = rec.channel_index(AUX_EVENT_LABEL).expect("canonical");
    let aux2 = rec.channel_index(AUX_GAZE_LABEL).expect("canonical");
    for (si, seg) in spec.directions.iter().enumerate() {
        let t1 = t0 + seg.duration_s;
        let code = (si % aux_cfg.codebook.len()) as u32;
        let burst = scaled(encode_burst(aux_cfg.frequency(code)?, &aux_cfg)?);
        if inject_at(&mut rec.data[aux1], samples(t0, rate), &burst).is_ok() {
            events.push(EventMarker {
                code,
                onset_s: t0,
                source: EventSource::Script,
                raw_receive_time_ns: None,
            });
        }
        let direction = seg.label.direction();
        if direction.is_known() {
            let code = scaled(encode_gaze(direction, &table, rate)?);
            // a code that does not fit before the end is simply omitted
            let _ = inject_at(&mut rec.data[aux2], samples(t0, rate), &code);
        }
        gaze_labels.push(GazeInterval {
            t0_s: t0,
            t1_s: t1.min(n as f64 / rate),
            direction,
        });
        segments.push((t0, t1, seg.label.name()));
        t0 = t1;
    }

    let window_labels = (0..(n as f64 / rate).floor() as usize)
        .map(|w| {
            let mid = w as f64 + 0.5;
            segments
                .iter()
                .find(|(a, b, _)| mid >= *a && mid < *b)
                .map_or_else(String::new, |s| s.2.clone())
        })
        .collect();

    let session = Session {
        recording: rec,
        events,
        gaze_labels,
        info: SessionInfo {
            subject: spec.subject.clone(),
            codec_digest: aux_cfg.digest(),
        },
    };
    let truth = GroundTruth {
        seed: spec.seed,
        sample_rate_hz: rate,
        eeg_labels: EEG_LABELS.iter().map(|s| s.to_string()).collect(),
        clean: parts.clean,
        noise: parts.noise,
        blink_times_s: blink_times,
        blink_template: template,
        blink_waveform_uv: blink_waveform,
        blink_mixing,
        band_loadings: parts.loadings.transpose().as_slice().to_vec(),
        mixing_condition: parts.condition,
        window_labels,
        segments,
    };
    Ok((session, truth))
}

fn scaled(code: Vec<f32>) -> Vec<f32> {
    code.into_iter()
        .map(|v| v * AUX_FULL_SCALE_UV as f32)
        .collect()
}

/// 19 EEG rows for a gaze schedule, used when a simulated recorder needs
/// brain signal under its markers.
pub fn eeg_for_gaze(
    base: &SynthSpec,
    gaze: &[GazeInterval],
    duration_s: f64,
) -> Result<Vec<Vec<f32>>> {
    let mut segments = Vec::new();
    let mut t = 0.0;
    for iv in gaze {
        if iv.t0_s > t {
            segments.push(Segment::novel(NOVEL_SIGNATURE, iv.t0_s - t));
        }
        let label = if iv.direction.is_known() {
            SegmentLabel::Direction(iv.direction)
        } else {
            SegmentLabel::Novel(NOVEL_SIGNATURE.into())
        };
        let end = iv.t1_s.min(duration_s);
        if end > iv.t0_s.max(t) {
            segments.push(Segment {
                label,
                duration_s: end - iv.t0_s.max(t),
            });
            t = end;
        }
    }
    if duration_s > t {
        segments.push(Segment::novel(NOVEL_SIGNATURE, duration_s - t));
    }
    let spec = base.clone().with_segments(segments);
    let (session, _) = gen_session(&spec)?;
    Ok(session.recording.data[..EEG_LABELS.len()].to_vec())
}

/// Writes `truth.json` and `clean.f32le` into `dir`.
pub fn save_truth(truth: &GroundTruth, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let json = serde_json::to_string(truth).map_err(|e| Error::json("ground truth", e))?;
    let p = dir.join("truth.json");
    fs::write(&p, json + "\n").map_err(|e| Error::io(format!("writing {}", p.display()), e))?;
    let p = dir.join("clean.f32le");
    fs::write(&p, encode_f32le(truth.clean.iter().flatten().copied()))
        .map_err(|e| Error::io(format!("writing {}", p.display()), e))
}

/// Reads what [`save_truth`] wrote; noise is not persisted and comes back empty.
pub fn load_truth(dir: &Path) -> Result<GroundTruth> {
    let p = dir.join("truth.json");
    let text =
        fs::read_to_string(&p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
    let mut truth: GroundTruth = serde_json::from_str(&text)
        .map_err(|e| Error::json(format!("parsing {}", p.display()), e))?;
    let p = dir.join("clean.f32le");
    let bytes = fs::read(&p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?;
    let c = truth.eeg_labels.len();
    let n = truth.blink_waveform_uv.len();
    if bytes.len() != 4 * c * n {
        return Err(Error::Mismatch(format!(
            "{} holds {} bytes, expected {}",
            p.display(),
            bytes.len(),
            4 * c * n
        )));
    }
    let flat = decode_f32le(&bytes);
    truth.clean = if n == 0 {
        vec![Vec::new(); c]
    } else {
        flat.chunks(n).map(<[f32]>::to_vec).collect()
    };
    Ok(truth)
}

/// Feature rows with exactly `f` planted common factors.
///
/// Variable `j` loads 0.85 on factor `j mod f` plus small cross loadings,
/// with unique noise making up unit variance. Rows cycle through the four
/// quadrants as labels.
pub fn planted_factors(
    n: usize,
    p: usize,
    f: usize,
    seed: u64,
) -> (DMatrix<f64>, Vec<GazeDirection>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut load = DMatrix::<f64>::zeros(p, f);
    for j in 0..p {
        for k in 0..f {
            load[(j, k)] = if k == j % f {
                0.85
            } else {
                rng.random_range(-0.05..0.05)
            };
        }
    }
    let unique: Vec<f64> = (0..p)
        .map(|j| (1.0 - load.row(j).norm_squared()).max(0.01).sqrt())
        .collect();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = DMatrix::zeros(n, p);
    for r in 0..n {
        let fac: Vec<f64> = (0..f).map(|_| normal.sample(&mut rng)).collect();
        for j in 0..p {
            let common: f64 = (0..f).map(|k| load[(j, k)] * fac[k]).sum();
            x[(r, j)] = 10.0 + 3.0 * (common + unique[j] * normal.sample(&mut rng));
        }
    }
    let labels = (0..n).map(|r| GazeDirection::QUADRANTS[r % 4]).collect();
    (x, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec::quadrants(seed, 5.0)
    }

    #[test]
    fn disabled_components_leave_clean_signal() {
        let spec = SynthSpec {
            blink_rate_per_min: 0.0,
            noise_rms_uv: 0.0,
            ..SynthSpec::quadrants(3, 4.0)
                .with_segments(vec![Segment::direction(GazeDirection::TopLeft, 4.0)])
        };
        let (s, t) = gen_session(&spec).unwrap();
        for ch in 0..19 {
            assert_eq!(s.recording.data[ch], t.clean[ch]);
        }
        assert!(t.blink_waveform_uv.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn default_shape() {
        let spec = SynthSpec::default();
        assert_eq!(spec.total_duration_s(), 240.0);
        let (s, t) = gen_session(&small(1)).unwrap();
        assert_eq!(s.recording.n_samples(), 4 * 5 * 500);
        assert_eq!(s.gaze_labels.len(), 4);
        assert_eq!(t.window_labels.len(), 20);
        assert!(s.structural_problems().is_empty());
        assert!(t.mixing_condition <= 10.0);
    }

    #[test]
    fn same_seed_same_bits() {
        let (a, ta) = gen_session(&small(9)).unwrap();
        let (b, tb) = gen_session(&small(9)).unwrap();
        assert_eq!(a.recording, b.recording);
        assert_eq!(ta, tb);
        let (c, _) = gen_session(&small(10)).unwrap();
        assert_ne!(a.recording, c.recording);
    }

    #[test]
    fn channels_are_the_sum_of_their_parts() {
        let (s, t) = gen_session(&small(4)).unwrap();
        for ch in 0..19 {
            for i in (0..s.recording.n_samples()).step_by(7) {
                let v = f64::from(t.clean[ch][i])
                    + t.blink_mixing[ch] * t.blink_waveform_uv[i]
                    + t.noise[ch][i];
                assert_eq!(s.recording.data[ch][i], v as f32);
            }
        }
    }

    #[test]
    fn blink_counts_and_template() {
        let (times, tpl) = gen_blink(15.0, 60.0, 500.0, 1);
        assert!((5..=30).contains(&times.len()), "{}", times.len());
        assert!(times
            .windows(2)
            .all(|w| w[1] - w[0] >= BLINK_MIN_SEPARATION_S));
        assert_eq!(tpl.iter().cloned().fold(f64::MIN, f64::max), 1.0);
        let mean = tpl.iter().sum::<f64>() / tpl.len() as f64;
        assert!(mean.abs() <= 0.2);
        assert!(gen_blink(15.0, 0.0, 500.0, 1).0.is_empty());
    }

    #[test]
    fn default_signatures_are_separated() {
        SynthSpec::default().validate().unwrap();
        let mut spec = SynthSpec::default();
        spec.signature_map
            .insert("TopLeft".into(), spec.signature_map["TopRight"].clone());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = SynthSpec::quadrants(1, 2.0).with_segments(vec![
            Segment::direction(GazeDirection::TopLeft, 2.0),
            Segment::novel("bottom", 1.0),
        ]);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(
            json.contains(r#"{"direction":"TopLeft","duration_s":2.0}"#),
            "{json}"
        );
        assert!(
            json.contains(r#"{"novel":"bottom","duration_s":1.0}"#),
            "{json}"
        );
        let back: SynthSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (_, t) = gen_session(&small(2)).unwrap();
        save_truth(&t, dir.path()).unwrap();
        let back = load_truth(dir.path()).unwrap();
        assert_eq!(back.clean, t.clean);
        assert_eq!(back.blink_waveform_uv, t.blink_waveform_uv);
    }
}
