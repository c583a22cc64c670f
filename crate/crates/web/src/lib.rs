//! Browser bindings for three interactive demos: tone-marker round trip,
//! gaze-code round trip and blink removal on a synthetic session.
//!
//! Each demo has a plain Rust entry point returning a JSON value, which the
//! `#[wasm_bindgen]` wrappers serialize to a string for the page script.

use gazetrace::codec::{
    decode_gaze, detect_bursts, encode_burst, encode_gaze, inject_at, CodecConfig, GazeCodeTable,
};
use gazetrace::preprocess::{bandpass, clean_recording, CleanConfig};
use gazetrace::session::GazeDirection;
use gazetrace::synth::{gen_session, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Length of the audio clip the marker demo encodes into.
pub const MARKER_CLIP_S: f64 = 0.5;
/// Length of the aux clip the gaze demo encodes into.
pub const GAZE_CLIP_S: f64 = 1.0;
/// Upper bound on the blink demo's session length.
pub const MAX_BLINK_DEMO_S: f64 = 40.0;

/// Min/max pairs over `buckets` equal spans, for drawing long traces.
pub fn envelope(x: &[f32], buckets: usize) -> Vec<[f32; 2]> {
    if x.is_empty() || buckets == 0 {
        return Vec::new();
    }
    let buckets = buckets.min(x.len());
    (0..buckets)
        .map(|b| {
            let lo = b * x.len() / buckets;
            let hi = ((b + 1) * x.len() / buckets).max(lo + 1);
            x[lo..hi]
                .iter()
                .fold([f32::INFINITY, f32::NEG_INFINITY], |[mn, mx], &v| [mn.min(v), mx.max(v)])
        })
        .collect()
}

/// Encodes one audio marker at `onset_s` under white noise at `snr_db`,
/// then decodes the clip.
pub fn marker_round_trip(code: u32, onset_s: f64, snr_db: f64, seed: u64) -> Result<Value, String> {
    let cfg = CodecConfig::audio();
    let rate = cfg.sample_rate_hz;
    let burst = encode_burst(cfg.frequency(code).map_err(|e| e.to_string())?, &cfg)
        .map_err(|e| e.to_string())?;
    let n = (MARKER_CLIP_S * rate) as usize;
    let latest = MARKER_CLIP_S - cfg.burst_duration_s - 2.0 * cfg.detect_window_s;
    if !(0.0..=latest).contains(&onset_s) {
        return Err(format!("onset must lie in [0, {latest:.3}] s"));
    }
    let start = (onset_s * rate).round() as usize;
    let mut clip = vec![0.0f32; n];
    inject_at(&mut clip, start, &burst).map_err(|e| e.to_string())?;
    if snr_db.is_finite() {
        let power = burst.iter().map(|&v| f64::from(v).powi(2)).sum::<f64>() / burst.len() as f64;
        let sd = (power / 10f64.powf(snr_db / 10.0)).sqrt();
        let normal = Normal::new(0.0, sd).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut clip {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    let found = detect_bursts(&clip, &cfg).map_err(|e| e.to_string())?;
    Ok(json!({
        "sample_rate_hz": rate,
        "code": code,
        "frequency_hz": cfg.frequency(code).map_err(|e| e.to_string())?,
        "onset_s": start as f64 / rate,
        "burst_duration_s": cfg.burst_duration_s,
        "clip_s": MARKER_CLIP_S,
        "envelope": envelope(&clip, 600),
        "detections": found,
    }))
}

/// Writes a two-pulse gaze code onto an aux channel and decodes it.
pub fn gaze_round_trip(direction: &str, onset_s: f64) -> Result<Value, String> {
    let d = GazeDirection::parse(direction)
        .filter(|d| d.is_known())
        .ok_or_else(|| format!("unknown direction {direction:?}"))?;
    let rate = gazetrace::session::DEFAULT_SAMPLE_RATE_HZ;
    let table = GazeCodeTable::default();
    let code = encode_gaze(d, &table, rate).map_err(|e| e.to_string())?;
    let n = (GAZE_CLIP_S * rate) as usize;
    let latest = GAZE_CLIP_S - code.len() as f64 / rate;
    if !(0.0..=latest).contains(&onset_s) {
        return Err(format!("onset must lie in [0, {latest:.3}] s"));
    }
    let start = (onset_s * rate).round() as usize;
    let mut aux = vec![0.0f32; n];
    inject_at(&mut aux, start, &code).map_err(|e| e.to_string())?;
    let dec = decode_gaze(&aux, &table, rate).map_err(|e| e.to_string())?;
    Ok(json!({
        "sample_rate_hz": rate,
        "direction": d.name(),
        "onset_s": start as f64 / rate,
        "samples": aux,
        "decoded": dec.codes.iter().map(|(d, t)| json!({"direction": d.name(), "onset_s": t})).collect::<Vec<_>>(),
        "diagnostics": dec.diagnostics,
    }))
}

/// Generates a session, removes flagged components and returns the
/// frontal and occipital traces before and after cleaning.
pub fn blink_cleaning(seed: u64, seconds: f64) -> Result<Value, String> {
    if !(seconds >= 8.0 && seconds <= MAX_BLINK_DEMO_S) {
        return Err(format!("session length must lie in [8, {MAX_BLINK_DEMO_S}] s"));
    }
    let (session, truth) = gen_session(&SynthSpec::quadrants(seed, seconds / 4.0)).map_err(|e| e.to_string())?;
    let rec = &session.recording;
    let cfg = CleanConfig::default();
    let (lo, hi) = cfg.band_hz.expect("default band");
    let filtered = bandpass(rec, lo, hi).map_err(|e| e.to_string())?;
    let (cleaned, report) = clean_recording(rec, &cfg).map_err(|e| e.to_string())?;
    let trace = |r: &gazetrace::session::Recording, label: &str| -> Result<Vec<[f32; 2]>, String> {
        Ok(envelope(r.channel(label).map_err(|e| e.to_string())?, 800))
    };
    let mut traces = serde_json::Map::new();
    for label in ["Fp1", "Fp2", "O1", "O2"] {
        traces.insert(
            label.to_string(),
            json!({"before": trace(&filtered, label)?, "after": trace(&cleaned, label)?}),
        );
    }
    Ok(json!({
        "duration_s": rec.duration_s(),
        "blink_times_s": truth.blink_times_s,
        "traces": traces,
        "scores": report.scores,
        "flagged": report.flagged,
        "flag_threshold": report.flag_threshold,
        "converged": report.converged,
    }))
}

#[wasm_bindgen]
extern "C" {
    #[wasm_bindgen(js_namespace = console, js_name = error)]
    fn console_error(msg: &str);
}

/// Routes Rust panics to the browser console instead of an opaque trap.
#[wasm_bindgen(start)]
pub fn start() {
    std::panic::set_hook(Box::new(|info| console_error(&info.to_string())));
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// JSON result of [`marker_round_trip`]; pass a non-finite SNR for a
/// noise-free clip.
#[wasm_bindgen(js_name = markerRoundTrip)]
pub fn marker_round_trip_js(code: u32, onset_s: f64, snr_db: f64, seed: u32) -> Result<String, JsError> {
    to_js(marker_round_trip(code, onset_s, snr_db, u64::from(seed)))
}

#[wasm_bindgen(js_name = gazeRoundTrip)]
pub fn gaze_round_trip_js(direction: &str, onset_s: f64) -> Result<String, JsError> {
    to_js(gaze_round_trip(direction, onset_s))
}

#[wasm_bindgen(js_name = blinkCleaning)]
pub fn blink_cleaning_js(seed: u32, seconds: f64) -> Result<String, JsError> {
    to_js(blink_cleaning(u64::from(seed), seconds))
}
