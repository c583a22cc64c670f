//! The `gazetrace` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use gazetrace::acquisition::{
    latency_report, simulate, Compensation, EventScript, GazeSwitch, LinkModel, SimOptions, TimeMode,
};
use gazetrace::codec::{
    decode_gaze, detect_bursts, read_codebook, read_stream, CodecConfig, GazeCodeTable,
};
use gazetrace::factor::{
    centroid_csv, classify, eigenvalue_csv, fit_factor_model, interval_features, recording_features,
    score_report, stack_labelled, FactorModel, FeatureConfig, FitOptions,
};
use gazetrace::preprocess::{clean_recording, CleanConfig, IcaConfig};
use gazetrace::session::{
    load_session, save_session, DataEncoding, GazeDirection, AUX_EVENT_LABEL, AUX_FULL_SCALE_UV,
    AUX_GAZE_LABEL,
};
use gazetrace::synth::{gen_session, save_truth, SynthSpec};
use gazetrace::ErrorClass;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExitStatus(pub i32);

impl ExitStatus {
    pub const SUCCESS: ExitStatus = ExitStatus(0);
    pub const USAGE: ExitStatus = ExitStatus(1);
    pub const DATA: ExitStatus = ExitStatus(2);
    pub const RUNTIME: ExitStatus = ExitStatus(3);
}

/// A failed command with its exit class.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    pub fn status(&self) -> ExitStatus {
        match self {
            Failure::Usage(_) => ExitStatus::USAGE,
            Failure::Data(_) => ExitStatus::DATA,
            Failure::Runtime(_) => ExitStatus::RUNTIME,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<gazetrace::Error> for Failure {
    fn from(e: gazetrace::Error) -> Self {
        let msg = e.to_string();
        match e.class() {
            ErrorClass::Data => Failure::Data(msg),
            ErrorClass::Io | ErrorClass::Network => Failure::Runtime(msg),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "gazetrace", version, about = "Tone-marker synchronized EEG sessions and gaze classification")]
struct Cli {
    /// Seed for every random choice a command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write 0 as the manifest start time so outputs are byte-reproducible.
    #[arg(long, global = true)]
    fixed_time: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the producer, decoder and recorder over loopback sockets.
    Simulate(SimulateArgs),
    /// Generate a synthetic session with ground truth.
    Synth(SynthArgs),
    /// Decode marker bursts from an audio stream or a session's aux channels.
    Detect(DetectArgs),
    /// Band-pass and remove artifact components.
    Clean(CleanArgs),
    /// Fit a factor model to labelled sessions.
    Train(TrainArgs),
    /// Classify a session's gaze intervals.
    Classify(ClassifyArgs),
    /// Write eigenvalue and centroid tables.
    Report(ReportArgs),
    /// Compare recorded event onsets with their script.
    Latency(LatencyArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Event script JSON: {events: [{onset_s, code}], total_duration_s}.
    #[arg(long)]
    script: PathBuf,
    /// JSON array of {t_s, direction} switch points.
    #[arg(long)]
    gaze: Option<PathBuf>,
    /// Session directory to write.
    #[arg(long)]
    out: PathBuf,
    /// Simulated seconds per wall second.
    #[arg(long, default_value_t = 100.0)]
    compress: f64,
    /// Artificial one-way link delay.
    #[arg(long, default_value_t = 0.0)]
    delay_ms: f64,
    /// Uniform extra delay per message, up to this much.
    #[arg(long, default_value_t = 0.0)]
    jitter_ms: f64,
    /// Use the scaled wall clock instead of virtual time.
    #[arg(long)]
    wall_clock: bool,
    /// Do not subtract the measured link delay.
    #[arg(long)]
    no_compensation: bool,
    /// Record flat EEG instead of synthetic signal.
    #[arg(long)]
    flat_eeg: bool,
    /// Round-trip pings whose median sets the delay estimate.
    #[arg(long, default_value_t = 9)]
    pings: usize,
    /// Write data.csv instead of data.f32le.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// SynthSpec JSON; defaults to four 60 s quadrant segments.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Session directory to write, ground truth included.
    #[arg(long)]
    out: PathBuf,
    /// Write data.csv instead of data.f32le.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Raw f32le audio stream with its JSON sidecar.
    #[arg(long, conflicts_with = "session", required_unless_present = "session")]
    stream: Option<PathBuf>,
    /// Codebook JSON for `--stream`; defaults to the audio codebook.
    #[arg(long, requires = "stream")]
    codebook: Option<PathBuf>,
    /// Session directory whose AUX1 events and AUX2 gaze codes are decoded.
    #[arg(long)]
    session: Option<PathBuf>,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CleanArgs {
    /// Session directory to clean.
    #[arg(long = "in")]
    input: PathBuf,
    /// Cleaned session directory.
    #[arg(long)]
    out: PathBuf,
    /// Combined score above which a component is removed.
    #[arg(long, default_value_t = 0.6)]
    flag_threshold: f64,
    /// Components to remove, overriding automatic scoring.
    #[arg(long, value_delimiter = ',')]
    flag: Option<Vec<usize>>,
    /// Components to extract; one per EEG channel when absent.
    #[arg(long)]
    k: Option<usize>,
    /// Skip the band-pass stage.
    #[arg(long)]
    no_bandpass: bool,
    /// Report JSON; `<out>/clean_report.json` when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Labelled session directories.
    #[arg(long = "in", required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Components to retain; eigenvalue-above-one rule when absent.
    #[arg(long)]
    k: Option<usize>,
    /// Rejection distance; fitted from the training rows when absent.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Model JSON from `train`.
    #[arg(long)]
    model: PathBuf,
    /// Session directory to classify.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Model JSON from `train`.
    #[arg(long)]
    model: PathBuf,
    /// Eigenvalue CSV to write.
    #[arg(long)]
    eigenvalues: Option<PathBuf>,
    /// Centroid CSV to write.
    #[arg(long)]
    centroids: Option<PathBuf>,
    /// Subject column of the eigenvalue CSV.
    #[arg(long, default_value = "subject")]
    subject: String,
}

#[derive(Debug, Args)]
struct LatencyArgs {
    /// Recorded session directory.
    #[arg(long)]
    session: PathBuf,
    /// Event script the session was recorded from.
    #[arg(long)]
    script: PathBuf,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (without the program name), runs the command and reports
/// failures on stderr.
pub fn run<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("gazetrace")).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::USAGE } else { ExitStatus::SUCCESS };
        }
    };
    if cli.verbose {
        let _ = env_logger::Builder::new()
            .filter_level(log::LevelFilter::Info)
            .try_init();
    }
    match dispatch(&cli) {
        Ok(()) => ExitStatus::SUCCESS,
        Err(f) => {
            eprintln!("gazetrace: {}", f.message());
            f.status()
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let start_ns = if cli.fixed_time { 0 } else { unix_now_ns() };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.seed.unwrap_or(0), start_ns),
        Command::Synth(a) => cmd_synth(a, cli.seed, start_ns),
        Command::Detect(a) => cmd_detect(a),
        Command::Clean(a) => cmd_clean(a, cli.seed.unwrap_or(0)),
        Command::Train(a) => cmd_train(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Report(a) => cmd_report(a),
        Command::Latency(a) => cmd_latency(a),
    }
}

fn unix_now_ns() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos() as i64)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Data(format!("malformed {}: {e}", path.display())))
}

fn json_text<T: Serialize>(value: &T) -> std::result::Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(format!("serializing: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    let text = json_text(value)?;
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn encoding(csv: bool) -> DataEncoding {
    if csv {
        DataEncoding::Csv
    } else {
        DataEncoding::F32Le
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    delay_estimate_ns: i64,
    detections: usize,
    events_recorded: usize,
    diagnostics: Vec<String>,
}

fn cmd_simulate(a: &SimulateArgs, seed: u64, start_ns: i64) -> CmdResult {
    let script: EventScript = read_json(&a.script)?;
    let gaze: Vec<GazeSwitch> = match &a.gaze {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let ms = |v: f64, what: &str| {
        if v >= 0.0 && v.is_finite() {
            Ok((v * 1e6).round() as u64)
        } else {
            Err(Failure::Usage(format!("--{what} must be a non-negative number")))
        }
    };
    let mut opts = SimOptions::new(script);
    opts.gaze = gaze;
    opts.compress = a.compress;
    opts.mode = if a.wall_clock { TimeMode::Wall } else { TimeMode::Virtual };
    opts.link = LinkModel {
        one_way_delay_ns: ms(a.delay_ms, "delay-ms")?,
        jitter_ns: ms(a.jitter_ms, "jitter-ms")?,
        seed,
    };
    opts.compensation = if a.no_compensation {
        Compensation::Off
    } else {
        Compensation::Measured
    };
    opts.n_pings = a.pings;
    opts.eeg = (!a.flat_eeg).then(|| SynthSpec::quadrants(seed, 60.0));
    opts.start_time_ns = start_ns;
    opts.timeout = Duration::from_secs(60);
    let report = simulate(&opts)?;
    log::info!(
        "simulated {:.1} s in {:.2} s wall, link delay estimate {} ns",
        opts.script.total_duration_s,
        report.wall_time_s,
        report.delay_estimate_ns
    );
    save_session(&report.session, &a.out, encoding(a.csv))?;
    let summary = SimulateSummary {
        delay_estimate_ns: report.delay_estimate_ns,
        detections: report.decoder.detections.len(),
        events_recorded: report.session.events.len(),
        diagnostics: report.diagnostics,
    };
    write_text(&a.out.join("simulation.json"), &json_text(&summary)?)
}

fn cmd_synth(a: &SynthArgs, seed: Option<u64>, start_ns: i64) -> CmdResult {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let (mut session, truth) = gen_session(&spec)?;
    session.recording.start_time_ns = start_ns;
    save_session(&session, &a.out, encoding(a.csv))?;
    save_truth(&truth, &a.out)?;
    log::info!("wrote {} s of synthetic EEG to {}", spec.total_duration_s(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SessionDetections {
    events: Vec<gazetrace::codec::Detection>,
    gaze: Vec<(GazeDirection, f64)>,
    gaze_diagnostics: Vec<gazetrace::codec::GazeDiagnostic>,
}

fn cmd_detect(a: &DetectArgs) -> CmdResult {
    if let Some(path) = &a.stream {
        let (samples, meta) = read_stream(path)?;
        let mut cfg = CodecConfig::audio();
        if let Some(cb) = &a.codebook {
            cfg = cfg.with_codebook(read_codebook(cb)?);
        }
        cfg.sample_rate_hz = meta.sample_rate_hz;
        let found = detect_bursts(&samples, &cfg)?;
        return emit(&found, a.out.as_deref());
    }
    let dir = a.session.as_ref().expect("clap requires --stream or --session");
    let session = load_session(dir)?;
    let rec = &session.recording;
    let unscale = |label: &str| -> std::result::Result<Vec<f32>, Failure> {
        Ok(rec
            .channel(label)?
            .iter()
            .map(|v| v / AUX_FULL_SCALE_UV as f32)
            .collect())
    };
    let mut aux = CodecConfig::aux();
    aux.sample_rate_hz = rec.sample_rate_hz;
    let events = detect_bursts(&unscale(AUX_EVENT_LABEL)?, &aux)?;
    let gaze = decode_gaze(&unscale(AUX_GAZE_LABEL)?, &GazeCodeTable::default(), rec.sample_rate_hz)?;
    emit(
        &SessionDetections {
            events,
            gaze: gaze.codes,
            gaze_diagnostics: gaze.diagnostics,
        },
        a.out.as_deref(),
    )
}

fn cmd_clean(a: &CleanArgs, seed: u64) -> CmdResult {
    let session = load_session(&a.input)?;
    let cfg = CleanConfig {
        band_hz: (!a.no_bandpass).then_some((gazetrace::preprocess::DEFAULT_LO_HZ, gazetrace::preprocess::DEFAULT_HI_HZ)),
        k: a.k,
        ica: IcaConfig {
            seed,
            ..IcaConfig::default()
        },
        flag_threshold: a.flag_threshold,
        explicit_flags: a.flag.clone(),
        ..CleanConfig::default()
    };
    let (cleaned, report) = clean_recording(&session.recording, &cfg)?;
    log::info!("removed components {:?}", report.flagged);
    let out = gazetrace::session::Session {
        recording: cleaned,
        ..session
    };
    let encoding = read_json::<gazetrace::session::Manifest>(&a.input.join("manifest.json"))?.data_encoding;
    save_session(&out, &a.out, encoding)?;
    let report_path = a.report.clone().unwrap_or_else(|| a.out.join("clean_report.json"));
    write_text(&report_path, &json_text(&report)?)
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let cfg = FeatureConfig::default();
    let mut blocks = Vec::new();
    for dir in &a.input {
        let s = load_session(dir)?;
        let found = interval_features(&s.recording, &s.gaze_labels, &cfg)?;
        if found.is_empty() {
            return Err(Failure::Data(format!("{} has no labelled gaze intervals", dir.display())));
        }
        blocks.extend(found);
    }
    let (x, labels) = stack_labelled(&blocks)?;
    let model = fit_factor_model(&x, &labels, &cfg, &FitOptions { k: a.k, tau: a.tau })?;
    log::info!(
        "retained {} factors of {}, eigenvalues {:?}",
        model.retained_k,
        model.p(),
        model.eigenvalues
    );
    model.save(&a.out)?;
    Ok(())
}

#[derive(Serialize)]
struct IntervalResult {
    t0_s: f64,
    t1_s: f64,
    labelled: GazeDirection,
    predicted: GazeDirection,
    correct: bool,
    mean_score: Vec<f64>,
    min_distance: f64,
    distances: std::collections::BTreeMap<GazeDirection, f64>,
}

#[derive(Serialize)]
struct ClassifyReport {
    intervals: Vec<IntervalResult>,
    n_correct: usize,
    n_intervals: usize,
}

fn cmd_classify(a: &ClassifyArgs) -> CmdResult {
    let model = FactorModel::load(&a.model)?;
    let session = load_session(&a.input)?;
    let rec = &session.recording;
    let mut spans: Vec<(f64, f64, GazeDirection)> =
        session.gaze_labels.iter().map(|g| (g.t0_s, g.t1_s, g.direction)).collect();
    if spans.is_empty() {
        spans.push((0.0, rec.duration_s(), GazeDirection::Unknown));
    }
    let window_s = model.feature_config.window_len_samples as f64 / rec.sample_rate_hz;
    let mut intervals = Vec::new();
    for (t0, t1, labelled) in spans {
        if t1 - t0 < window_s {
            log::warn!("skipping interval [{t0}, {t1}) shorter than one feature window");
            continue;
        }
        let features = recording_features(&rec.slice(t0, t1), &model.feature_config)?;
        let r = classify(&model, &features)?;
        intervals.push(IntervalResult {
            t0_s: t0,
            t1_s: t1,
            labelled,
            predicted: r.direction,
            correct: r.direction == labelled,
            mean_score: r.mean_score,
            min_distance: r.min_distance,
            distances: r.distances,
        });
    }
    let report = ClassifyReport {
        n_correct: intervals.iter().filter(|i| i.correct).count(),
        n_intervals: intervals.len(),
        intervals,
    };
    emit(&report, a.report.as_deref())
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    let model = FactorModel::load(&a.model)?;
    if let Some(p) = &a.eigenvalues {
        write_text(p, &eigenvalue_csv(&model, &a.subject))?;
    }
    if let Some(p) = &a.centroids {
        write_text(p, &centroid_csv(&model))?;
    }
    print!("{}", score_report(&model));
    Ok(())
}

fn cmd_latency(a: &LatencyArgs) -> CmdResult {
    let session = load_session(&a.session)?;
    let script: EventScript = read_json(&a.script)?;
    let stats = latency_report(&session, &script)?;
    emit(&stats, a.out.as_deref())
}
