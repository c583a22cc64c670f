use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{read_chunk, read_message, write_chunk, write_message, Message};
use super::{
    gaze_pairs, render_audio, EegSource, EventScript, GazeSwitch, Link, LinkModel, SilentEeg,
    SimClock, SynthEeg, TimeMode,
};
use crate::codec::{
    encode_burst, encode_gaze, samples, BurstDetector, CodecConfig, Detection, GazeCodeTable,
};
use crate::error::{Error, Result};
use crate::session::{
    canonical_labels, intervals_from_switches, EventMarker, EventSource, GazeDirection, Recording,
    Session, SessionInfo, AUX_EVENT_LABEL, AUX_FULL_SCALE_UV, AUX_GAZE_LABEL,
    DEFAULT_SAMPLE_RATE_HZ, EEG_LABELS,
};
use crate::synth::SynthSpec;

/// Ping sequence numbers live above event numbers so their delays differ.
const PING_SEQ_BASE: u64 = 1 << 40;
/// Virtual spacing between pings.
const PING_SPACING_NS: i64 = 1_000_000;

fn net(context: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::net(context, e)
}

/// Streams the rendered script as framed chunks, paced by the clock, then
/// the end marker. Returns the number of samples sent.
pub fn run_producer<W: Write>(
    script: &EventScript,
    cfg: &CodecConfig,
    out: W,
    clock: &SimClock,
    chunk_samples: usize,
) -> Result<u64> {
    if chunk_samples == 0 {
        return Err(Error::InvalidConfig("chunk size must be positive".into()));
    }
    let audio = render_audio(script, cfg)?;
    let mut out = BufWriter::new(out);
    let mut sent = 0u64;
    for chunk in audio.chunks(chunk_samples) {
        let end_ns = ((sent + chunk.len() as u64) as f64 / cfg.sample_rate_hz * 1e9) as i64;
        clock.wait_until(end_ns);
        write_chunk(&mut out, chunk)?;
        out.flush().map_err(net("sending samples"))?;
        sent += chunk.len() as u64;
    }
    write_chunk(&mut out, &[])?;
    out.flush().map_err(net("sending end marker"))?;
    Ok(sent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStats {
    pub samples: u64,
    pub detections: Vec<Detection>,
    /// Wall seconds spent inside the detector.
    pub busy_s: f64,
}

/// Decodes framed samples and sends one event message per detection.
///
/// The message carries the burst onset in stream time and the send time;
/// in virtual mode the send time is the stream time of confirmation.
pub fn run_decoder<R: Read, W: Write>(
    input: R,
    output: W,
    cfg: &CodecConfig,
    link: &Link,
) -> Result<DecoderStats> {
    let mut det = BurstDetector::new(cfg)?;
    let mut input = BufReader::new(input);
    let mut output = BufWriter::new(output);
    let mut stats = DecoderStats {
        samples: 0,
        detections: Vec::new(),
        busy_s: 0.0,
    };
    loop {
        let chunk = read_chunk(&mut input)?;
        if chunk.is_empty() {
            break;
        }
        stats.samples += chunk.len() as u64;
        let t = Instant::now();
        let found = det.push(&chunk);
        stats.busy_s += t.elapsed().as_secs_f64();
        for d in found {
            let seq = stats.detections.len() as u64;
            let t_send_ns = match link.clock.mode {
                TimeMode::Virtual => (d.detected_at_s * 1e9).round() as i64,
                TimeMode::Wall => link.clock.now_ns(),
            };
            link.before_send(seq);
            write_message(
                &mut output,
                &Message::Event {
                    code: d.code,
                    t_stream_s: d.onset_s,
                    t_send_ns,
                },
            )?;
            stats.detections.push(d);
        }
    }
    output.flush().map_err(net("flushing events"))?;
    Ok(stats)
}

/// Answers pings until the peer closes. Returns the number answered.
pub fn run_echo(stream: TcpStream, link: &Link) -> Result<usize> {
    let mut reader = BufReader::new(stream.try_clone().map_err(net("cloning echo socket"))?);
    let mut writer = stream;
    let mut i = 0u64;
    while let Some(msg) = read_message(&mut reader)? {
        let Message::Ping { t_send_ns } = msg else {
            return Err(Error::Protocol(format!("echo responder got {msg:?}")));
        };
        let t_echo_ns = link.arrival_ns(PING_SEQ_BASE + 2 * i, t_send_ns);
        link.before_send(PING_SEQ_BASE + 2 * i + 1);
        write_message(&mut writer, &Message::Pong { t_echo_ns })?;
        i += 1;
    }
    Ok(i as usize)
}

fn median(mut v: Vec<i64>) -> i64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2
    }
}

/// Median over `n_pings` of half the ping round trip, in simulated ns.
pub fn estimate_link_delay(
    stream: TcpStream,
    n_pings: usize,
    link: &Link,
    deadline: Duration,
) -> Result<i64> {
    if n_pings == 0 {
        return Err(Error::InvalidConfig("need at least one ping".into()));
    }
    stream
        .set_read_timeout(Some(deadline))
        .map_err(net("setting ping deadline"))?;
    stream
        .set_nodelay(true)
        .map_err(net("configuring ping socket"))?;
    let mut reader = BufReader::new(stream.try_clone().map_err(net("cloning ping socket"))?);
    let mut writer = stream;
    let mut halves = Vec::with_capacity(n_pings);
    for i in 0..n_pings as u64 {
        let t_send_ns = match link.clock.mode {
            TimeMode::Virtual => i as i64 * PING_SPACING_NS,
            TimeMode::Wall => link.clock.now_ns(),
        };
        link.before_send(PING_SEQ_BASE + 2 * i);
        write_message(&mut writer, &Message::Ping { t_send_ns })?;
        let reply = read_message(&mut reader)?
            .ok_or_else(|| Error::Protocol("echo responder closed the link".into()))?;
        let Message::Pong { t_echo_ns } = reply else {
            return Err(Error::Protocol(format!("expected pong, got {reply:?}")));
        };
        let arrival = link.arrival_ns(PING_SEQ_BASE + 2 * i + 1, t_echo_ns);
        halves.push(((arrival - t_send_ns) / 2).max(0));
    }
    Ok(median(halves))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecorderConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Subtracted from every arrival time.
    pub delay_estimate_ns: i64,
    pub gaze: Vec<(f64, GazeDirection)>,
    /// Codec for AUX1 bursts.
    pub aux: CodecConfig,
    pub gaze_table: GazeCodeTable,
    pub subject: String,
    pub start_time_ns: i64,
}

impl RecorderConfig {
    pub fn new(duration_s: f64, delay_estimate_ns: i64, gaze: Vec<(f64, GazeDirection)>) -> Self {
        RecorderConfig {
            duration_s,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            delay_estimate_ns,
            gaze,
            aux: CodecConfig::aux(),
            gaze_table: GazeCodeTable::default(),
            subject: "simulated".into(),
            start_time_ns: 0,
        }
    }
}

/// The recorder's event log; the single writer of the session.
#[derive(Debug, Clone)]
pub struct RecorderState {
    pub cfg: RecorderConfig,
    pub events: Vec<EventMarker>,
    pub diagnostics: Vec<String>,
}

impl RecorderState {
    pub fn new(cfg: RecorderConfig) -> Result<Self> {
        cfg.aux.validate()?;
        cfg.gaze_table.validate(cfg.sample_rate_hz)?;
        if !(cfg.duration_s > 0.0) {
            return Err(Error::InvalidConfig(
                "recording duration must be positive".into(),
            ));
        }
        Ok(RecorderState {
            cfg,
            events: Vec::new(),
            diagnostics: Vec::new(),
        })
    }

    /// Records one event message that arrived at `arrival_ns`.
    ///
    /// The onset removes the estimated link delay and the decoder's own lag
    /// between burst onset and send time.
    pub fn on_message(&mut self, msg: &Message, arrival_ns: i64) -> Result<()> {
        let &Message::Event {
            code,
            t_stream_s,
            t_send_ns,
        } = msg
        else {
            return Err(Error::Protocol(format!(
                "recorder expected an event, got {msg:?}"
            )));
        };
        if !self.cfg.aux.codebook.contains_key(&code) {
            return Err(Error::UnknownCode(code));
        }
        let decode_lag_ns = t_send_ns - (t_stream_s * 1e9).round() as i64;
        let mut onset_ns = arrival_ns - self.cfg.delay_estimate_ns - decode_lag_ns;
        if onset_ns < 0 {
            let m = format!(
                "event code {code} compensated to {onset_ns} ns before start; clamped to 0"
            );
            log::warn!("{m}");
            self.diagnostics.push(m);
            onset_ns = 0;
        }
        self.events.push(EventMarker {
            code,
            onset_s: onset_ns as f64 / 1e9,
            source: EventSource::Network,
            raw_receive_time_ns: Some(arrival_ns),
        });
        Ok(())
    }

    /// Assembles the 21-channel session.
    pub fn finish(mut self, eeg: &mut dyn EegSource) -> Result<(Session, Vec<String>)> {
        let rate = self.cfg.sample_rate_hz;
        let n = samples(self.cfg.duration_s, rate);
        let gaze_labels = intervals_from_switches(&self.cfg.gaze, self.cfg.duration_s);
        let mut data = eeg.render(n, rate, &gaze_labels)?;
        if data.len() != EEG_LABELS.len() || data.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: EEG_LABELS.len(),
                found: data.len(),
            });
        }
        data.push(vec![0.0; n]);
        data.push(vec![0.0; n]);
        let mut rec = Recording::new(rate, canonical_labels(), data);
        rec.start_time_ns = self.cfg.start_time_ns;
        let aux1 = rec.channel_index(AUX_EVENT_LABEL).expect("canonical");
        let aux2 = rec.channel_index(AUX_GAZE_LABEL).expect("canonical");

        self.events.sort_by(|a, b| a.onset_s.total_cmp(&b.onset_s));
        for e in &self.events {
            let burst = encode_burst(self.cfg.aux.frequency(e.code)?, &self.cfg.aux)?;
            if !write_clipped(&mut rec.data[aux1], samples(e.onset_s, rate), &burst) {
                self.diagnostics.push(format!(
                    "AUX1 burst for code {} at {} s clipped at the end",
                    e.code, e.onset_s
                ));
            }
        }
        for &(t, d) in &self.cfg.gaze {
            if !d.is_known() {
                continue;
            }
            let code = encode_gaze(d, &self.cfg.gaze_table, rate)?;
            if !write_clipped(&mut rec.data[aux2], samples(t, rate), &code) {
                self.diagnostics
                    .push(format!("AUX2 gaze code {d} at {t} s clipped at the end"));
            }
        }
        let session = Session {
            recording: rec,
            events: self.events,
            gaze_labels,
            info: SessionInfo {
                subject: self.cfg.subject.clone(),
                codec_digest: self.cfg.aux.digest(),
            },
        };
        Ok((session, self.diagnostics))
    }
}

/// Adds the scaled pulse at `start`, dropping what runs past the end.
/// Returns false when anything was dropped.
fn write_clipped(row: &mut [f32], start: usize, pulse: &[f32]) -> bool {
    let scale = AUX_FULL_SCALE_UV as f32;
    for (dst, &v) in row.iter_mut().skip(start).zip(pulse) {
        *dst += v * scale;
    }
    start + pulse.len() <= row.len()
}

/// Reads event messages until the decoder closes the link.
pub fn run_recorder<R: Read>(input: R, state: &mut RecorderState, link: &Link) -> Result<usize> {
    let mut reader = BufReader::new(input);
    let mut seq = 0u64;
    while let Some(msg) = read_message(&mut reader)? {
        let sent = match msg {
            Message::Event { t_send_ns, .. } => t_send_ns,
            other => {
                return Err(Error::Protocol(format!(
                    "recorder expected an event, got {other:?}"
                )))
            }
        };
        let arrival = link.arrival_ns(seq, sent);
        state.on_message(&msg, arrival)?;
        seq += 1;
    }
    Ok(seq as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compensation {
    Off,
    /// Median ping estimate.
    Measured,
    Fixed(i64),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub script: EventScript,
    pub gaze: Vec<GazeSwitch>,
    pub codec: CodecConfig,
    pub mode: TimeMode,
    pub compress: f64,
    pub link: LinkModel,
    pub compensation: Compensation,
    pub n_pings: usize,
    pub chunk_samples: usize,
    /// `None` records flat EEG.
    pub eeg: Option<SynthSpec>,
    pub subject: String,
    pub start_time_ns: i64,
    pub timeout: Duration,
}

impl SimOptions {
    pub fn new(script: EventScript) -> Self {
        SimOptions {
            script,
            gaze: Vec::new(),
            codec: CodecConfig::audio(),
            mode: TimeMode::Virtual,
            compress: 100.0,
            link: LinkModel::default(),
            compensation: Compensation::Measured,
            n_pings: 9,
            chunk_samples: 441,
            eeg: None,
            subject: "simulated".into(),
            start_time_ns: 0,
            timeout: Duration::from_secs(30),
        }
    }

    fn recorder_config(&self, delay_estimate_ns: i64) -> RecorderConfig {
        RecorderConfig {
            subject: self.subject.clone(),
            start_time_ns: self.start_time_ns,
            ..RecorderConfig::new(
                self.script.total_duration_s,
                delay_estimate_ns,
                gaze_pairs(&self.gaze),
            )
        }
    }

    fn eeg_source(&self) -> Box<dyn EegSource> {
        match &self.eeg {
            Some(spec) => Box::new(SynthEeg { base: spec.clone() }),
            None => Box::new(SilentEeg),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub session: Session,
    pub delay_estimate_ns: i64,
    pub decoder: DecoderStats,
    pub diagnostics: Vec<String>,
    pub wall_time_s: f64,
}

fn bind() -> Result<(TcpListener, SocketAddr)> {
    let l = TcpListener::bind("127.0.0.1:0").map_err(net("binding a local port"))?;
    let a = l.local_addr().map_err(net("reading the bound address"))?;
    Ok((l, a))
}

fn accept(l: &TcpListener, timeout: Duration) -> Result<TcpStream> {
    l.set_nonblocking(true)
        .map_err(net("configuring listener"))?;
    let start = Instant::now();
    loop {
        match l.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)
                    .map_err(net("configuring socket"))?;
                s.set_nodelay(true).map_err(net("configuring socket"))?;
                return Ok(s);
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if start.elapsed() > timeout {
                    return Err(Error::Timeout("waiting for a peer to connect".into()));
                }
                thread::sleep(Duration::from_millis(1));
            }
            Err(e) => return Err(Error::net("accepting a connection", e)),
        }
    }
}

fn connect(addr: SocketAddr) -> Result<TcpStream> {
    let s = TcpStream::connect(addr).map_err(net("connecting"))?;
    s.set_nodelay(true).map_err(net("configuring socket"))?;
    Ok(s)
}

fn joined<T>(h: thread::ScopedJoinHandle<'_, Result<T>>, role: &str) -> Result<T> {
    h.join()
        .unwrap_or_else(|_| Err(Error::Protocol(format!("{role} thread panicked"))))
}

/// Runs producer, decoder, echo responder and recorder as concurrent roles
/// over loopback TCP.
pub fn simulate(opts: &SimOptions) -> Result<SimReport> {
    let started = Instant::now();
    opts.script.validate(&opts.codec)?;
    let mut eeg = opts.eeg_source();

    let delay_estimate_ns = match opts.compensation {
        Compensation::Off => 0,
        Compensation::Fixed(ns) => ns,
        Compensation::Measured => {
            let link = Link {
                clock: SimClock::new(opts.mode, opts.compress)?,
                model: opts.link,
            };
            let (echo_l, echo_addr) = bind()?;
            thread::scope(|s| {
                let echo = s.spawn(|| run_echo(accept(&echo_l, opts.timeout)?, &link));
                let est = connect(echo_addr)
                    .and_then(|st| estimate_link_delay(st, opts.n_pings, &link, opts.timeout));
                // the responder stops when the pinger's socket closes
                let answered = joined(echo, "echo");
                let est = est?;
                answered?;
                Ok::<_, Error>(est)
            })?
        }
    };

    // the stream clock starts after the ping phase
    let link = Link {
        clock: SimClock::new(opts.mode, opts.compress)?,
        model: opts.link,
    };
    let (sample_l, sample_addr) = bind()?;
    let (event_l, event_addr) = bind()?;
    let mut state = RecorderState::new(opts.recorder_config(delay_estimate_ns))?;
    let decoder = thread::scope(|s| {
        let producer = s.spawn(|| {
            let st = connect(sample_addr)?;
            run_producer(
                &opts.script,
                &opts.codec,
                st,
                &link.clock,
                opts.chunk_samples,
            )
        });
        let decoder = s.spawn(|| {
            let input = accept(&sample_l, opts.timeout)?;
            let output = connect(event_addr)?;
            let stats = run_decoder(input, &output, &opts.codec, &link)?;
            output
                .shutdown(std::net::Shutdown::Write)
                .map_err(net("closing event link"))?;
            Ok(stats)
        });
        let recorded = accept(&event_l, opts.timeout).and_then(|st| {
            st.set_read_timeout(Some(opts.timeout))
                .map_err(net("setting recorder deadline"))?;
            run_recorder(st, &mut state, &link)
        });
        let sent = joined(producer, "producer");
        let decoded = joined(decoder, "decoder");
        sent?;
        let stats = decoded?;
        recorded?;
        Ok::<_, Error>(stats)
    })?;
    let (session, diagnostics) = state.finish(eeg.as_mut())?;
    Ok(SimReport {
        session,
        delay_estimate_ns,
        decoder,
        diagnostics,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// The same pipeline stepped cooperatively on one thread, without sockets.
/// Only virtual time is supported, since nothing here waits.
pub fn simulate_in_process(opts: &SimOptions) -> Result<SimReport> {
    let started = Instant::now();
    if opts.mode != TimeMode::Virtual {
        return Err(Error::InvalidConfig(
            "in-process simulation runs in virtual time only".into(),
        ));
    }
    let link = Link {
        clock: SimClock::new(TimeMode::Virtual, f64::INFINITY)?,
        model: opts.link,
    };
    let delay_estimate_ns = match opts.compensation {
        Compensation::Off => 0,
        Compensation::Fixed(ns) => ns,
        Compensation::Measured => {
            if opts.n_pings == 0 {
                return Err(Error::InvalidConfig("need at least one ping".into()));
            }
            median(
                (0..opts.n_pings as u64)
                    .map(|i| {
                        let sent = i as i64 * PING_SPACING_NS;
                        let echo = link.arrival_ns(PING_SEQ_BASE + 2 * i, sent);
                        (link.arrival_ns(PING_SEQ_BASE + 2 * i + 1, echo) - sent) / 2
                    })
                    .collect(),
            )
        }
    };
    let audio = render_audio(&opts.script, &opts.codec)?;
    let mut det = BurstDetector::new(&opts.codec)?;
    let mut state = RecorderState::new(opts.recorder_config(delay_estimate_ns))?;
    let mut stats = DecoderStats {
        samples: 0,
        detections: Vec::new(),
        busy_s: 0.0,
    };
    for chunk in audio.chunks(opts.chunk_samples.max(1)) {
        stats.samples += chunk.len() as u64;
        let t = Instant::now();
        let found = det.push(chunk);
        stats.busy_s += t.elapsed().as_secs_f64();
        for d in found {
            let seq = stats.detections.len() as u64;
            let t_send_ns = (d.detected_at_s * 1e9).round() as i64;
            let msg = Message::Event {
                code: d.code,
                t_stream_s: d.onset_s,
                t_send_ns,
            };
            state.on_message(&msg, link.arrival_ns(seq, t_send_ns))?;
            stats.detections.push(d);
        }
    }
    let mut eeg = opts.eeg_source();
    let (session, diagnostics) = state.finish(eeg.as_mut())?;
    Ok(SimReport {
        session,
        delay_estimate_ns,
        decoder: stats,
        diagnostics,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::ScriptEvent;
    use crate::codec::{decode_gaze, detect_bursts};

    fn script(events: &[(f64, u32)], total: f64) -> EventScript {
        EventScript {
            events: events
                .iter()
                .map(|&(onset_s, code)| ScriptEvent { onset_s, code })
                .collect(),
            total_duration_s: total,
        }
    }

    fn virtual_link(delay_ns: u64) -> Link {
        Link {
            clock: SimClock::new(TimeMode::Virtual, f64::INFINITY).unwrap(),
            model: LinkModel::fixed(delay_ns),
        }
    }

    fn produce(s: &EventScript) -> Vec<f32> {
        let mut buf = Vec::new();
        let clock = SimClock::new(TimeMode::Virtual, f64::INFINITY).unwrap();
        run_producer(s, &CodecConfig::audio(), &mut buf, &clock, 441).unwrap();
        let mut r = std::io::Cursor::new(buf);
        let mut out = Vec::new();
        loop {
            let c = read_chunk(&mut r).unwrap();
            if c.is_empty() {
                return out;
            }
            out.extend(c);
        }
    }

    #[test]
    fn empty_script_streams_silence() {
        let audio = produce(&script(&[], 1.0));
        assert_eq!(audio.len(), 44_100);
        assert!(audio.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn produced_stream_decodes() {
        let audio = produce(&script(&[(0.5, 4)], 1.0));
        let d = detect_bursts(&audio, &CodecConfig::audio()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, 4);
        assert!((d[0].onset_s - 0.5).abs() <= 0.005);
    }

    #[test]
    fn compression_keeps_content() {
        let s = EventScript::random(20, 8, 0.3, 0.6, 1);
        let mut paced = Vec::new();
        let clock = SimClock::new(TimeMode::Wall, 100.0).unwrap();
        let t = Instant::now();
        run_producer(&s, &CodecConfig::audio(), &mut paced, &clock, 441).unwrap();
        let wall = t.elapsed().as_secs_f64();
        assert!(wall <= 1.5 * s.total_duration_s / 100.0 + 0.05, "{wall}");
        let mut fast = Vec::new();
        let clock = SimClock::new(TimeMode::Virtual, f64::INFINITY).unwrap();
        run_producer(&s, &CodecConfig::audio(), &mut fast, &clock, 441).unwrap();
        assert_eq!(paced, fast);
    }

    #[test]
    fn decoder_emits_one_message_per_event() {
        let s = script(&[(0.2, 1), (0.6, 5), (1.1, 7)], 1.5);
        let mut framed = Vec::new();
        let clock = SimClock::new(TimeMode::Virtual, f64::INFINITY).unwrap();
        run_producer(&s, &CodecConfig::audio(), &mut framed, &clock, 1000).unwrap();
        let mut out = Vec::new();
        let stats = run_decoder(
            &framed[..],
            &mut out,
            &CodecConfig::audio(),
            &virtual_link(0),
        )
        .unwrap();
        assert_eq!(stats.samples, 66_150);
        let mut r = std::io::Cursor::new(out);
        let mut codes = Vec::new();
        while let Some(Message::Event {
            code,
            t_stream_s,
            t_send_ns,
        }) = read_message(&mut r).unwrap()
        {
            let lag = t_send_ns as f64 / 1e9 - t_stream_s;
            assert!(lag >= 0.0 && lag <= 0.025 + 1000.0 / 44_100.0, "{lag}");
            codes.push(code);
        }
        assert_eq!(codes, vec![1, 5, 7]);
    }

    #[test]
    fn silent_stream_sends_nothing() {
        let mut framed = Vec::new();
        let clock = SimClock::new(TimeMode::Virtual, f64::INFINITY).unwrap();
        run_producer(
            &script(&[], 0.5),
            &CodecConfig::audio(),
            &mut framed,
            &clock,
            441,
        )
        .unwrap();
        let mut out = Vec::new();
        run_decoder(
            &framed[..],
            &mut out,
            &CodecConfig::audio(),
            &virtual_link(0),
        )
        .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn decoder_rejects_bad_framing() {
        let mut framed = 10u32.to_le_bytes().to_vec();
        framed.extend_from_slice(&[0u8; 8]);
        let r = run_decoder(
            &framed[..],
            Vec::new(),
            &CodecConfig::audio(),
            &virtual_link(0),
        );
        assert!(matches!(r, Err(Error::Protocol(_))));
    }

    fn ping_estimate(delay_ns: u64, mode: TimeMode, n: usize) -> i64 {
        let link = Link {
            clock: SimClock::new(mode, 1.0).unwrap(),
            model: LinkModel::fixed(delay_ns),
        };
        let (l, addr) = bind().unwrap();
        thread::scope(|s| {
            let echo =
                s.spawn(|| run_echo(accept(&l, Duration::from_secs(5)).unwrap(), &link).unwrap());
            let est = estimate_link_delay(connect(addr).unwrap(), n, &link, Duration::from_secs(5))
                .unwrap();
            assert_eq!(echo.join().unwrap(), n);
            est
        })
    }

    #[test]
    fn loopback_delay_is_small() {
        let est = ping_estimate(0, TimeMode::Wall, 9);
        assert!((0..5_000_000).contains(&est), "{est}");
    }

    #[test]
    fn injected_delay_is_measured() {
        let est = ping_estimate(10_000_000, TimeMode::Wall, 5);
        assert!((9_000_000..=11_000_000).contains(&est), "{est}");
        assert_eq!(ping_estimate(10_000_000, TimeMode::Virtual, 1), 10_000_000);
    }

    #[test]
    fn ping_deadline() {
        let (l, addr) = bind().unwrap();
        let link = virtual_link(0);
        let st = connect(addr).unwrap();
        let _held = accept(&l, Duration::from_secs(5)).unwrap();
        let r = estimate_link_delay(st, 1, &link, Duration::from_millis(50));
        assert!(matches!(r, Err(Error::Timeout(_))), "{r:?}");
    }

    #[test]
    fn recorder_clamps_early_events() {
        let mut st = RecorderState::new(RecorderConfig::new(1.0, 50_000_000, vec![])).unwrap();
        let msg = Message::Event {
            code: 0,
            t_stream_s: 0.0,
            t_send_ns: 0,
        };
        st.on_message(&msg, 10_000_000).unwrap();
        assert_eq!(st.events[0].onset_s, 0.0);
        assert_eq!(st.diagnostics.len(), 1);
        assert!(matches!(
            st.on_message(&Message::Ping { t_send_ns: 0 }, 0),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn no_events_leaves_aux1_silent() {
        let st = RecorderState::new(RecorderConfig::new(1.0, 0, vec![])).unwrap();
        let (s, _) = st.finish(&mut SilentEeg).unwrap();
        assert!(s
            .recording
            .channel(AUX_EVENT_LABEL)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(s.recording.n_samples(), 500);
    }

    #[test]
    fn recorder_writes_gaze_codes() {
        let gaze = vec![
            (0.5, GazeDirection::TopLeft),
            (1.5, GazeDirection::BottomRight),
            (2.5, GazeDirection::TopRight),
            (3.5, GazeDirection::BottomLeft),
        ];
        let st = RecorderState::new(RecorderConfig::new(5.0, 0, gaze.clone())).unwrap();
        let (s, diags) = st.finish(&mut SilentEeg).unwrap();
        assert!(diags.is_empty());
        let aux2: Vec<f32> = s
            .recording
            .channel(AUX_GAZE_LABEL)
            .unwrap()
            .iter()
            .map(|v| v / AUX_FULL_SCALE_UV as f32)
            .collect();
        let dec = decode_gaze(&aux2, &GazeCodeTable::default(), 500.0).unwrap();
        let dirs: Vec<_> = dec.codes.iter().map(|c| c.0).collect();
        assert_eq!(dirs, gaze.iter().map(|g| g.1).collect::<Vec<_>>());
        for (got, want) in dec.codes.iter().zip(&gaze) {
            assert!((got.1 - want.0).abs() <= 0.01);
        }
        assert_eq!(s.gaze_labels.len(), 4);
    }

    #[test]
    fn one_event_end_to_end_within_six_ms() {
        let opts = SimOptions::new(script(&[(0.5, 3)], 1.0));
        let r = simulate(&opts).unwrap();
        assert_eq!(r.session.events.len(), 1);
        assert_eq!(r.session.events[0].code, 3);
        assert!((r.session.events[0].onset_s - 0.5).abs() <= 0.006);
    }

    #[test]
    fn sockets_and_single_thread_agree() {
        let mut opts = SimOptions::new(EventScript::random(15, 8, 0.3, 0.6, 9));
        opts.link = LinkModel {
            one_way_delay_ns: 20_000_000,
            jitter_ns: 2_000_000,
            seed: 4,
        };
        opts.compress = f64::INFINITY;
        let a = simulate(&opts).unwrap();
        let b = simulate_in_process(&opts).unwrap();
        assert_eq!(a.delay_estimate_ns, b.delay_estimate_ns);
        assert_eq!(a.session, b.session);
        assert_eq!(a.decoder.detections, b.decoder.detections);
    }
}
