use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted sample frame, in floats.
pub const MAX_CHUNK_SAMPLES: u32 = 1 << 24;

/// One newline-delimited JSON message on an event or echo link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Event {
        code: u32,
        t_stream_s: f64,
        t_send_ns: i64,
    },
    Ping {
        t_send_ns: i64,
    },
    Pong {
        t_echo_ns: i64,
    },
}

fn net(context: &str, e: io::Error) -> Error {
    if matches!(
        e.kind(),
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
    ) {
        Error::Timeout(context.to_string())
    } else {
        Error::net(context, e)
    }
}

pub fn write_message<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    let mut line = serde_json::to_string(msg).map_err(|e| Error::json("encoding message", e))?;
    line.push('\n');
    w.write_all(line.as_bytes())
        .map_err(|e| net("sending message", e))?;
    w.flush().map_err(|e| net("sending message", e))
}

/// Next message, or `None` at a clean end of stream.
pub fn read_message<R: BufRead>(r: &mut R) -> Result<Option<Message>> {
    let mut line = String::new();
    let n = r
        .read_line(&mut line)
        .map_err(|e| net("reading message", e))?;
    if n == 0 {
        return Ok(None);
    }
    if !line.ends_with('\n') {
        return Err(Error::Protocol(format!("truncated message {:?}", line)));
    }
    serde_json::from_str(line.trim_end())
        .map(Some)
        .map_err(|e| Error::Protocol(format!("malformed message {:?}: {e}", line.trim_end())))
}

/// Writes one length-prefixed frame; an empty chunk is the end marker.
pub fn write_chunk<W: Write>(w: &mut W, chunk: &[f32]) -> Result<()> {
    let len = u32::try_from(chunk.len())
        .ok()
        .filter(|&l| l <= MAX_CHUNK_SAMPLES)
        .ok_or_else(|| Error::Protocol(format!("chunk of {} samples too large", chunk.len())))?;
    let mut buf = Vec::with_capacity(4 + 4 * chunk.len());
    buf.extend_from_slice(&len.to_le_bytes());
    for v in chunk {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| net("sending samples", e))
}

/// Next frame; an empty vector is the end marker.
pub fn read_chunk<R: Read>(r: &mut R) -> Result<Vec<f32>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => {
            Error::Protocol("sample stream ended without end marker".into())
        }
        _ => net("reading frame header", e),
    })?;
    let len = u32::from_le_bytes(len);
    if len > MAX_CHUNK_SAMPLES {
        return Err(Error::Protocol(format!(
            "frame of {len} samples exceeds the limit"
        )));
    }
    let mut bytes = vec![0u8; 4 * len as usize];
    r.read_exact(&mut bytes).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => {
            Error::Protocol(format!("frame of {len} samples truncated"))
        }
        _ => net("reading frame", e),
    })?;
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}
