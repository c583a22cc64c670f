//! Tone-marker synchronized EEG sessions and gaze-direction inference.
//!
//! Scripted events are encoded as audio tone bursts, decoded by a streaming
//! detector and fused into a 21-channel recording ([`acquisition`]). Blink
//! artifacts are removed by ICA ([`preprocess`]). Band-power features are
//! reduced by correlation-matrix factor analysis and classified against
//! per-direction centroids ([`factor`]). [`synth`] produces sessions with
//! known ground truth for every stage.

pub mod acquisition;
pub mod codec;
pub mod error;
pub mod factor;
pub mod linalg;
pub mod preprocess;
pub mod session;
pub mod spectrum;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
