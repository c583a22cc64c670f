use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::session::Recording;

pub const DEFAULT_LO_HZ: f64 = 0.15;
pub const DEFAULT_HI_HZ: f64 = 100.0;

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let num = self.b[0] + zi * (self.b[1] + zi * self.b[2]);
        let den = self.a[0] + zi * (self.a[1] + zi * self.a[2]);
        num / den
    }

    /// Transposed direct form II state for the unit-step steady state.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        // (I - A^T) zi = b[1..] - a[1..] b0 with A the companion matrix
        let r0 = b1 - a1 * b0;
        let r1 = b2 - a2 * b0;
        let det = (1.0 + a1) + a2;
        [(r0 + r1) / det, (r1 * (1.0 + a1) - a2 * r0) / det]
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

/// Second-order-section cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos(pub Vec<Biquad>);

impl Sos {
    /// Butterworth band-pass from an order-2 low-pass prototype: four poles,
    /// two sections, bilinear transform with pre-warped edges. Gain is unity
    /// at the geometric centre of the pre-warped band.
    pub fn butter_bandpass(lo_hz: f64, hi_hz: f64, rate_hz: f64) -> Result<Self> {
        let nyq = rate_hz / 2.0;
        if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyq) {
            return Err(Error::InvalidConfig(format!(
                "band [{lo_hz}, {hi_hz}] Hz must satisfy 0 < lo < hi < {nyq}"
            )));
        }
        let fs2 = 2.0 * rate_hz;
        let w1 = fs2 * (PI * lo_hz / rate_hz).tan();
        let w2 = fs2 * (PI * hi_hz / rate_hz).tan();
        let w0 = (w1 * w2).sqrt();
        let bw = w2 - w1;

        let mut sections = Vec::with_capacity(2);
        // one prototype pole of each conjugate pair; the transform maps it to
        // two band-pass poles whose conjugates come from the other prototype pole
        let proto = Complex64::from_polar(1.0, 3.0 * PI / 4.0);
        let disc = (proto * proto * bw * bw - 4.0 * w0 * w0).sqrt();
        for s in [(proto * bw + disc) / 2.0, (proto * bw - disc) / 2.0] {
            let z = (fs2 + s) / (fs2 - s);
            sections.push(Biquad {
                // zeros at z = 1 and z = -1
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * z.re, z.norm_sqr()],
            });
        }

        let centre = Complex64::from_polar(1.0, 2.0 * (w0 / fs2).atan());
        let g = sections
            .iter()
            .map(|s| s.response(centre))
            .product::<Complex64>()
            .norm();
        let per = (1.0 / g).sqrt();
        for s in &mut sections {
            s.b = s.b.map(|v| v * per);
        }
        Ok(Sos(sections))
    }

    pub fn response(&self, freq_hz: f64, rate_hz: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / rate_hz);
        self.0.iter().map(|s| s.response(z)).product()
    }

    /// Causal filtering from the given per-section states.
    pub fn filter_with_state(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (sec, z) in self.0.iter().zip(state.iter_mut()) {
            let [b0, b1, b2] = sec.b;
            let [_, a1, a2] = sec.a;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z[0];
                z[0] = b1 * xin - a1 * y + z[1];
                z[1] = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Steady-state initial conditions for a unit step through the cascade.
    pub fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.0
            .iter()
            .map(|s| {
                let zi = s.step_state().map(|v| v * scale);
                scale *= s.dc_gain();
                zi
            })
            .collect()
    }

    fn pad_len(&self) -> usize {
        3 * (2 * self.0.len() + 1)
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_states();
        let mut st: Vec<[f64; 2]> = zi.iter().map(|z| z.map(|v| v * ext[0])).collect();
        self.filter_with_state(&mut ext, &mut st);
        ext.reverse();
        let mut st: Vec<[f64; 2]> = zi.iter().map(|z| z.map(|v| v * ext[0])).collect();
        self.filter_with_state(&mut ext, &mut st);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Zero-phase band-pass of every EEG channel; aux channels pass through.
pub fn bandpass(rec: &Recording, lo_hz: f64, hi_hz: f64) -> Result<Recording> {
    let sos = Sos::butter_bandpass(lo_hz, hi_hz, rec.sample_rate_hz)?;
    let mut out = rec.clone();
    for (label, row) in rec.channels.iter().zip(out.data.iter_mut()) {
        if label.is_aux() {
            continue;
        }
        let x: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
        *row = sos.filtfilt(&x).into_iter().map(|v| v as f32).collect();
    }
    Ok(out)
}
