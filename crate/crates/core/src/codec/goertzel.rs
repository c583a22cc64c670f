use std::f64::consts::PI;

/// Single-frequency DFT power via the Goertzel recurrence.
///
/// ```text
/// s[n] = x[n] + 2cos(w) s[n-1] - s[n-2]
/// |X(w)|^2 = s[N-1]^2 + s[N-2]^2 - 2cos(w) s[N-1] s[N-2]
/// ```
///
/// The power identity holds for any `w`, not only bin-centred frequencies.
#[derive(Debug, Clone, Copy)]
pub struct Goertzel {
    coeff: f64,
}

impl Goertzel {
    pub fn new(freq_hz: f64, rate_hz: f64) -> Self {
        Goertzel {
            coeff: 2.0 * (2.0 * PI * freq_hz / rate_hz).cos(),
        }
    }

    pub fn power<I>(&self, samples: I) -> f64
    where
        I: IntoIterator,
        I::Item: Into<f64>,
    {
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for x in samples {
            let s0 = x.into() + self.coeff * s1 - s2;
            s2 = s1;
            s1 = s0;
        }
        (s1 * s1 + s2 * s2 - self.coeff * s1 * s2).max(0.0)
    }
}

/// `|sum x[n] exp(-2 pi i f n / rate)|^2` over the window.
pub fn goertzel_power<T: Copy + Into<f64>>(window: &[T], freq_hz: f64, rate_hz: f64) -> f64 {
    Goertzel::new(freq_hz, rate_hz).power(window.iter().copied())
}
