//! Time-domain baseband signals and the FFT helpers shared by every module.

use std::ops::Range;

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::waveform::PreambleFormat;
use crate::Real;

/// Sample rate of every generated and processed signal, in samples/s.
pub const SAMPLE_RATE: f64 = 20e6;
/// OFDM symbol length in samples (and FFT size).
pub const FFT_SIZE: usize = 64;

/// Where an ideal preamble sits inside a sample buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub start: usize,
    pub format: PreambleFormat,
}

impl FrameLayout {
    pub fn extent(&self) -> Range<usize> {
        self.start..self.start + self.format.len()
    }
}

/// Complex baseband samples with sample-rate metadata.
///
/// `frame` is set by the simulator; it records the preamble position so
/// that SNR can be measured over the active preamble and per-field
/// transmitter effects know where the HT-LTF lives. Received captures read
/// from disk have no layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSignal<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: f64,
    pub frame: Option<FrameLayout>,
}

impl<T: Real> ComplexSignal<T> {
    pub fn new(samples: Vec<Complex<T>>) -> Self {
        Self {
            samples,
            sample_rate: SAMPLE_RATE,
            frame: None,
        }
    }

    pub fn with_frame(mut self, frame: FrameLayout) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample range over which signal power is defined: the preamble
    /// extent if known, otherwise the whole buffer.
    pub fn active_range(&self) -> Range<usize> {
        match self.frame {
            Some(f) => {
                let r = f.extent();
                r.start.min(self.len())..r.end.min(self.len())
            }
            None => 0..self.len(),
        }
    }

    /// Mean power over [`Self::active_range`].
    pub fn active_power(&self) -> T {
        mean_power(&self.samples[self.active_range()])
    }

    /// Zero-pads the signal: `before` zeros ahead, `after` zeros behind.
    /// The frame layout moves with the samples.
    pub fn padded(&self, before: usize, after: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let mut samples = Vec::with_capacity(before + self.len() + after);
        samples.resize(before, zero);
        samples.extend_from_slice(&self.samples);
        samples.resize(before + self.len() + after, zero);
        Self {
            samples,
            sample_rate: self.sample_rate,
            frame: self.frame.map(|f| FrameLayout {
                start: f.start + before,
                format: f.format,
            }),
        }
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * c).collect(),
            ..self.clone()
        }
    }

    /// Same metadata, new samples.
    pub fn map_samples(&self, samples: Vec<Complex<T>>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
            frame: self.frame,
        }
    }

    pub fn sample_period(&self) -> T {
        T::lit(1.0 / self.sample_rate)
    }
}

/// Mean of `|s|^2`; zero for an empty slice.
pub fn mean_power<T: Real>(s: &[Complex<T>]) -> T {
    if s.is_empty() {
        return T::zero();
    }
    s.iter().map(|z| z.norm_sqr()).sum::<T>() / T::lit(s.len() as f64)
}

/// Multiplies sample `n` by `exp(j 2 pi f_hz (n - origin) T_s)`.
pub fn frequency_shift<T: Real>(
    samples: &[Complex<T>],
    f_hz: f64,
    origin: usize,
    sample_rate: f64,
) -> Vec<Complex<T>> {
    let step = 2.0 * std::f64::consts::PI * f_hz / sample_rate;
    samples
        .iter()
        .enumerate()
        .map(|(n, &s)| {
            // phase evaluated in f64 so long buffers keep sub-ppb accuracy in f32
            let phase = step * (n as f64 - origin as f64);
            s * Complex::from_polar(T::one(), T::lit(phase))
        })
        .collect()
}

/// Unnormalised forward DFT (`X_k = sum_n x_n e^{-j2pi kn/N}`).
pub fn fft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Unnormalised inverse DFT (`x_n = sum_k X_k e^{+j2pi kn/N}`).
pub fn ifft<T: Real>(x: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

/// Maps a signed tone index in `-32..=31` to its FFT bin.
#[inline]
pub fn tone_to_bin(tone: i32) -> usize {
    debug_assert!((-32..32).contains(&tone));
    tone.rem_euclid(FFT_SIZE as i32) as usize
}

/// Frequency response of a tap-delay line at each of the 64 FFT bins.
pub fn tap_response<T: Real>(taps: &[Complex<T>], delays: &[usize]) -> Vec<Complex<T>> {
    (0..FFT_SIZE)
        .map(|bin| {
            taps.iter()
                .zip(delays)
                .map(|(&h, &d)| {
                    let ang = -2.0 * std::f64::consts::PI * (bin * d) as f64 / FFT_SIZE as f64;
                    h * Complex::from_polar(T::one(), T::lit(ang))
                })
                .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
        })
        .collect()
}

/// Causal linear convolution truncated to the input length.
pub fn convolve_truncated<T: Real>(
    x: &[Complex<T>],
    taps: &[Complex<T>],
    delays: &[usize],
) -> Vec<Complex<T>> {
    let mut y = vec![Complex::new(T::zero(), T::zero()); x.len()];
    for (&h, &d) in taps.iter().zip(delays) {
        for n in d..x.len() {
            y[n] = y[n] + h * x[n - d];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_roundtrip_and_convention() {
        let x: Vec<Complex<f64>> = (0..64)
            .map(|n| Complex::new((n as f64 * 0.3).sin(), (n as f64 * 0.1).cos()))
            .collect();
        let back: Vec<_> = ifft(&fft(&x)).into_iter().map(|z| z / 64.0).collect();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
        // a single tone at +5 lands in bin 5
        let tone: Vec<Complex<f64>> = (0..64)
            .map(|n| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * 5.0 * n as f64 / 64.0))
            .collect();
        let spec = fft(&tone);
        assert!((spec[tone_to_bin(5)].re - 64.0).abs() < 1e-9);
        assert_eq!(tone_to_bin(-1), 63);
        assert_eq!(tone_to_bin(-32), 32);
    }

    #[test]
    fn convolution_matches_tap_response_on_periodic_input() {
        let taps = [Complex::new(1.0, 0.0), Complex::new(0.0, 0.05), Complex::new(-0.02, 0.01)];
        let delays = [0, 1, 3];
        let sym: Vec<Complex<f64>> = (0..64)
            .map(|n| Complex::new(((n * 7) % 11) as f64 - 5.0, ((n * 3) % 5) as f64))
            .collect();
        let x: Vec<_> = sym.iter().chain(sym.iter()).copied().collect();
        let y = convolve_truncated(&x, &taps, &delays);
        let ratio_ref = tap_response(&taps, &delays);
        let xs = fft(&sym);
        let ys = fft(&y[64..128]);
        for k in 0..64 {
            if xs[k].norm() > 1e-6 {
                assert!((ys[k] / xs[k] - ratio_ref[k]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn shift_inverse() {
        let x: Vec<Complex<f64>> = (0..500).map(|n| Complex::new(n as f64, 1.0)).collect();
        let y = frequency_shift(&x, 75e3, 0, SAMPLE_RATE);
        let z = frequency_shift(&y, -75e3, 0, SAMPLE_RATE);
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
