//! Ideal 20 MHz non-HT / HT-mixed preambles.
//!
//! Tone values follow the IEEE 802.11-2012 training sequences. Each field
//! is scaled to unit average power in the time domain. Sample offsets in
//! this module are 0-based from the frame start.
//!
//! Frame layouts produced here:
//!
//! ```text
//! NonHT: | L-STF 160 | L-LTF (CP 32, 64, 64) |                     = 320
//! HT-MF: | L-STF 160 | L-LTF (CP 32, 64, 64) | HT-LTF (CP 16, 64) | = 400
//! ```
//!
//! The HT-MF layout omits L-SIG, HT-SIG and HT-STF: only the training
//! fields carry fingerprint information and the SIG fields would require
//! encoding a payload.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{ifft, tone_to_bin, ComplexSignal, FrameLayout, FFT_SIZE};
use crate::Real;

/// Length of the L-STF field in samples.
pub const LSTF_LEN: usize = 160;
/// Length of the L-LTF field in samples.
pub const LLTF_LEN: usize = 160;
/// Cyclic prefix of the L-LTF field.
pub const LLTF_CP: usize = 32;
/// Length of one HT-LTF (CP + symbol).
pub const HTLTF_LEN: usize = 80;
/// Cyclic prefix of the HT-LTF.
pub const HTLTF_CP: usize = 16;
/// Period of the short training sequence.
pub const STF_PERIOD: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreambleFormat {
    NonHT,
    HTMF,
}

impl PreambleFormat {
    pub fn len(self) -> usize {
        match self {
            PreambleFormat::NonHT => LSTF_LEN + LLTF_LEN,
            PreambleFormat::HTMF => LSTF_LEN + LLTF_LEN + HTLTF_LEN,
        }
    }

    pub fn has_htltf(self) -> bool {
        matches!(self, PreambleFormat::HTMF)
    }
}

/// Fixed preamble parameters. Only 20 Msps / 64-point FFT is supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreambleSpec {
    pub format: PreambleFormat,
}

impl PreambleSpec {
    pub const SAMPLE_RATE: f64 = crate::SAMPLE_RATE;
    pub const FFT_SIZE: usize = FFT_SIZE;

    pub fn new(format: PreambleFormat) -> Self {
        Self { format }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainingField {
    LSTF,
    LLTF,
    HTLTF,
}

/// 64-sample FFT windows inside the preamble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SymbolWindow {
    LSTF1,
    LSTF2,
    LLTF1,
    LLTF2,
    HTLTF1,
}

impl SymbolWindow {
    /// 0-based offset of the window from the frame start.
    pub fn offset(self) -> usize {
        match self {
            SymbolWindow::LSTF1 => 16,
            SymbolWindow::LSTF2 => 80,
            SymbolWindow::LLTF1 => LSTF_LEN + LLTF_CP,
            SymbolWindow::LLTF2 => LSTF_LEN + LLTF_CP + FFT_SIZE,
            SymbolWindow::HTLTF1 => LSTF_LEN + LLTF_LEN + HTLTF_CP,
        }
    }

    pub fn len(self) -> usize {
        FFT_SIZE
    }

    pub fn field(self) -> TrainingField {
        match self {
            SymbolWindow::LSTF1 | SymbolWindow::LSTF2 => TrainingField::LSTF,
            SymbolWindow::LLTF1 | SymbolWindow::LLTF2 => TrainingField::LLTF,
            SymbolWindow::HTLTF1 => TrainingField::HTLTF,
        }
    }

    /// Repeated windows of a field, averaged before the FFT.
    pub fn for_field(field: TrainingField) -> &'static [SymbolWindow] {
        match field {
            TrainingField::LSTF => &[SymbolWindow::LSTF1, SymbolWindow::LSTF2],
            TrainingField::LLTF => &[SymbolWindow::LLTF1, SymbolWindow::LLTF2],
            TrainingField::HTLTF => &[SymbolWindow::HTLTF1],
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WaveformError {
    #[error("window {window:?} at frame start {frame_start} needs samples {start}..{end}, signal has {len}")]
    OutOfBounds {
        window: SymbolWindow,
        frame_start: usize,
        start: usize,
        end: usize,
        len: usize,
    },
}

// L-STF non-zero tones (+-4, +-8, ..., +-24) as sign pairs for (1+j).
const LSTF_TONES: [(i32, f64); 12] = [
    (-24, 1.0),
    (-20, -1.0),
    (-16, 1.0),
    (-12, -1.0),
    (-8, -1.0),
    (-4, 1.0),
    (4, -1.0),
    (8, -1.0),
    (12, 1.0),
    (16, 1.0),
    (20, 1.0),
    (24, 1.0),
];

// L-LTF values for tones -26..=26 (DC entry is zero).
const LLTF_VALUES: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1,
    -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

/// Signed indices of the occupied tones of a field, ascending.
pub fn occupied_tones(field: TrainingField) -> Vec<i32> {
    match field {
        TrainingField::LSTF => LSTF_TONES.iter().map(|&(k, _)| k).collect(),
        TrainingField::LLTF => (-26..=26).filter(|&k| k != 0).collect(),
        TrainingField::HTLTF => (-28..=28).filter(|&k| k != 0).collect(),
    }
}

/// Tone value of the standard training sequence, or zero if unoccupied.
fn tone_value(field: TrainingField, tone: i32) -> Complex<f64> {
    match field {
        TrainingField::LSTF => {
            let scale = (13.0f64 / 6.0).sqrt();
            LSTF_TONES
                .iter()
                .find(|&&(k, _)| k == tone)
                .map(|&(_, s)| Complex::new(s * scale, s * scale))
                .unwrap_or_default()
        }
        TrainingField::LLTF => {
            if (-26..=26).contains(&tone) {
                Complex::new(LLTF_VALUES[(tone + 26) as usize] as f64, 0.0)
            } else {
                Complex::default()
            }
        }
        TrainingField::HTLTF => match tone {
            -28 | -27 => Complex::new(1.0, 0.0),
            27 | 28 => Complex::new(-1.0, 0.0),
            _ => tone_value(TrainingField::LLTF, tone),
        },
    }
}

/// Frequency-domain training symbol of `field` over the 64 FFT bins.
pub fn ideal_symbol_spectrum<T: Real>(field: TrainingField) -> Vec<Complex<T>> {
    let mut bins = vec![Complex::new(T::zero(), T::zero()); FFT_SIZE];
    for tone in occupied_tones(field) {
        let v = tone_value(field, tone);
        bins[tone_to_bin(tone)] = Complex::new(T::lit(v.re), T::lit(v.im));
    }
    bins
}

/// One 64-sample time-domain symbol of `field` with unit average power.
pub fn time_symbol<T: Real>(field: TrainingField) -> Vec<Complex<T>> {
    let spectrum = ideal_symbol_spectrum::<T>(field);
    let energy: T = spectrum.iter().map(|z| z.norm_sqr()).sum();
    let scale = T::one() / energy.sqrt();
    ifft(&spectrum).into_iter().map(|z| z * scale).collect()
}

/// Samples of one field with its cyclic prefix (or periodic extension).
pub fn field_waveform<T: Real>(field: TrainingField) -> Vec<Complex<T>> {
    let sym = time_symbol::<T>(field);
    match field {
        TrainingField::LSTF => (0..LSTF_LEN).map(|n| sym[n % FFT_SIZE]).collect(),
        TrainingField::LLTF => sym[FFT_SIZE - LLTF_CP..]
            .iter()
            .chain(sym.iter())
            .chain(sym.iter())
            .copied()
            .collect(),
        TrainingField::HTLTF => sym[FFT_SIZE - HTLTF_CP..]
            .iter()
            .chain(sym.iter())
            .copied()
            .collect(),
    }
}

/// Ideal preamble starting at sample 0.
pub fn generate_preamble<T: Real>(spec: PreambleSpec) -> ComplexSignal<T> {
    let mut samples = field_waveform::<T>(TrainingField::LSTF);
    samples.extend(field_waveform::<T>(TrainingField::LLTF));
    if spec.format.has_htltf() {
        samples.extend(field_waveform::<T>(TrainingField::HTLTF));
    }
    ComplexSignal::new(samples).with_frame(FrameLayout {
        start: 0,
        format: spec.format,
    })
}

/// The two long training symbols (128 samples) used as the sync template.
pub fn lltf_template<T: Real>() -> Vec<Complex<T>> {
    let sym = time_symbol::<T>(TrainingField::LLTF);
    sym.iter().chain(sym.iter()).copied().collect()
}

/// The 64 samples addressed by `window` for a frame starting at `frame_start`.
pub fn extract_window<T: Real>(
    signal: &ComplexSignal<T>,
    frame_start: usize,
    window: SymbolWindow,
) -> Result<&[Complex<T>], WaveformError> {
    extract_window_at(signal, frame_start, window, 0)
}

/// Like [`extract_window`] but `backoff` samples earlier, i.e. inside the
/// guard interval.
pub fn extract_window_at<T: Real>(
    signal: &ComplexSignal<T>,
    frame_start: usize,
    window: SymbolWindow,
    backoff: usize,
) -> Result<&[Complex<T>], WaveformError> {
    let start = (frame_start + window.offset()).checked_sub(backoff);
    let len = signal.len();
    match start {
        Some(start) if start + window.len() <= len => Ok(&signal.samples[start..start + window.len()]),
        _ => Err(WaveformError::OutOfBounds {
            window,
            frame_start,
            start: (frame_start + window.offset()).saturating_sub(backoff),
            end: (frame_start + window.offset()).saturating_sub(backoff) + window.len(),
            len,
        }),
    }
}
