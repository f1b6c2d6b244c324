//! Frequency-domain division features.
//!
//! - **RD** divides a device's field spectrum by the same receiver's capture
//!   of a reference device; flat fading and the receiver response cancel.
//! - **HL** divides the HT-LTF spectrum by the L-LTF spectrum of one frame;
//!   the channel and the receiver response cancel, leaving the
//!   transmitter's per-field response ratio.
//! - **DV** divides the L-STF by the L-LTF (prior-work baseline, 12 tones).
//!
//! Every feature is the magnitude of the per-tone ratio on occupied tones,
//! normalised to unit energy, which also removes the per-link scalars.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{fft, tone_to_bin, ComplexSignal, FFT_SIZE};
use crate::waveform::{extract_window_at, ideal_symbol_spectrum, occupied_tones, SymbolWindow, TrainingField, WaveformError};
use crate::Real;

/// Model or denominator bins below `DEGENERATE_EPS * rms` are rejected.
pub const DEGENERATE_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtractorKind {
    #[serde(rename = "RD_STF")]
    RdStf,
    #[serde(rename = "RD_LTF")]
    RdLtf,
    #[serde(rename = "HL")]
    Hl,
    #[serde(rename = "DV")]
    Dv,
}

impl ExtractorKind {
    pub const ALL: [ExtractorKind; 4] = [ExtractorKind::RdStf, ExtractorKind::RdLtf, ExtractorKind::Hl, ExtractorKind::Dv];

    pub fn dim(self) -> usize {
        match self {
            ExtractorKind::RdStf | ExtractorKind::Dv => 12,
            ExtractorKind::RdLtf | ExtractorKind::Hl => 52,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorKind::RdStf => "RD_STF",
            ExtractorKind::RdLtf => "RD_LTF",
            ExtractorKind::Hl => "HL",
            ExtractorKind::Dv => "DV",
        }
    }
}

impl fmt::Display for ExtractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExtractorKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExtractorKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| FeatureError::UnknownExtractor(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Window(#[from] WaveformError),
    #[error("model spectrum has a near-zero bin at tone {tone}")]
    DegenerateModel { tone: i32 },
    #[error("denominator spectrum has a near-zero bin at tone {tone}")]
    DegenerateDenominator { tone: i32 },
    #[error("field mismatch: expected {expected:?}, got {got:?}")]
    FieldMismatch { expected: TrainingField, got: TrainingField },
    #[error("RD features are defined for L-STF and L-LTF only, not {0:?}")]
    UnsupportedField(TrainingField),
    #[error("unknown extractor {0:?}")]
    UnknownExtractor(String),
    #[error("feature vector is all zeros")]
    ZeroFeature,
}

/// 64-bin spectrum of one training field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpectrum<T> {
    pub field: TrainingField,
    pub bins: Vec<Complex<T>>,
}

/// Unit-energy, non-negative feature with its tone indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub extractor: ExtractorKind,
    pub values: Vec<T>,
    pub tone_indices: Vec<i32>,
    #[serde(default)]
    pub device_hint: Option<String>,
}

impl<T: Real> FeatureVector<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn with_hint(mut self, device: impl Into<String>) -> Self {
        self.device_hint = Some(device.into());
        self
    }
}

/// Averages the field's repeated windows in time and takes the 64-point FFT.
pub fn field_spectrum<T: Real>(
    signal: &ComplexSignal<T>,
    n1: usize,
    field: TrainingField,
) -> Result<FieldSpectrum<T>, FeatureError> {
    field_spectrum_with_backoff(signal, n1, field, 0)
}

/// [`field_spectrum`] with every window moved `backoff` samples into its
/// guard interval. The resulting linear phase is common to all fields and
/// vanishes in the magnitude features.
pub fn field_spectrum_with_backoff<T: Real>(
    signal: &ComplexSignal<T>,
    n1: usize,
    field: TrainingField,
    backoff: usize,
) -> Result<FieldSpectrum<T>, FeatureError> {
    let windows = SymbolWindow::for_field(field);
    let mut acc = vec![Complex::new(T::zero(), T::zero()); FFT_SIZE];
    for &w in windows {
        let seg = extract_window_at(signal, n1, w, backoff)?;
        for (a, s) in acc.iter_mut().zip(seg) {
            *a = *a + *s;
        }
    }
    let inv = T::one() / T::lit(windows.len() as f64);
    acc.iter_mut().for_each(|a| *a = *a * inv);
    Ok(FieldSpectrum { field, bins: fft(&acc) })
}

fn rms_on<T: Real>(bins: &[Complex<T>], tones: &[i32]) -> T {
    let s: T = tones.iter().map(|&t| bins[tone_to_bin(t)].norm_sqr()).sum();
    (s / T::lit(tones.len() as f64)).sqrt()
}

/// Scales to unit energy. Fails on an all-zero input.
pub fn normalize_unit_energy<T: Real>(values: &mut [T]) -> Result<(), FeatureError> {
    let e: T = values.iter().map(|v| *v * *v).sum();
    if !(e > T::zero()) || !e.is_finite() {
        return Err(FeatureError::ZeroFeature);
    }
    let inv = T::one() / e.sqrt();
    values.iter_mut().for_each(|v| *v = *v * inv);
    Ok(())
}

/// `|num[k] / den[k] * ref_ratio[k]|` on `tones`, normalised.
fn ratio_feature<T: Real>(
    extractor: ExtractorKind,
    num: &FieldSpectrum<T>,
    den: &FieldSpectrum<T>,
    compensation: Option<(&[Complex<T>], &[Complex<T>])>,
    tones: Vec<i32>,
    degenerate: impl Fn(i32) -> FeatureError,
) -> Result<FeatureVector<T>, FeatureError> {
    let eps = T::lit(DEGENERATE_EPS) * rms_on(&den.bins, &tones);
    let mut values = Vec::with_capacity(tones.len());
    for &t in &tones {
        let b = tone_to_bin(t);
        let d = den.bins[b];
        if !(d.norm() > eps) {
            return Err(degenerate(t));
        }
        let mut r = num.bins[b] / d;
        if let Some((x_num, x_den)) = compensation {
            r = r * x_den[b] / x_num[b];
        }
        values.push(r.norm());
    }
    normalize_unit_energy(&mut values)?;
    Ok(FeatureVector {
        extractor,
        values,
        tone_indices: tones,
        device_hint: None,
    })
}

/// Reference-device division on the L-STF (12 tones) or L-LTF (52 tones).
/// `model` must come from the same receiver as `unknown`.
pub fn extract_rd<T: Real>(unknown: &FieldSpectrum<T>, model: &FieldSpectrum<T>) -> Result<FeatureVector<T>, FeatureError> {
    if unknown.field != model.field {
        return Err(FeatureError::FieldMismatch {
            expected: model.field,
            got: unknown.field,
        });
    }
    let kind = match model.field {
        TrainingField::LSTF => ExtractorKind::RdStf,
        TrainingField::LLTF => ExtractorKind::RdLtf,
        f => return Err(FeatureError::UnsupportedField(f)),
    };
    ratio_feature(kind, unknown, model, None, occupied_tones(model.field), |tone| {
        FeatureError::DegenerateModel { tone }
    })
}

/// HT-LTF over L-LTF on the 52 tones both occupy, with the known sequence
/// ratio `X_H / X_L` divided out.
pub fn extract_hl<T: Real>(lltf: &FieldSpectrum<T>, htltf: &FieldSpectrum<T>) -> Result<FeatureVector<T>, FeatureError> {
    check_field(lltf, TrainingField::LLTF)?;
    check_field(htltf, TrainingField::HTLTF)?;
    let xh = ideal_symbol_spectrum::<T>(TrainingField::HTLTF);
    let xl = ideal_symbol_spectrum::<T>(TrainingField::LLTF);
    ratio_feature(
        ExtractorKind::Hl,
        htltf,
        lltf,
        Some((&xh, &xl)),
        occupied_tones(TrainingField::LLTF),
        |tone| FeatureError::DegenerateDenominator { tone },
    )
}

/// How the DV baseline treats the known sequences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DvMode {
    /// Divide out `X_S / X_L`.
    #[default]
    SequenceCompensated,
    /// Use the raw spectral ratio. `|X_S / X_L|` is constant over the 12
    /// tones, so after normalisation the magnitudes agree with
    /// `SequenceCompensated`; only the discarded phase differs.
    Raw,
}

/// L-STF over L-LTF on the 12 tones the L-STF occupies.
pub fn extract_dv<T: Real>(
    lstf: &FieldSpectrum<T>,
    lltf: &FieldSpectrum<T>,
    mode: DvMode,
) -> Result<FeatureVector<T>, FeatureError> {
    check_field(lstf, TrainingField::LSTF)?;
    check_field(lltf, TrainingField::LLTF)?;
    let xs = ideal_symbol_spectrum::<T>(TrainingField::LSTF);
    let xl = ideal_symbol_spectrum::<T>(TrainingField::LLTF);
    let comp = match mode {
        DvMode::SequenceCompensated => Some((xs.as_slice(), xl.as_slice())),
        DvMode::Raw => None,
    };
    ratio_feature(ExtractorKind::Dv, lstf, lltf, comp, occupied_tones(TrainingField::LSTF), |tone| {
        FeatureError::DegenerateDenominator { tone }
    })
}

fn check_field<T>(s: &FieldSpectrum<T>, expected: TrainingField) -> Result<(), FeatureError> {
    if s.field == expected {
        Ok(())
    } else {
        Err(FeatureError::FieldMismatch { expected, got: s.field })
    }
}

/// Cosine similarity of two equal-length vectors (0 if either is zero).
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine similarity of unequal lengths");
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.to_f64_lossy(), y.to_f64_lossy());
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Largest absolute per-entry difference.
pub fn max_deviation<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.to_f64_lossy() - y.to_f64_lossy()).abs())
        .fold(0.0, f64::max)
}
