//! One frame from ideal preamble to feature vectors.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::channel::{apply_channel, ChannelRealization};
use crate::features::{
    extract_dv, extract_hl, extract_rd, field_spectrum_with_backoff, DvMode, ExtractorKind, FeatureError,
    FieldSpectrum,
};
use crate::impairments::{apply_receiver, apply_transmitter, DeviceProfile};
use crate::preprocess::{preprocess, PreprocessConfig, PreprocessError, SyncResult};
use crate::signal::ComplexSignal;
use crate::waveform::{generate_preamble, PreambleFormat, PreambleSpec, TrainingField};
use crate::{Complex, Real};

/// Idle samples before the frame (plus up to `LEAD_JITTER`) and after it.
pub const LEAD_PAD: usize = 200;
pub const LEAD_JITTER: usize = 80;
pub const TAIL_PAD: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

impl PipelineError {
    /// Short stage name for drop statistics.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Preprocess(PreprocessError::NotDetected) => "detection",
            PipelineError::Preprocess(PreprocessError::SyncFailed(_)) => "sync",
            PipelineError::Preprocess(_) => "cfo",
            PipelineError::Feature(_) => "features",
        }
    }
}

/// Transmitter, padding, channel (with noise) and receiver. The returned
/// signal's frame layout marks where the preamble was placed.
pub fn simulate_capture<T: Real>(
    format: PreambleFormat,
    tx: &DeviceProfile,
    rx: &DeviceProfile,
    channel: &ChannelRealization,
    lead: usize,
) -> ComplexSignal<T> {
    let x = generate_preamble::<T>(PreambleSpec::new(format));
    let sent = apply_transmitter(tx, &x).padded(lead, TAIL_PAD);
    apply_receiver(rx, &apply_channel(channel, &sent))
}

/// Field spectra of one synchronised, CFO-compensated frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSpectra<T> {
    pub sync: SyncResult,
    pub cfo_hz: f64,
    pub lstf: FieldSpectrum<T>,
    pub lltf: FieldSpectrum<T>,
    pub htltf: Option<FieldSpectrum<T>>,
}

pub fn frame_spectra<T: Real>(
    y: &ComplexSignal<T>,
    cfg: &PreprocessConfig,
    backoff: usize,
    format: PreambleFormat,
) -> Result<FrameSpectra<T>, PipelineError> {
    let p = preprocess(y, cfg)?;
    let n1 = p.sync.frame_start_n1;
    let spec = |f| field_spectrum_with_backoff(&p.signal, n1, f, backoff);
    Ok(FrameSpectra {
        sync: p.sync,
        cfo_hz: p.cfo.total_hz,
        lstf: spec(TrainingField::LSTF)?,
        lltf: spec(TrainingField::LLTF)?,
        htltf: if format.has_htltf() { Some(spec(TrainingField::HTLTF)?) } else { None },
    })
}

/// A receiver's capture of the reference device: the RD divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSignal<T> {
    pub receiver: String,
    pub lstf: FieldSpectrum<T>,
    pub lltf: FieldSpectrum<T>,
}

impl<T: Real> ModelSignal<T> {
    /// Averages bin magnitudes over several captures. RD features use only
    /// `|unknown / model|`, so the model's phase is irrelevant.
    pub fn from_captures(receiver: impl Into<String>, captures: &[FrameSpectra<T>]) -> Option<Self> {
        let mean_mag = |pick: &dyn Fn(&FrameSpectra<T>) -> &FieldSpectrum<T>| {
            let first = pick(captures.first()?);
            let n = T::lit(captures.len() as f64);
            let bins = (0..first.bins.len())
                .map(|b| Complex::new(captures.iter().map(|c| pick(c).bins[b].norm()).sum::<T>() / n, T::zero()))
                .collect();
            Some(FieldSpectrum {
                field: first.field,
                bins,
            })
        };
        Some(Self {
            receiver: receiver.into(),
            lstf: mean_mag(&|c| &c.lstf)?,
            lltf: mean_mag(&|c| &c.lltf)?,
        })
    }
}

/// Requested extractor outputs for one frame.
pub type FrameFeatures = BTreeMap<ExtractorKind, Vec<f64>>;

pub fn extract_features<T: Real>(
    spectra: &FrameSpectra<T>,
    model: Option<&ModelSignal<T>>,
    kinds: &[ExtractorKind],
    dv_mode: DvMode,
) -> Result<FrameFeatures, PipelineError> {
    let mut out = BTreeMap::new();
    for &k in kinds {
        let f = match k {
            ExtractorKind::RdStf | ExtractorKind::RdLtf => {
                let m = model.expect("RD features need a model signal");
                if k == ExtractorKind::RdStf {
                    extract_rd(&spectra.lstf, &m.lstf)?
                } else {
                    extract_rd(&spectra.lltf, &m.lltf)?
                }
            }
            ExtractorKind::Hl => {
                let h = spectra
                    .htltf
                    .as_ref()
                    .ok_or(FeatureError::UnsupportedField(TrainingField::HTLTF))?;
                extract_hl(&spectra.lltf, h)?
            }
            ExtractorKind::Dv => extract_dv(&spectra.lstf, &spectra.lltf, dv_mode)?,
        };
        out.insert(k, f.values.iter().map(|v| v.to_f64_lossy()).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::Role;
    use crate::Complex64;

    #[test]
    fn identity_capture_recovers_frame_start() {
        let tx = DeviceProfile::identity("t", Role::Transmitter);
        let rx = DeviceProfile::identity("r", Role::Receiver);
        let ch = ChannelRealization::flat(Complex64::new(0.5, 0.5));
        let y = simulate_capture::<f64>(PreambleFormat::HTMF, &tx, &rx, &ch, 237);
        assert_eq!(y.frame.unwrap().start, 237);
        let s = frame_spectra(&y, &PreprocessConfig::default(), 4, PreambleFormat::HTMF).unwrap();
        assert_eq!(s.sync.frame_start_n1, 237);
        let model = ModelSignal::from_captures("r", &[s.clone()]).unwrap();
        let f = extract_features(&s, Some(&model), &ExtractorKind::ALL, DvMode::default()).unwrap();
        assert_eq!(f.len(), 4);
        for (k, v) in &f {
            let c = 1.0 / (k.dim() as f64).sqrt();
            assert!(v.iter().all(|x| (x - c).abs() < 1e-9), "{k}");
        }
    }

    #[test]
    fn nonht_frames_have_no_hl() {
        let tx = DeviceProfile::identity("t", Role::Transmitter);
        let rx = DeviceProfile::identity("r", Role::Receiver);
        let ch = ChannelRealization::flat(Complex64::new(1.0, 0.0));
        let y = simulate_capture::<f64>(PreambleFormat::NonHT, &tx, &rx, &ch, 200);
        let s = frame_spectra(&y, &PreprocessConfig::default(), 0, PreambleFormat::NonHT).unwrap();
        assert!(s.htltf.is_none());
        let err = extract_features(&s, None, &[ExtractorKind::Hl], DvMode::default()).unwrap_err();
        assert_eq!(err.stage(), "features");
    }
}
