//! Signal detection, frame synchronisation and two-stage CFO correction.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{frequency_shift, ComplexSignal, FFT_SIZE};
use crate::waveform::{lltf_template, LLTF_CP, LSTF_LEN, STF_PERIOD};
use crate::Real;

/// Minimum accepted ratio of the correlation peak to its median.
pub const SYNC_PEAK_TO_MEDIAN: f64 = 3.0;
/// Number of short-symbol periods summed by the coarse estimator.
pub const COARSE_PERIODS: usize = 8;
/// Default skip into the L-STF before the coarse estimator starts.
pub const DEFAULT_START_OFFSET: usize = 8;
/// The fine estimator starts this many samples into the L-LTF guard interval.
pub const FINE_GUARD_OFFSET: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// `E = sum |y|`.
    #[default]
    Magnitude,
    /// `E = sum |y|^2`.
    Energy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub window_w: usize,
    pub threshold_t: f64,
    pub mode: DetectionMode,
}

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("no detection window exceeded the threshold")]
    NotDetected,
    #[error("frame synchronisation failed: {0}")]
    SyncFailed(String),
    #[error("CFO estimation failed: {0}")]
    EstimationFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.window_w < 16 {
            return Err(PreprocessError::InvalidConfig(format!(
                "detection window {} < 16",
                self.window_w
            )));
        }
        if !(self.threshold_t > 0.0 && self.threshold_t.is_finite()) {
            return Err(PreprocessError::InvalidConfig(format!(
                "threshold {} must be positive",
                self.threshold_t
            )));
        }
        Ok(())
    }

    /// Threshold set to `factor` times the statistic of the first window,
    /// which is assumed to contain noise only.
    pub fn calibrated<T: Real>(
        y: &ComplexSignal<T>,
        window_w: usize,
        factor: f64,
        mode: DetectionMode,
    ) -> Result<Self, PreprocessError> {
        if y.len() < window_w {
            return Err(PreprocessError::InvalidConfig("signal shorter than one window".into()));
        }
        let floor = window_statistic(&y.samples[..window_w], mode);
        // noiseless inputs have a zero floor; keep T strictly positive
        let threshold_t = (factor * floor).max(1e-12 * window_w as f64);
        let cfg = Self {
            window_w,
            threshold_t,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn window_statistic<T: Real>(w: &[Complex<T>], mode: DetectionMode) -> f64 {
    match mode {
        DetectionMode::Magnitude => w.iter().map(|z| z.norm().to_f64_lossy()).sum(),
        DetectionMode::Energy => w.iter().map(|z| z.norm_sqr().to_f64_lossy()).sum(),
    }
}

/// Start `(k-1) W` (0-based: `k W`) of the first window whose statistic
/// exceeds the threshold.
pub fn detect_signal<T: Real>(y: &ComplexSignal<T>, cfg: &DetectionConfig) -> Result<usize, PreprocessError> {
    cfg.validate()?;
    if y.len() < cfg.window_w {
        return Err(PreprocessError::InvalidConfig("signal shorter than one window".into()));
    }
    y.samples
        .chunks_exact(cfg.window_w)
        .position(|w| window_statistic(w, cfg.mode) > cfg.threshold_t)
        .map(|k| k * cfg.window_w)
        .ok_or(PreprocessError::NotDetected)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    pub coarse_start_n0: usize,
    /// Start of the L-LTF field (guard interval included).
    pub lltf_start_k0: usize,
    pub frame_start_n1: usize,
    pub search_len_k: usize,
    pub peak_to_median: f64,
}

/// Correlates `y[n0 + k ..]` against the two ideal long training symbols
/// for `k < search_len` and picks the lag with the largest magnitude.
///
/// The template starts at the first long symbol, so the peak marks
/// L-LTF start + 32; `lltf_start_k0` reports the field start and
/// `frame_start_n1 = lltf_start_k0 - 160`.
pub fn synchronize<T: Real>(
    y: &ComplexSignal<T>,
    n0: usize,
    search_len: usize,
) -> Result<SyncResult, PreprocessError> {
    synchronize_with_floor(y, n0, search_len, SYNC_PEAK_TO_MEDIAN)
}

/// [`synchronize`] with an explicit peak-to-median floor.
pub fn synchronize_with_floor<T: Real>(
    y: &ComplexSignal<T>,
    n0: usize,
    search_len: usize,
    floor: f64,
) -> Result<SyncResult, PreprocessError> {
    let template = lltf_template::<T>();
    let l = template.len();
    let last = y.len().saturating_sub(l);
    if n0 > last {
        return Err(PreprocessError::SyncFailed("search window beyond signal end".into()));
    }
    let lags = search_len.min(last - n0 + 1);
    if lags == 0 {
        return Err(PreprocessError::SyncFailed("empty search window".into()));
    }
    let mags: Vec<f64> = (0..lags)
        .map(|k| {
            let seg = &y.samples[n0 + k..n0 + k + l];
            seg.iter()
                .zip(&template)
                .map(|(a, b)| *a * b.conj())
                .fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + v)
                .norm()
                .to_f64_lossy()
        })
        .collect();
    let (k_best, peak) = mags
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, m)| if m > best.1 { (k, m) } else { best });
    let mut sorted = mags.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median = sorted[sorted.len() / 2];
    let ratio = if median > 0.0 { peak / median } else if peak > 0.0 { f64::INFINITY } else { 0.0 };
    if !(ratio >= floor) {
        return Err(PreprocessError::SyncFailed(format!(
            "peak-to-median ratio {ratio:.2} below {floor}"
        )));
    }
    let symbol_start = n0 + k_best;
    let lltf_start = symbol_start
        .checked_sub(LLTF_CP)
        .filter(|&s| s >= LSTF_LEN)
        .ok_or_else(|| PreprocessError::SyncFailed("frame would start before the buffer".into()))?;
    Ok(SyncResult {
        coarse_start_n0: n0,
        lltf_start_k0: lltf_start,
        frame_start_n1: lltf_start - LSTF_LEN,
        search_len_k: search_len,
        peak_to_median: ratio,
    })
}

/// Phase of `sum y*(n) y(n + lag)` over `len` samples from `start`.
fn lag_phase<T: Real>(y: &[Complex<T>], start: usize, len: usize, lag: usize) -> Result<f64, PreprocessError> {
    if start + len + lag > y.len() {
        return Err(PreprocessError::EstimationFailed(format!(
            "needs samples up to {}, signal has {}",
            start + len + lag,
            y.len()
        )));
    }
    let acc = (start..start + len)
        .map(|n| y[n].conj() * y[n + lag])
        .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
    if acc.norm() == T::zero() || !acc.norm().is_finite() {
        return Err(PreprocessError::EstimationFailed("zero-energy estimation window".into()));
    }
    Ok(acc.arg().to_f64_lossy())
}

/// Coarse CFO from the lag-16 autocorrelation of the L-STF, starting
/// `start_offset` samples into the frame. Unambiguous within
/// `+-fs / (2 * 16)` = +-625 kHz.
pub fn estimate_cfo_coarse_at<T: Real>(
    y: &ComplexSignal<T>,
    n1: usize,
    start_offset: usize,
) -> Result<f64, PreprocessError> {
    if start_offset > STF_PERIOD {
        return Err(PreprocessError::InvalidConfig(format!(
            "start offset {start_offset} exceeds the short symbol length"
        )));
    }
    let phase = lag_phase(&y.samples, n1 + start_offset, COARSE_PERIODS * STF_PERIOD, STF_PERIOD)?;
    Ok(phase * y.sample_rate / (2.0 * std::f64::consts::PI * STF_PERIOD as f64))
}

pub fn estimate_cfo_coarse<T: Real>(y: &ComplexSignal<T>, n1: usize) -> Result<f64, PreprocessError> {
    estimate_cfo_coarse_at(y, n1, DEFAULT_START_OFFSET)
}

/// Residual CFO from the lag-64 autocorrelation across the two long
/// training symbols. Unambiguous within +-156.25 kHz.
pub fn estimate_cfo_fine<T: Real>(y: &ComplexSignal<T>, n1: usize) -> Result<f64, PreprocessError> {
    let start = n1 + LSTF_LEN + FINE_GUARD_OFFSET;
    let phase = lag_phase(&y.samples, start, FFT_SIZE, FFT_SIZE)?;
    Ok(phase * y.sample_rate / (2.0 * std::f64::consts::PI * FFT_SIZE as f64))
}

/// Removes a CFO of `f_hat` Hz, phase referenced to sample 0.
pub fn compensate_cfo<T: Real>(y: &ComplexSignal<T>, f_hat: f64) -> ComplexSignal<T> {
    compensate_cfo_from(y, f_hat, 0)
}

/// Removes a CFO of `f_hat` Hz with zero phase at sample `origin`.
pub fn compensate_cfo_from<T: Real>(y: &ComplexSignal<T>, f_hat: f64, origin: usize) -> ComplexSignal<T> {
    if f_hat == 0.0 {
        return y.clone();
    }
    y.map_samples(frequency_shift(&y.samples, -f_hat, origin, y.sample_rate))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfoEstimate {
    pub coarse_hz: f64,
    pub fine_hz: f64,
    pub total_hz: f64,
    pub symbol_len_d: usize,
    pub start_offset_ns: usize,
    pub sample_period: f64,
}

/// Coarse estimate, compensation, fine estimate on the compensated signal.
/// Returns the estimate and the fully compensated signal (phase origin at
/// the frame start).
pub fn estimate_and_compensate<T: Real>(
    y: &ComplexSignal<T>,
    n1: usize,
    start_offset: usize,
) -> Result<(CfoEstimate, ComplexSignal<T>), PreprocessError> {
    let coarse = estimate_cfo_coarse_at(y, n1, start_offset)?;
    let y1 = compensate_cfo_from(y, coarse, n1);
    let fine = estimate_cfo_fine(&y1, n1)?;
    let total = coarse + fine;
    let y2 = compensate_cfo_from(y, total, n1);
    Ok((
        CfoEstimate {
            coarse_hz: coarse,
            fine_hz: fine,
            total_hz: total,
            symbol_len_d: STF_PERIOD,
            start_offset_ns: start_offset,
            sample_period: 1.0 / y.sample_rate,
        },
        y2,
    ))
}

/// Parameters of the full preprocessing chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub window_w: usize,
    /// Threshold as a multiple of the first window's statistic.
    pub threshold_factor: f64,
    pub mode: DetectionMode,
    pub search_len_k: usize,
    pub sync_floor: f64,
    pub cfo_start_offset: usize,
    /// Derotate by a lag-16 estimate taken at the detection point before
    /// correlating. Without it a large CFO decorrelates the 128-sample
    /// template (about 2.5 rad across it at 100 kHz).
    pub presync_cfo: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            window_w: 80,
            threshold_factor: 6.0,
            mode: DetectionMode::Magnitude,
            search_len_k: 400,
            sync_floor: SYNC_PEAK_TO_MEDIAN,
            cfo_start_offset: DEFAULT_START_OFFSET,
            presync_cfo: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Preprocessed<T> {
    pub signal: ComplexSignal<T>,
    pub sync: SyncResult,
    pub cfo: CfoEstimate,
}

/// Lag-16 CFO estimate over the 128 samples after the detection point.
/// The detecting window holds the frame start, so most of these samples
/// lie in the L-STF.
pub fn presync_cfo<T: Real>(y: &ComplexSignal<T>, n0: usize) -> Result<f64, PreprocessError> {
    let len = (COARSE_PERIODS * STF_PERIOD).min(y.len().saturating_sub(n0 + STF_PERIOD));
    if len == 0 {
        return Err(PreprocessError::EstimationFailed("no samples after the detection point".into()));
    }
    let phase = lag_phase(&y.samples, n0, len, STF_PERIOD)?;
    Ok(phase * y.sample_rate / (2.0 * std::f64::consts::PI * STF_PERIOD as f64))
}

/// Detection, synchronisation and CFO compensation in sequence.
pub fn preprocess<T: Real>(y: &ComplexSignal<T>, cfg: &PreprocessConfig) -> Result<Preprocessed<T>, PreprocessError> {
    let det = DetectionConfig::calibrated(y, cfg.window_w, cfg.threshold_factor, cfg.mode)?;
    let n0 = detect_signal(y, &det)?;
    let sync = if cfg.presync_cfo {
        let f = presync_cfo(y, n0)?;
        synchronize_with_floor(&compensate_cfo(y, f), n0, cfg.search_len_k, cfg.sync_floor)?
    } else {
        synchronize_with_floor(y, n0, cfg.search_len_k, cfg.sync_floor)?
    };
    let (cfo, signal) = estimate_and_compensate(y, sync.frame_start_n1, cfg.cfo_start_offset)?;
    Ok(Preprocessed { signal, sync, cfo })
}
