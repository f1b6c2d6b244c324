//! Flat and frequency-selective fading with AWGN.
//!
//! A realization is static over one frame. Noise is calibrated to the
//! requested SNR measured over the active preamble, not the padding.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_from_seed;
use crate::signal::{convolve_truncated, ComplexSignal};
use crate::{Complex64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelKind {
    Flat,
    Selective,
}

/// One channel draw plus the noise level applied after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub kind: ChannelKind,
    /// Flat gain; ignored for selective channels.
    pub alpha: Complex64,
    /// Tap gains; ignored for flat channels.
    pub taps: Vec<Complex64>,
    /// Integer sample delay of each tap, strictly increasing from 0.
    pub delays: Vec<usize>,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    /// Seeds the noise draw.
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("flat channel gain must be non-zero")]
    ZeroGain,
    #[error("selective channel needs at least one tap with matching delays")]
    NoTaps,
    #[error("tap delays must start at 0 and increase strictly")]
    BadDelays,
    #[error("tap energies must sum to 1 (got {0})")]
    Unnormalized(f64),
}

impl ChannelRealization {
    /// Noiseless flat channel with gain `alpha`.
    pub fn flat(alpha: Complex64) -> Self {
        Self {
            kind: ChannelKind::Flat,
            alpha,
            taps: Vec::new(),
            delays: Vec::new(),
            snr_db: None,
            seed: 0,
        }
    }

    /// Noiseless selective channel; taps are normalised to unit energy.
    pub fn selective(taps: Vec<Complex64>, delays: Vec<usize>) -> Self {
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        let scale = if energy > 0.0 { energy.sqrt().recip() } else { 1.0 };
        Self {
            kind: ChannelKind::Selective,
            alpha: Complex64::new(1.0, 0.0),
            taps: taps.into_iter().map(|t| t * scale).collect(),
            delays,
            snr_db: None,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, snr_db: Option<f64>, seed: u64) -> Self {
        self.snr_db = snr_db;
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match self.kind {
            ChannelKind::Flat if self.alpha.norm() > 0.0 => Ok(()),
            ChannelKind::Flat => Err(ChannelError::ZeroGain),
            ChannelKind::Selective => {
                if self.taps.is_empty() || self.taps.len() != self.delays.len() {
                    return Err(ChannelError::NoTaps);
                }
                if self.delays[0] != 0 || self.delays.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ChannelError::BadDelays);
                }
                let e: f64 = self.taps.iter().map(|t| t.norm_sqr()).sum();
                if (e - 1.0).abs() > 1e-9 {
                    return Err(ChannelError::Unnormalized(e));
                }
                Ok(())
            }
        }
    }
}

/// Shape of the tap-delay profile drawn by [`sample_channel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub taps: usize,
    pub delay_step: usize,
    /// Expected tap power falls as `exp(-i / decay)`.
    pub decay: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            taps: 4,
            delay_step: 1,
            decay: 1.0,
        }
    }
}

/// Named propagation scenarios with their channel presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Flat,
    #[serde(rename = "LOS", alias = "los")]
    Los,
    #[serde(rename = "NLOS", alias = "nlos")]
    Nlos,
    Mobile,
    CorridorLike,
}

impl Scenario {
    pub fn kind(self) -> ChannelKind {
        match self {
            Scenario::Flat => ChannelKind::Flat,
            _ => ChannelKind::Selective,
        }
    }

    pub fn params(self) -> ChannelParams {
        match self {
            Scenario::Flat => ChannelParams::default(),
            Scenario::Los => ChannelParams { taps: 4, delay_step: 1, decay: 0.7 },
            Scenario::Nlos | Scenario::Mobile => ChannelParams { taps: 8, delay_step: 1, decay: 3.0 },
            Scenario::CorridorLike => ChannelParams { taps: 6, delay_step: 1, decay: 1.5 },
        }
    }

    /// Whether a fresh channel is drawn for every frame instead of every link.
    pub fn per_frame(self) -> bool {
        matches!(self, Scenario::Mobile)
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Flat => "flat",
            Scenario::Los => "LOS",
            Scenario::Nlos => "NLOS",
            Scenario::Mobile => "mobile",
            Scenario::CorridorLike => "corridor-like",
        }
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws a channel. Flat: `alpha ~ CN(0, 1)` (Rayleigh magnitude, uniform
/// phase). Selective: independent complex Gaussian taps with exponentially
/// decaying expected power, then normalised to unit energy.
pub fn sample_channel(
    kind: ChannelKind,
    snr_db: Option<f64>,
    seed: u64,
    params: &ChannelParams,
) -> ChannelRealization {
    let mut rng = rng_from_seed(seed);
    let ch = match kind {
        ChannelKind::Flat => {
            let mut alpha = complex_gaussian(&mut rng, 1.0);
            while alpha.norm() == 0.0 {
                alpha = complex_gaussian(&mut rng, 1.0);
            }
            ChannelRealization::flat(alpha)
        }
        ChannelKind::Selective => {
            let n = params.taps.max(1);
            let taps: Vec<Complex64> = (0..n)
                .map(|i| complex_gaussian(&mut rng, (-(i as f64) / params.decay).exp()))
                .collect();
            let delays = (0..n).map(|i| i * params.delay_step.max(1)).collect();
            ChannelRealization::selective(taps, delays)
        }
    };
    ch.with_noise(snr_db, seed ^ 0xA5A5_5A5A_C3C3_3C3C)
}

/// Adds circular complex white noise so that signal power over the active
/// range divided by noise power equals `snr_db`.
pub fn add_awgn<T: Real>(x: &ComplexSignal<T>, snr_db: f64, seed: u64) -> ComplexSignal<T> {
    let p = x.active_power().to_f64_lossy();
    let var = p / 10f64.powf(snr_db / 10.0);
    let mut rng = rng_from_seed(seed);
    let samples = x
        .samples
        .iter()
        .map(|&s| {
            let n = complex_gaussian(&mut rng, var);
            s + Complex::new(T::lit(n.re), T::lit(n.im))
        })
        .collect();
    x.map_samples(samples)
}

/// Applies fading then noise.
pub fn apply_channel<T: Real>(ch: &ChannelRealization, x: &ComplexSignal<T>) -> ComplexSignal<T> {
    let faded = match ch.kind {
        ChannelKind::Flat => x.scaled(Complex::new(T::lit(ch.alpha.re), T::lit(ch.alpha.im))),
        ChannelKind::Selective => {
            let taps: Vec<Complex<T>> = ch
                .taps
                .iter()
                .map(|t| Complex::new(T::lit(t.re), T::lit(t.im)))
                .collect();
            x.map_samples(convolve_truncated(&x.samples, &taps, &ch.delays))
        }
    };
    match ch.snr_db {
        Some(snr) if snr.is_finite() => add_awgn(&faded, snr, ch.seed),
        _ => faded,
    }
}
