//! Division-based, receiver-agnostic radio-frequency fingerprint (RFF)
//! extraction for 802.11 OFDM preambles.
//!
//! The crate is organised bottom-up:
//!
//! - [`waveform`]: ideal L-STF / L-LTF / HT-LTF preambles and symbol windows.
//! - [`impairments`]: transmitter and receiver hardware models.
//! - [`channel`]: flat and tap-delay fading plus AWGN.
//! - [`preprocess`]: detection, frame synchronisation, coarse/fine CFO.
//! - [`features`]: RD, HL and DV division features.
//! - [`refselect`]: the db4 low-frequency energy ratio used to rank
//!   reference devices.
//! - [`classify`]: a softmax classifier with two-branch score fusion.
//! - [`io`]: IQ recordings, feature tables and model files.
//! - [`harness`]: seeded end-to-end experiments.
//!
//! All signal math is generic over [`Real`] (`f32` or `f64`); the aliases
//! below pin the common `f64` instantiation.

pub mod channel;
pub mod classify;
pub mod features;
pub mod harness;
pub mod impairments;
pub mod io;
pub mod preprocess;
pub mod refselect;
pub mod scalar;
pub mod seed;
pub mod signal;
pub mod waveform;
pub mod wavelet;

pub use num_complex::Complex;
pub use scalar::Real;
pub use signal::{ComplexSignal, FrameLayout, FFT_SIZE, SAMPLE_RATE};

/// Complex sample in double precision.
pub type Complex64 = Complex<f64>;
/// Complex sample in single precision.
pub type Complex32 = Complex<f32>;

/// Baseband signal in double precision.
pub type Signal = ComplexSignal<f64>;
/// Baseband signal in single precision.
pub type Signal32 = ComplexSignal<f32>;

/// Feature vector in double precision.
pub type FeatureVec = features::FeatureVector<f64>;
/// Field spectrum in double precision.
pub type Spectrum = features::FieldSpectrum<f64>;
/// Softmax model in double precision.
pub type Model = classify::SoftmaxModel<f64>;
