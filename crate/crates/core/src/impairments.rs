//! Transmitter and receiver hardware impairment models.
//!
//! Transmitter chain (signal order):
//!
//! ```text
//! HT-LTF band tilt -> FIR -> + DC -> IQ imbalance -> PA -> CFO rotation
//! ```
//!
//! The receiver mirrors it: the local oscillator mixes first, then PA
//! (LNA compression), IQ imbalance, DC and finally the FIR.
//!
//! Division features cancel the hardware response exactly only when the
//! chain acts as a per-tone multiplier on the known training sequence.
//! That holds for the *linearised* profiles produced by
//! [`DeviceProfile::linearized`]: no DC, a unity PA, zero CFO, and (on the
//! receiver side) no IQ imbalance. Transmitter IQ imbalance is kept there
//! because it acts on a fixed sequence ahead of every other linear stage.
//! A non-zero net CFO rotates the signal before the receiver FIR, so the
//! receiver response is seen shifted by the CFO; this is physical and
//! perturbs the features at the `|h_k| * 2 pi * cfo * k / fs` level.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_from_seed;
use crate::signal::{convolve_truncated, fft, frequency_shift, ifft, ComplexSignal, FFT_SIZE};
use crate::waveform::{HTLTF_CP, HTLTF_LEN, LLTF_LEN, LSTF_LEN};
use crate::{Complex64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Transmitter,
    Receiver,
}

/// Smooth gain over tone index, applied to the HT-LTF only.
///
/// `gain_db(k) = sum_m coeffs_db[m] * (k / 26)^(m + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandTilt {
    pub coeffs_db: Vec<f64>,
}

impl BandTilt {
    pub fn gain_db(&self, tone: i32) -> f64 {
        let u = tone as f64 / 26.0;
        self.coeffs_db
            .iter()
            .enumerate()
            .map(|(m, c)| c * u.powi(m as i32 + 1))
            .sum()
    }

    pub fn gain(&self, tone: i32) -> f64 {
        10f64.powf(self.gain_db(tone) / 20.0)
    }
}

/// Hardware impairment set of one transmitter or receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub role: Role,
    pub dc_offset: Complex64,
    /// Q-arm to I-arm amplitude ratio.
    pub iq_gain_imbalance: f64,
    /// Quadrature skew in radians.
    pub iq_phase_imbalance: f64,
    pub fir_taps: Vec<Complex64>,
    /// Odd-order PA polynomial: `y = sum_m a_m x |x|^(2m)`.
    pub pa_coeffs: Vec<Complex64>,
    pub cfo_hz: f64,
    #[serde(default)]
    pub band_tilt: Option<BandTilt>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("profile {0}: FIR tap list is empty")]
    EmptyFir(String),
    #[error("profile {0}: first FIR tap must be the largest")]
    FirNotLeading(String),
    #[error("profile {0}: IQ gain imbalance must be positive and finite")]
    BadGain(String),
    #[error("profile {0}: PA polynomial must start with unity gain")]
    PaNotUnity(String),
    #[error("profile {0}: receivers cannot carry a per-field band tilt")]
    ReceiverTilt(String),
    #[error("profile {0}: non-finite parameter")]
    NonFinite(String),
}

impl DeviceProfile {
    /// Profile that leaves every signal unchanged.
    pub fn identity(device_id: impl Into<String>, role: Role) -> Self {
        Self {
            device_id: device_id.into(),
            role,
            dc_offset: Complex64::new(0.0, 0.0),
            iq_gain_imbalance: 1.0,
            iq_phase_imbalance: 0.0,
            fir_taps: vec![Complex64::new(1.0, 0.0)],
            pa_coeffs: vec![Complex64::new(1.0, 0.0)],
            cfo_hz: 0.0,
            band_tilt: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let id = || self.device_id.clone();
        let finite_c = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !(finite_c(&self.dc_offset)
            && self.iq_phase_imbalance.is_finite()
            && self.cfo_hz.is_finite()
            && self.fir_taps.iter().all(finite_c)
            && self.pa_coeffs.iter().all(finite_c))
        {
            return Err(ProfileError::NonFinite(id()));
        }
        let lead = self.fir_taps.first().ok_or_else(|| ProfileError::EmptyFir(id()))?;
        if self.fir_taps.iter().any(|t| t.norm() > lead.norm()) {
            return Err(ProfileError::FirNotLeading(id()));
        }
        if !(self.iq_gain_imbalance > 0.0 && self.iq_gain_imbalance.is_finite()) {
            return Err(ProfileError::BadGain(id()));
        }
        if self.pa_coeffs.first() != Some(&Complex64::new(1.0, 0.0)) {
            return Err(ProfileError::PaNotUnity(id()));
        }
        if self.role == Role::Receiver && self.band_tilt.is_some() {
            return Err(ProfileError::ReceiverTilt(id()));
        }
        Ok(())
    }

    /// Copy restricted to the regime in which division features are exact.
    pub fn linearized(&self) -> Self {
        let mut p = self.clone();
        p.dc_offset = Complex64::new(0.0, 0.0);
        p.pa_coeffs = vec![Complex64::new(1.0, 0.0)];
        p.cfo_hz = 0.0;
        if p.role == Role::Receiver {
            p.iq_gain_imbalance = 1.0;
            p.iq_phase_imbalance = 0.0;
        }
        p
    }

    /// IQ imbalance as the widely-linear pair `y = mu x + nu conj(x)`.
    pub fn iq_coefficients(&self) -> (Complex64, Complex64) {
        let g = self.iq_gain_imbalance;
        let phi = self.iq_phase_imbalance;
        let mu = (Complex64::new(1.0, 0.0) + Complex64::from_polar(g, -phi)) * 0.5;
        let nu = (Complex64::new(1.0, 0.0) - Complex64::from_polar(g, phi)) * 0.5;
        (mu, nu)
    }
}

fn cast<T: Real>(z: Complex64) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}

fn apply_fir<T: Real>(x: &[Complex<T>], taps: &[Complex64]) -> Vec<Complex<T>> {
    if taps.len() == 1 {
        let h = cast::<T>(taps[0]);
        return x.iter().map(|&s| s * h).collect();
    }
    let taps: Vec<Complex<T>> = taps.iter().map(|&t| cast(t)).collect();
    let delays: Vec<usize> = (0..taps.len()).collect();
    convolve_truncated(x, &taps, &delays)
}

fn apply_dc<T: Real>(x: &mut [Complex<T>], dc: Complex64) {
    if dc != Complex64::new(0.0, 0.0) {
        let dc = cast::<T>(dc);
        x.iter_mut().for_each(|s| *s = *s + dc);
    }
}

fn apply_iq<T: Real>(x: &mut [Complex<T>], p: &DeviceProfile) {
    let (mu, nu) = p.iq_coefficients();
    if nu == Complex64::new(0.0, 0.0) && mu == Complex64::new(1.0, 0.0) {
        return;
    }
    let (mu, nu) = (cast::<T>(mu), cast::<T>(nu));
    x.iter_mut().for_each(|s| *s = mu * *s + nu * s.conj());
}

fn apply_pa<T: Real>(x: &mut [Complex<T>], coeffs: &[Complex64]) {
    if coeffs.len() <= 1 {
        return;
    }
    let coeffs: Vec<Complex<T>> = coeffs.iter().map(|&c| cast(c)).collect();
    for s in x.iter_mut() {
        let r2 = s.norm_sqr();
        let mut pow = T::one();
        let mut gain = Complex::new(T::zero(), T::zero());
        for &a in &coeffs {
            gain = gain + a * pow;
            pow = pow * r2;
        }
        *s = *s * gain;
    }
}

/// Applies the per-field transmitter tilt to the HT-LTF of the frame.
/// The HT-LTF is cyclic, so the tilt is applied as an exact per-tone gain
/// on its symbol and the guard interval is regenerated.
fn apply_tilt<T: Real>(x: &mut [Complex<T>], signal: &ComplexSignal<T>, tilt: &BandTilt) {
    let Some(frame) = signal.frame else { return };
    if !frame.format.has_htltf() {
        return;
    }
    let start = frame.start + LSTF_LEN + LLTF_LEN;
    if start + HTLTF_LEN > x.len() {
        return;
    }
    let sym_start = start + HTLTF_CP;
    let mut spec = fft(&x[sym_start..sym_start + FFT_SIZE]);
    for (bin, v) in spec.iter_mut().enumerate() {
        let tone = if bin < FFT_SIZE / 2 { bin as i32 } else { bin as i32 - FFT_SIZE as i32 };
        *v = *v * T::lit(tilt.gain(tone));
    }
    let scale = T::one() / T::lit(FFT_SIZE as f64);
    let sym: Vec<Complex<T>> = ifft(&spec).into_iter().map(|z| z * scale).collect();
    x[start..start + HTLTF_CP].copy_from_slice(&sym[FFT_SIZE - HTLTF_CP..]);
    x[sym_start..sym_start + FFT_SIZE].copy_from_slice(&sym);
}

/// Passes an ideal frame through a transmitter.
pub fn apply_transmitter<T: Real>(profile: &DeviceProfile, x: &ComplexSignal<T>) -> ComplexSignal<T> {
    let mut s = x.samples.clone();
    if let Some(tilt) = &profile.band_tilt {
        apply_tilt(&mut s, x, tilt);
    }
    let mut s = apply_fir(&s, &profile.fir_taps);
    apply_dc(&mut s, profile.dc_offset);
    apply_iq(&mut s, profile);
    apply_pa(&mut s, &profile.pa_coeffs);
    if profile.cfo_hz != 0.0 {
        s = frequency_shift(&s, profile.cfo_hz, 0, x.sample_rate);
    }
    x.map_samples(s)
}

/// Passes a channel output through a receiver front end. The receiver's
/// oscillator offset is subtracted, so the net CFO downstream is
/// `tx.cfo_hz - rx.cfo_hz`.
pub fn apply_receiver<T: Real>(profile: &DeviceProfile, y: &ComplexSignal<T>) -> ComplexSignal<T> {
    let mut s = if profile.cfo_hz != 0.0 {
        frequency_shift(&y.samples, -profile.cfo_hz, 0, y.sample_rate)
    } else {
        y.samples.clone()
    };
    apply_pa(&mut s, &profile.pa_coeffs);
    apply_iq(&mut s, profile);
    apply_dc(&mut s, profile.dc_offset);
    let s = apply_fir(&s, &profile.fir_taps);
    y.map_samples(s)
}

/// Ranges `sample_profile` draws from. Defaults are typical consumer
/// hardware magnitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileRanges {
    /// Largest DC offset relative to unit signal power, dBc.
    pub dc_dbc_max: f64,
    /// Gain imbalance is uniform in +-this many dB.
    pub gain_imbalance_db: f64,
    /// Phase imbalance is uniform in +-this many degrees.
    pub phase_imbalance_deg: f64,
    pub fir_taps: usize,
    /// Secondary FIR taps are at most this many dB below the main tap.
    pub fir_secondary_db_max: f64,
    /// Magnitude bound on the third-order PA coefficient.
    pub pa_third_order_max: f64,
    pub cfo_hz_max: f64,
    /// Tilt polynomial coefficients are uniform in +-this many dB.
    pub tilt_db_max: f64,
    pub tilt_order: usize,
}

impl Default for ProfileRanges {
    fn default() -> Self {
        Self {
            dc_dbc_max: -30.0,
            gain_imbalance_db: 1.0,
            phase_imbalance_deg: 3.0,
            fir_taps: 3,
            fir_secondary_db_max: -20.0,
            pa_third_order_max: 0.01,
            cfo_hz_max: 200e3,
            tilt_db_max: 1.5,
            tilt_order: 3,
        }
    }
}

/// Draws a random profile. Receivers never carry a band tilt; transmitters
/// carry one only when `field_distinct` is set.
pub fn sample_profile(
    rng_seed: u64,
    role: Role,
    field_distinct: bool,
    ranges: &ProfileRanges,
) -> DeviceProfile {
    let mut rng = rng_from_seed(rng_seed);
    let phase = |rng: &mut rand_chacha::ChaCha8Rng| rng.random_range(0.0..std::f64::consts::TAU);
    let dc_mag = 10f64.powf(ranges.dc_dbc_max / 20.0) * rng.random::<f64>();
    let dc_offset = Complex64::from_polar(dc_mag, phase(&mut rng));
    let sym = |rng: &mut rand_chacha::ChaCha8Rng, half: f64| {
        if half > 0.0 {
            rng.random_range(-half..=half)
        } else {
            0.0
        }
    };
    let iq_gain_imbalance = 10f64.powf(sym(&mut rng, ranges.gain_imbalance_db) / 20.0);
    let iq_phase_imbalance = sym(&mut rng, ranges.phase_imbalance_deg).to_radians();
    let secondary = 10f64.powf(ranges.fir_secondary_db_max / 20.0);
    let mut fir_taps = vec![Complex64::new(1.0, 0.0)];
    for _ in 1..ranges.fir_taps.max(1) {
        let mag = secondary * rng.random::<f64>();
        fir_taps.push(Complex64::from_polar(mag, phase(&mut rng)));
    }
    // compressive third-order term with a small AM/PM component
    let pa3 = Complex64::from_polar(
        -ranges.pa_third_order_max * rng.random::<f64>(),
        rng.random_range(-0.3..=0.3),
    );
    let pa_coeffs = vec![Complex64::new(1.0, 0.0), pa3];
    let cfo_hz = sym(&mut rng, ranges.cfo_hz_max);
    let band_tilt = (role == Role::Transmitter && field_distinct).then(|| BandTilt {
        coeffs_db: (0..ranges.tilt_order)
            .map(|_| sym(&mut rng, ranges.tilt_db_max))
            .collect(),
    });
    DeviceProfile {
        device_id: format!("{}-{rng_seed:016x}", match role {
            Role::Transmitter => "tx",
            Role::Receiver => "rx",
        }),
        role,
        dc_offset,
        iq_gain_imbalance,
        iq_phase_imbalance,
        fir_taps,
        pa_coeffs,
        cfo_hz,
        band_tilt,
        seed: rng_seed,
    }
}
