//! Experiment configuration (JSON).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelKind, ChannelParams, Scenario};
use crate::classify::TrainConfig;
use crate::features::DvMode;
use crate::impairments::{sample_profile, DeviceProfile, ProfileRanges, Role};
use crate::preprocess::{DetectionMode, PreprocessConfig};
use crate::seed::{derive_seed, stream};
use crate::waveform::PreambleFormat;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid experiment configuration: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Devices or receivers: a count (profiles drawn from the master seed), a
/// list of profile seeds, or explicit profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSet {
    Count(usize),
    Seeds(Vec<u64>),
    Profiles(Vec<DeviceProfile>),
}

impl ProfileSet {
    /// Concrete profiles. Generated ones are labelled `{prefix}{index}`.
    pub fn resolve(
        &self,
        role: Role,
        prefix: &str,
        master_seed: u64,
        ranges: &ProfileRanges,
        field_distinct: bool,
    ) -> Vec<DeviceProfile> {
        let tag = match role {
            Role::Transmitter => stream::DEVICE_PROFILE,
            Role::Receiver => stream::RECEIVER_PROFILE,
        };
        let draw = |i: usize, seed: u64| {
            let mut p = sample_profile(seed, role, field_distinct, ranges);
            p.device_id = format!("{prefix}{i}");
            p
        };
        match self {
            ProfileSet::Count(n) => (0..*n)
                .map(|i| draw(i, derive_seed(master_seed, &[tag, i as u64])))
                .collect(),
            ProfileSet::Seeds(seeds) => seeds.iter().enumerate().map(|(i, &s)| draw(i, s)).collect(),
            ProfileSet::Profiles(p) => p.clone(),
        }
    }
}

/// One receiver label or several.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReceiverGroup {
    One(String),
    Many(Vec<String>),
}

impl ReceiverGroup {
    pub fn members(&self) -> Vec<String> {
        match self {
            ReceiverGroup::One(r) => vec![r.clone()],
            ReceiverGroup::Many(v) => v.clone(),
        }
    }

    pub fn label(&self) -> String {
        self.members().join("+")
    }
}

/// A single SNR, a sweep, or `null` for noiseless captures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSetting {
    Single(f64),
    Sweep(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExtractorFamily {
    #[serde(rename = "RD")]
    Rd,
    #[serde(rename = "HL")]
    Hl,
    #[serde(rename = "DV")]
    Dv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    pub scenario: Scenario,
    /// Overrides the scenario's tap preset.
    pub params: Option<ChannelParams>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Flat,
            params: None,
        }
    }
}

impl ChannelConfig {
    pub fn kind(&self) -> ChannelKind {
        self.scenario.kind()
    }

    pub fn params(&self) -> ChannelParams {
        self.params.clone().unwrap_or_else(|| self.scenario.params())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub devices: ProfileSet,
    pub receivers: ProfileSet,
    /// Id of the device used as the RD divisor. It is captured by every
    /// receiver and left out of the classified set.
    pub reference_device: Option<String>,
    pub channel: ChannelConfig,
    pub snr_db: Option<SnrSetting>,
    /// Frames per (device, receiver) link.
    pub frames_per_device: usize,
    pub extractors: Vec<ExtractorFamily>,
    /// Rows of the accuracy matrix; each row trains on the union of its
    /// receivers.
    pub train_receivers: Vec<ReceiverGroup>,
    pub test_receivers: Vec<String>,
    pub classifier: TrainConfig,
    pub repeats: usize,
    /// Share of each link's frames eligible for training in a repeat; the
    /// rest are eligible for testing.
    pub train_fraction: f64,
    pub master_seed: u64,
    pub format: PreambleFormat,
    pub preprocess: PreprocessConfig,
    pub profile_ranges: ProfileRanges,
    /// Whether transmitters carry a field-dependent (HT-LTF) response.
    pub field_distinct: bool,
    /// Restrict every profile to the linear, CFO-free regime.
    pub linearize: bool,
    /// Samples each FFT window is moved into its guard interval.
    pub window_backoff: usize,
    pub dv_mode: DvMode,
    /// Reference-device captures per receiver; RD divides by the mean
    /// magnitude spectrum.
    pub model_captures: usize,
    /// Devices tried as the RD reference by the reference sweep.
    pub reference_candidates: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            devices: ProfileSet::Count(4),
            receivers: ProfileSet::Count(2),
            reference_device: None,
            channel: ChannelConfig::default(),
            snr_db: Some(SnrSetting::Single(30.0)),
            frames_per_device: 200,
            extractors: vec![ExtractorFamily::Hl, ExtractorFamily::Dv],
            train_receivers: vec![ReceiverGroup::One("rx0".into())],
            test_receivers: vec!["rx1".into()],
            classifier: TrainConfig::default(),
            repeats: 5,
            train_fraction: 0.8,
            master_seed: 0,
            format: PreambleFormat::HTMF,
            preprocess: PreprocessConfig {
                mode: DetectionMode::Energy,
                ..PreprocessConfig::default()
            },
            profile_ranges: ProfileRanges::default(),
            field_distinct: true,
            linearize: false,
            window_backoff: 4,
            dv_mode: DvMode::default(),
            model_captures: 1,
            reference_candidates: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn snr_points(&self) -> Vec<Option<f64>> {
        match &self.snr_db {
            None => vec![None],
            Some(SnrSetting::Single(s)) => vec![Some(*s)],
            Some(SnrSetting::Sweep(v)) => v.iter().map(|s| Some(*s)).collect(),
        }
    }

    fn maybe_linear(&self, v: Vec<DeviceProfile>) -> Vec<DeviceProfile> {
        if self.linearize {
            v.iter().map(DeviceProfile::linearized).collect()
        } else {
            v
        }
    }

    pub fn device_profiles(&self) -> Vec<DeviceProfile> {
        self.maybe_linear(self.devices.resolve(
            Role::Transmitter,
            "dev",
            self.master_seed,
            &self.profile_ranges,
            self.field_distinct,
        ))
    }

    pub fn receiver_profiles(&self) -> Vec<DeviceProfile> {
        self.maybe_linear(self.receivers.resolve(Role::Receiver, "rx", self.master_seed, &self.profile_ranges, false))
    }

    pub fn wants(&self, f: ExtractorFamily) -> bool {
        self.extractors.contains(&f)
    }

    /// Rejects configurations that cannot run.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let devices = self.device_profiles();
        let receivers = self.receiver_profiles();
        if devices.len() < 2 {
            return invalid(format!("need at least 2 devices, got {}", devices.len()));
        }
        if receivers.is_empty() {
            return invalid("need at least one receiver");
        }
        for p in devices.iter().chain(&receivers) {
            p.validate()
                .map_err(|e| ConfigError::Invalid(format!("profile {}: {e}", p.device_id)))?;
        }
        let unique = |ids: Vec<&str>, what: &str| {
            let mut seen = std::collections::BTreeSet::new();
            match ids.into_iter().find(|id| !seen.insert(*id)) {
                Some(id) => invalid(format!("duplicate {what} id {id:?}")),
                None => Ok(()),
            }
        };
        unique(devices.iter().map(|d| d.device_id.as_str()).collect(), "device")?;
        unique(receivers.iter().map(|d| d.device_id.as_str()).collect(), "receiver")?;
        if self.extractors.is_empty() {
            return invalid("no extractors requested");
        }
        match (&self.reference_device, self.wants(ExtractorFamily::Rd)) {
            (None, true) => return invalid("RD requested but reference_device is not set"),
            (Some(r), _) if !devices.iter().any(|d| &d.device_id == r) => {
                return invalid(format!("reference_device {r:?} is not one of the devices"))
            }
            _ => {}
        }
        let classified = devices.len() - usize::from(self.reference_device.is_some());
        if classified < 2 {
            return invalid("need at least 2 devices besides the reference");
        }
        if self.wants(ExtractorFamily::Hl) && !self.format.has_htltf() {
            return invalid("HL needs an HT-mixed preamble");
        }
        if self.frames_per_device == 0 {
            return invalid("frames_per_device must be positive");
        }
        if self.repeats == 0 {
            return invalid("repeats must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid(format!("train_fraction {} outside (0, 1)", self.train_fraction));
        }
        if self.model_captures == 0 {
            return invalid("model_captures must be positive");
        }
        for s in self.snr_points().into_iter().flatten() {
            if !s.is_finite() {
                return invalid(format!("SNR {s} is not finite"));
            }
        }
        if let Some(SnrSetting::Sweep(v)) = &self.snr_db {
            if v.is_empty() {
                return invalid("empty SNR sweep");
            }
        }
        let rx_ids: Vec<&str> = receivers.iter().map(|r| r.device_id.as_str()).collect();
        let known = |r: &String| -> Result<(), ConfigError> {
            if rx_ids.contains(&r.as_str()) {
                Ok(())
            } else {
                invalid(format!("unknown receiver {r:?} (known: {})", rx_ids.join(", ")))
            }
        };
        for g in &self.train_receivers {
            if g.members().is_empty() {
                return invalid("empty training receiver group");
            }
            g.members().iter().try_for_each(known)?;
        }
        self.test_receivers.iter().try_for_each(known)?;
        let ch = self.channel.params();
        if self.channel.kind() == ChannelKind::Selective && (ch.taps == 0 || !(ch.decay > 0.0)) {
            return invalid("selective channel needs taps >= 1 and decay > 0");
        }
        for c in &self.reference_candidates {
            if !devices.iter().any(|d| &d.device_id == c) {
                return invalid(format!("reference candidate {c:?} is not one of the devices"));
            }
        }
        self.classifier
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
