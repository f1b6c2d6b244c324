//! Cross-receiver classification experiments.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, ExperimentConfig, ExtractorFamily};
use super::pipeline::{
    extract_features, frame_spectra, simulate_capture, FrameFeatures, ModelSignal, PipelineError, LEAD_JITTER,
    LEAD_PAD,
};
use super::stats::{mean, std_dev};
use crate::channel::{sample_channel, ChannelRealization};
use crate::classify::{evaluate, evaluate_fused, train, ClassifyError, SoftmaxModel};
use crate::features::{ExtractorKind, FeatureVector};
use crate::impairments::DeviceProfile;
use crate::io::FeatureRow;
use crate::signal::ComplexSignal;
use crate::seed::{derive_seed, rng_from_seed, stream};
use crate::waveform::{occupied_tones, TrainingField};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// How every random draw is seeded; echoed in reports.
pub const SEED_SCHEME: &str = "seed = splitmix64 fold of master_seed over a path: \
device profile [1, device], receiver profile [2, receiver], \
link channel [3, device, receiver] (mobile: [3, device, receiver, frame]), \
frame noise and timing [4, snr, device, receiver, frame], \
reference capture channel [5, receiver], reference capture noise [5, snr, receiver, capture], \
train/test split [6, snr, repeat, device, receiver], classifier [7, snr, repeat, row]";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("receiver {receiver}: no usable reference capture ({reason})")]
    ModelCapture { receiver: String, reason: String },
    #[error("{context}: {source}")]
    Classify {
        context: String,
        #[source]
        source: ClassifyError,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Label used for the fused RD accuracy.
pub const RD_FUSED: &str = "RD";

pub fn kinds_for(families: &[ExtractorFamily]) -> Vec<ExtractorKind> {
    let mut v = Vec::new();
    for f in families {
        match f {
            ExtractorFamily::Rd => v.extend([ExtractorKind::RdStf, ExtractorKind::RdLtf]),
            ExtractorFamily::Hl => v.push(ExtractorKind::Hl),
            ExtractorFamily::Dv => v.push(ExtractorKind::Dv),
        }
    }
    v.sort();
    v.dedup();
    v
}

/// Per-link frames of one SNR point. `frames[f]` holds the stage error when
/// frame `f` was dropped.
#[derive(Debug)]
pub struct Link {
    pub device: usize,
    pub receiver: usize,
    pub frames: Vec<Result<FrameFeatures, PipelineError>>,
}

#[derive(Debug)]
pub struct Dataset {
    pub snr_index: usize,
    pub snr_db: Option<f64>,
    pub devices: Vec<String>,
    pub receivers: Vec<String>,
    pub scenario: String,
    pub kinds: Vec<ExtractorKind>,
    /// Device-major over the classified devices.
    pub links: Vec<Link>,
    pub model_captures: Vec<ModelCaptureInfo>,
}

impl Dataset {
    pub fn link(&self, device: usize, receiver: usize) -> &Link {
        &self.links[device * self.receivers.len() + receiver]
    }

    /// Feature table rows of one extractor, ordered by device, receiver,
    /// frame. Dropped frames are skipped.
    pub fn rows(&self, kind: ExtractorKind) -> Vec<FeatureRow> {
        let mut out = Vec::new();
        for l in &self.links {
            for (f, fr) in l.frames.iter().enumerate() {
                if let Ok(feats) = fr {
                    if let Some(v) = feats.get(&kind) {
                        out.push(FeatureRow {
                            extractor: kind,
                            device: self.devices[l.device].clone(),
                            receiver: self.receivers[l.receiver].clone(),
                            channel_scenario: self.scenario.clone(),
                            trial: f as u64,
                            snr_db: self.snr_db,
                            values: v.clone(),
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCaptureInfo {
    pub receiver: String,
    pub captured: usize,
    pub failed: usize,
}

fn link_channel(cfg: &ExperimentConfig, d: usize, r: usize, f: usize) -> ChannelRealization {
    let path: Vec<u64> = if cfg.channel.scenario.per_frame() {
        vec![stream::LINK_CHANNEL, d as u64, r as u64, f as u64]
    } else {
        vec![stream::LINK_CHANNEL, d as u64, r as u64]
    };
    sample_channel(cfg.channel.kind(), None, derive_seed(cfg.master_seed, &path), &cfg.channel.params())
}

/// One reference capture on receiver `r`: the channel is fixed per
/// receiver, the noise and timing per capture.
pub fn simulate_model_capture(
    cfg: &ExperimentConfig,
    snr_index: usize,
    snr: Option<f64>,
    reference: &DeviceProfile,
    r: usize,
    rx: &DeviceProfile,
    capture: usize,
) -> ComplexSignal<f64> {
    let ch = sample_channel(
        cfg.channel.kind(),
        None,
        derive_seed(cfg.master_seed, &[stream::MODEL_CAPTURE, r as u64]),
        &cfg.channel.params(),
    );
    let seed = derive_seed(
        cfg.master_seed,
        &[stream::MODEL_CAPTURE, snr_index as u64, r as u64, capture as u64],
    );
    let lead = LEAD_PAD + (seed % LEAD_JITTER as u64) as usize;
    simulate_capture::<f64>(cfg.format, reference, rx, &ch.with_noise(snr, seed), lead)
}

/// Frame `f` of device `d` (index into the full device list) on receiver
/// `r`.
pub fn simulate_frame(
    cfg: &ExperimentConfig,
    snr_index: usize,
    snr: Option<f64>,
    (d, device): (usize, &DeviceProfile),
    (r, rx): (usize, &DeviceProfile),
    f: usize,
) -> ComplexSignal<f64> {
    let seed = derive_seed(cfg.master_seed, &[stream::FRAME, snr_index as u64, d as u64, r as u64, f as u64]);
    let lead = LEAD_PAD + (seed % LEAD_JITTER as u64) as usize;
    let ch = link_channel(cfg, d, r, f).with_noise(snr, seed);
    simulate_capture::<f64>(cfg.format, device, rx, &ch, lead)
}

fn capture_model(
    cfg: &ExperimentConfig,
    snr_index: usize,
    snr: Option<f64>,
    reference: &DeviceProfile,
    r: usize,
    rx: &DeviceProfile,
) -> (Option<ModelSignal<f64>>, ModelCaptureInfo) {
    let mut ok = Vec::new();
    let mut failed = 0;
    for c in 0..cfg.model_captures {
        let y = simulate_model_capture(cfg, snr_index, snr, reference, r, rx, c);
        match frame_spectra(&y, &cfg.preprocess, cfg.window_backoff, cfg.format) {
            Ok(s) => ok.push(s),
            Err(_) => failed += 1,
        }
    }
    let info = ModelCaptureInfo {
        receiver: rx.device_id.clone(),
        captured: ok.len(),
        failed,
    };
    (ModelSignal::from_captures(rx.device_id.clone(), &ok), info)
}

/// Simulates and extracts every (device, receiver, frame) of one SNR point.
/// The reference device, if any, is captured once per receiver and not
/// simulated as a classified device.
pub fn simulate_dataset(cfg: &ExperimentConfig, snr_index: usize, snr: Option<f64>) -> Result<Dataset, HarnessError> {
    let all_devices = cfg.device_profiles();
    let receivers = cfg.receiver_profiles();
    let kinds = kinds_for(&cfg.extractors);
    let reference = cfg
        .reference_device
        .as_ref()
        .and_then(|id| all_devices.iter().find(|d| &d.device_id == id));
    // Seeds are keyed by the device's position in the full set so that a
    // device sees the same links whichever device is the reference.
    let devices: Vec<(usize, &DeviceProfile)> = all_devices
        .iter()
        .enumerate()
        .filter(|(_, d)| Some(&d.device_id) != cfg.reference_device.as_ref())
        .collect();

    let needs_model = kinds.iter().any(|k| matches!(k, ExtractorKind::RdStf | ExtractorKind::RdLtf));
    let mut models: Vec<Option<ModelSignal<f64>>> = vec![None; receivers.len()];
    let mut model_info = Vec::new();
    if needs_model {
        let reference = reference.ok_or_else(|| HarnessError::Invalid("RD without a reference device".into()))?;
        for (r, rx) in receivers.iter().enumerate() {
            let (m, info) = capture_model(cfg, snr_index, snr, reference, r, rx);
            if m.is_none() {
                return Err(HarnessError::ModelCapture {
                    receiver: rx.device_id.clone(),
                    reason: format!("{} of {} captures failed", info.failed, cfg.model_captures),
                });
            }
            models[r] = m;
            model_info.push(info);
        }
    }

    let jobs: Vec<(usize, usize, usize)> = (0..devices.len())
        .flat_map(|d| (0..receivers.len()).flat_map(move |r| (0..cfg.frames_per_device).map(move |f| (d, r, f))))
        .collect();
    let results: Vec<Result<FrameFeatures, PipelineError>> = jobs
        .par_iter()
        .map(|&(d, r, f)| {
            let y = simulate_frame(cfg, snr_index, snr, devices[d], (r, &receivers[r]), f);
            let spectra = frame_spectra(&y, &cfg.preprocess, cfg.window_backoff, cfg.format)?;
            let model = models[r].as_ref();
            if let Some(m) = model {
                // RD divisors never cross receivers
                assert_eq!(m.receiver, receivers[r].device_id);
            }
            extract_features(&spectra, model, &kinds, cfg.dv_mode)
        })
        .collect();

    let mut links = Vec::with_capacity(devices.len() * receivers.len());
    let mut it = results.into_iter();
    for d in 0..devices.len() {
        for r in 0..receivers.len() {
            links.push(Link {
                device: d,
                receiver: r,
                frames: it.by_ref().take(cfg.frames_per_device).collect(),
            });
        }
    }
    Ok(Dataset {
        snr_index,
        snr_db: snr,
        devices: devices.iter().map(|(_, d)| d.device_id.clone()).collect(),
        receivers: receivers.iter().map(|r| r.device_id.clone()).collect(),
        scenario: cfg.channel.scenario.label().to_string(),
        kinds,
        links,
        model_captures: model_info,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropCell {
    pub device: String,
    pub receiver: String,
    pub frames: usize,
    pub dropped: usize,
    pub drop_rate: f64,
    pub by_stage: BTreeMap<String, usize>,
}

pub fn drop_cells(ds: &Dataset) -> Vec<DropCell> {
    ds.links
        .iter()
        .map(|l| {
            let mut by_stage = BTreeMap::new();
            for e in l.frames.iter().filter_map(|f| f.as_ref().err()) {
                *by_stage.entry(e.stage().to_string()).or_insert(0) += 1;
            }
            let dropped = by_stage.values().sum();
            DropCell {
                device: ds.devices[l.device].clone(),
                receiver: ds.receivers[l.receiver].clone(),
                frames: l.frames.len(),
                dropped,
                drop_rate: dropped as f64 / l.frames.len().max(1) as f64,
                by_stage,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    /// `None` when no test frames survived.
    pub mean: Option<f64>,
    pub std: f64,
    pub accuracies: Vec<f64>,
    pub test_samples: usize,
}

/// Rows are training receiver groups, columns test receivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    pub extractor: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub repeats: usize,
    pub cells: Vec<Vec<AccuracyCell>>,
}

impl AccuracyMatrix {
    /// Mean over all cells that have a value.
    pub fn overall_mean(&self) -> Option<f64> {
        mean(&self.cells.iter().flatten().filter_map(|c| c.mean).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrRun {
    pub snr_db: Option<f64>,
    pub drops: Vec<DropCell>,
    pub overall_drop_rate: f64,
    pub model_captures: Vec<ModelCaptureInfo>,
    pub matrices: Vec<AccuracyMatrix>,
}

impl SnrRun {
    pub fn matrix(&self, extractor: &str) -> Option<&AccuracyMatrix> {
        self.matrices.iter().find(|m| m.extractor == extractor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub seed_scheme: String,
    pub config: ExperimentConfig,
    pub devices: Vec<String>,
    pub classified_devices: Vec<String>,
    pub receivers: Vec<String>,
    pub runs: Vec<SnrRun>,
}

/// Per-link train and test frame indices for one repeat.
fn split_link(cfg: &ExperimentConfig, ds: &Dataset, repeat: usize, link: &Link) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..link.frames.len()).collect();
    let seed = derive_seed(
        cfg.master_seed,
        &[stream::SPLIT, ds.snr_index as u64, repeat as u64, link.device as u64, link.receiver as u64],
    );
    idx.shuffle(&mut rng_from_seed(seed));
    let n_train = (cfg.train_fraction * idx.len() as f64).round() as usize;
    let (a, b) = idx.split_at(n_train.min(idx.len()));
    let keep = |v: &[usize]| {
        let mut v: Vec<usize> = v.iter().copied().filter(|&f| link.frames[f].is_ok()).collect();
        v.sort_unstable();
        v
    };
    (keep(a), keep(b))
}

fn tones(kind: ExtractorKind) -> Vec<i32> {
    match kind {
        ExtractorKind::RdStf | ExtractorKind::Dv => occupied_tones(TrainingField::LSTF),
        _ => occupied_tones(TrainingField::LLTF),
    }
}

fn samples(ds: &Dataset, picks: &[(usize, Vec<usize>)], kind: ExtractorKind) -> Vec<FeatureVector<f64>> {
    let mut out = Vec::new();
    for (li, frames) in picks {
        let link = &ds.links[*li];
        for &f in frames {
            if let Ok(feats) = &link.frames[f] {
                out.push(FeatureVector {
                    extractor: kind,
                    values: feats[&kind].clone(),
                    tone_indices: tones(kind),
                    device_hint: Some(ds.devices[link.device].clone()),
                });
            }
        }
    }
    out
}

/// Trains per row and evaluates per column for every repeat.
pub fn evaluate_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<AccuracyMatrix>, HarnessError> {
    let rx_index = |name: &str| ds.receivers.iter().position(|r| r == name).expect("validated receiver");
    let mut labels: Vec<String> = ds.kinds.iter().map(|k| k.to_string()).collect();
    let fused = ds.kinds.contains(&ExtractorKind::RdStf) && ds.kinds.contains(&ExtractorKind::RdLtf);
    if fused {
        labels.insert(0, RD_FUSED.to_string());
    }
    let rows = cfg.train_receivers.len();
    let cols = cfg.test_receivers.len();
    // acc[label][row][col] -> per-repeat accuracies, plus test sizes
    let mut acc: BTreeMap<String, Vec<Vec<Vec<f64>>>> =
        labels.iter().map(|l| (l.clone(), vec![vec![Vec::new(); cols]; rows])).collect();
    let mut sizes: BTreeMap<String, Vec<Vec<usize>>> = labels.iter().map(|l| (l.clone(), vec![vec![0; cols]; rows])).collect();

    for repeat in 0..cfg.repeats {
        let splits: Vec<(Vec<usize>, Vec<usize>)> = ds.links.iter().map(|l| split_link(cfg, ds, repeat, l)).collect();
        for (row, group) in cfg.train_receivers.iter().enumerate() {
            let members: Vec<usize> = group.members().iter().map(|m| rx_index(m)).collect();
            let train_picks: Vec<(usize, Vec<usize>)> = ds
                .links
                .iter()
                .enumerate()
                .filter(|(_, l)| members.contains(&l.receiver))
                .map(|(i, _)| (i, splits[i].0.clone()))
                .collect();
            let mut tc = cfg.classifier.clone();
            tc.seed = derive_seed(cfg.master_seed, &[stream::TRAIN, ds.snr_index as u64, repeat as u64, row as u64]);
            let context = |k: &str| format!("repeat {repeat}, training on {}, {k}", group.label());
            // A training set emptied by dropped frames leaves its cells
            // without a value instead of aborting the run.
            let models: BTreeMap<ExtractorKind, SoftmaxModel<f64>> = ds
                .kinds
                .par_iter()
                .filter_map(|&k| match train(&samples(ds, &train_picks, k), &tc) {
                    Ok(m) => Some(Ok((k, m))),
                    Err(ClassifyError::Empty | ClassifyError::TooFewClasses(_)) => None,
                    Err(source) => Some(Err(HarnessError::Classify {
                        context: context(k.as_str()),
                        source,
                    })),
                })
                .collect::<Result<_, _>>()?;
            for (col, test_rx) in cfg.test_receivers.iter().enumerate() {
                let r = rx_index(test_rx);
                let test_picks: Vec<(usize, Vec<usize>)> = ds
                    .links
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.receiver == r)
                    .map(|(i, _)| (i, splits[i].1.clone()))
                    .collect();
                for &k in &ds.kinds {
                    let test = samples(ds, &test_picks, k);
                    sizes.get_mut(k.as_str()).unwrap()[row][col] = test.len();
                    if let (false, Some(model)) = (test.is_empty(), models.get(&k)) {
                        let a = evaluate(model, &test).map_err(|source| HarnessError::Classify {
                            context: context(k.as_str()),
                            source,
                        })?;
                        acc.get_mut(k.as_str()).unwrap()[row][col].push(a);
                    }
                }
                let fused_models = (models.get(&ExtractorKind::RdStf), models.get(&ExtractorKind::RdLtf));
                if let (true, Some(ma), Some(mb)) = (fused, fused_models.0, fused_models.1) {
                    let a = samples(ds, &test_picks, ExtractorKind::RdStf);
                    let b = samples(ds, &test_picks, ExtractorKind::RdLtf);
                    let pairs: Vec<_> = a.into_iter().zip(b).collect();
                    sizes.get_mut(RD_FUSED).unwrap()[row][col] = pairs.len();
                    if !pairs.is_empty() {
                        let v = evaluate_fused((ma, mb), &pairs).map_err(|source| HarnessError::Classify {
                            context: context(RD_FUSED),
                            source,
                        })?;
                        acc.get_mut(RD_FUSED).unwrap()[row][col].push(v);
                    }
                }
            }
        }
    }

    Ok(labels
        .iter()
        .map(|l| AccuracyMatrix {
            extractor: l.clone(),
            rows: cfg.train_receivers.iter().map(|g| g.label()).collect(),
            columns: cfg.test_receivers.clone(),
            repeats: cfg.repeats,
            cells: acc[l]
                .iter()
                .zip(&sizes[l])
                .map(|(row, sz)| {
                    row.iter()
                        .zip(sz)
                        .map(|(v, &n)| AccuracyCell {
                            mean: mean(v),
                            std: std_dev(v),
                            accuracies: v.clone(),
                            test_samples: n,
                        })
                        .collect()
                })
                .collect(),
        })
        .collect())
}

/// Output of [`run_experiment`]: the report plus the per-SNR datasets for
/// feature-table export.
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub datasets: Vec<Dataset>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let mut datasets = Vec::new();
    for (i, snr) in cfg.snr_points().into_iter().enumerate() {
        let ds = simulate_dataset(cfg, i, snr)?;
        let drops = drop_cells(&ds);
        let total: usize = drops.iter().map(|d| d.frames).sum();
        let dropped: usize = drops.iter().map(|d| d.dropped).sum();
        runs.push(SnrRun {
            snr_db: snr,
            overall_drop_rate: dropped as f64 / total.max(1) as f64,
            drops,
            model_captures: ds.model_captures.clone(),
            matrices: evaluate_dataset(cfg, &ds)?,
        });
        datasets.push(ds);
    }
    let devices: Vec<String> = cfg.device_profiles().into_iter().map(|d| d.device_id).collect();
    Ok(ExperimentOutput {
        report: ExperimentReport {
            format_version: REPORT_FORMAT_VERSION,
            seed_scheme: SEED_SCHEME.to_string(),
            config: cfg.clone(),
            classified_devices: datasets.first().map(|d| d.devices.clone()).unwrap_or_default(),
            devices,
            receivers: cfg.receiver_profiles().into_iter().map(|r| r.device_id).collect(),
            runs,
        },
        datasets,
    })
}
