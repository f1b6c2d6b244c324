//! Feature stability across receivers and across repeated frames.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{simulate_dataset, Dataset, HarnessError};
use super::stats::{centered_cosine, mean};
use crate::features::{cosine_similarity, ExtractorKind};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    /// Mean cosine similarity of the raw feature vectors.
    pub cosine: Option<f64>,
    /// Mean cosine similarity after removing each vector's mean.
    pub centered: Option<f64>,
    pub pairs: usize,
}

impl Similarity {
    fn from_pairs(pairs: &[(&[f64], &[f64])]) -> Self {
        let raw: Vec<f64> = pairs.iter().map(|(a, b)| cosine_similarity(a, b)).collect();
        let cen: Vec<f64> = pairs.iter().map(|(a, b)| centered_cosine(a, b)).collect();
        Self {
            cosine: mean(&raw),
            centered: mean(&cen),
            pairs: pairs.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceStability {
    pub device: String,
    pub cross_receiver: Similarity,
    pub trial_to_trial: Similarity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorStability {
    pub extractor: ExtractorKind,
    pub cross_receiver: Similarity,
    pub trial_to_trial: Similarity,
    pub per_device: Vec<DeviceStability>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub snr_db: Option<f64>,
    pub extractors: Vec<ExtractorStability>,
}

impl StabilityReport {
    pub fn get(&self, kind: ExtractorKind) -> Option<&ExtractorStability> {
        self.extractors.iter().find(|e| e.extractor == kind)
    }
}

type Pairs<'a> = Vec<(&'a [f64], &'a [f64])>;

/// Cross-receiver pairs compare the same frame index of one device as seen
/// by two receivers; trial-to-trial pairs compare consecutive frames of one
/// link. Pairs with a dropped frame are skipped.
fn pairs_for(ds: &Dataset, kind: ExtractorKind, device: usize) -> (Pairs<'_>, Pairs<'_>) {
    let nr = ds.receivers.len();
    let feat = |r: usize, f: usize| -> Option<&[f64]> {
        ds.link(device, r).frames.get(f)?.as_ref().ok()?.get(&kind).map(|v| v.as_slice())
    };
    let frames = ds.link(device, 0).frames.len();
    let mut cross = Vec::new();
    let mut trial = Vec::new();
    for f in 0..frames {
        for a in 0..nr {
            for b in a + 1..nr {
                if let (Some(x), Some(y)) = (feat(a, f), feat(b, f)) {
                    cross.push((x, y));
                }
            }
        }
    }
    for r in 0..nr {
        for f in 1..frames {
            if let (Some(x), Some(y)) = (feat(r, f - 1), feat(r, f)) {
                trial.push((x, y));
            }
        }
    }
    (cross, trial)
}

pub fn stability_of(ds: &Dataset) -> StabilityReport {
    let extractors = ds
        .kinds
        .iter()
        .map(|&kind| {
            let mut all_cross = Vec::new();
            let mut all_trial = Vec::new();
            let per_device = (0..ds.devices.len())
                .map(|d| {
                    let (c, t) = pairs_for(ds, kind, d);
                    let s = DeviceStability {
                        device: ds.devices[d].clone(),
                        cross_receiver: Similarity::from_pairs(&c),
                        trial_to_trial: Similarity::from_pairs(&t),
                    };
                    all_cross.extend(c);
                    all_trial.extend(t);
                    s
                })
                .collect();
            ExtractorStability {
                extractor: kind,
                cross_receiver: Similarity::from_pairs(&all_cross),
                trial_to_trial: Similarity::from_pairs(&all_trial),
                per_device,
            }
        })
        .collect();
    StabilityReport {
        snr_db: ds.snr_db,
        extractors,
    }
}

/// Simulates every SNR point of `cfg` and reports feature stability.
pub fn run_feature_stability(cfg: &ExperimentConfig) -> Result<Vec<StabilityReport>, HarnessError> {
    cfg.validate()?;
    cfg.snr_points()
        .into_iter()
        .enumerate()
        .map(|(i, snr)| simulate_dataset(cfg, i, snr).map(|ds| stability_of(&ds)))
        .collect()
}
