//! Reference-device sweep: low-frequency energy ratio of each candidate's
//! CSI amplitude against the RD accuracy obtained with it as reference.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExtractorFamily};
use super::experiment::{evaluate_dataset, simulate_dataset, simulate_model_capture, HarnessError, RD_FUSED};
use super::pipeline::frame_spectra;
use super::stats::pearson;
use crate::refselect::eta_lf;
use crate::signal::tone_to_bin;
use crate::waveform::{ideal_symbol_spectrum, occupied_tones, TrainingField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub device: String,
    pub eta_lf: f64,
    /// Mean fused RD accuracy over the accuracy matrix and repeats.
    pub rd_accuracy: Option<f64>,
    pub csi_amplitude: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub snr_db: Option<f64>,
    /// Receiver whose capture gave the CSI amplitude.
    pub csi_receiver: String,
    pub candidates: Vec<CandidateResult>,
    pub pearson_r: Option<f64>,
    pub p_value: Option<f64>,
    /// Candidate with the largest low-frequency ratio.
    pub selected: Option<String>,
}

/// `|Y_k / X_k|` over the L-LTF tones of `device` captured on `receiver`,
/// using the reference-capture channel and noise streams.
pub fn csi_amplitude(
    cfg: &ExperimentConfig,
    snr_index: usize,
    snr: Option<f64>,
    device: &str,
    receiver: &str,
) -> Result<Vec<f64>, HarnessError> {
    let devs = cfg.device_profiles();
    let rxs = cfg.receiver_profiles();
    let tx = devs
        .iter()
        .find(|d| d.device_id == device)
        .ok_or_else(|| HarnessError::Invalid(format!("unknown device {device:?}")))?;
    let r = rxs
        .iter()
        .position(|d| d.device_id == receiver)
        .ok_or_else(|| HarnessError::Invalid(format!("unknown receiver {receiver:?}")))?;
    let y = simulate_model_capture(cfg, snr_index, snr, tx, r, &rxs[r], 0);
    let s = frame_spectra(&y, &cfg.preprocess, cfg.window_backoff, cfg.format).map_err(|e| {
        HarnessError::ModelCapture {
            receiver: receiver.to_string(),
            reason: format!("CSI capture of {device}: {e}"),
        }
    })?;
    let x = ideal_symbol_spectrum::<f64>(TrainingField::LLTF);
    Ok(occupied_tones(TrainingField::LLTF)
        .into_iter()
        .map(|t| (s.lltf.bins[tone_to_bin(t)] / x[tone_to_bin(t)]).norm())
        .collect())
}

/// Runs the RD experiment once per candidate reference at the first SNR
/// point and correlates accuracy with the candidate's low-frequency ratio.
pub fn run_reference_sweep(cfg: &ExperimentConfig) -> Result<SweepReport, HarnessError> {
    cfg.validate()?;
    if cfg.reference_candidates.len() < 3 {
        return Err(HarnessError::Invalid(format!(
            "reference sweep needs at least 3 candidates, got {}",
            cfg.reference_candidates.len()
        )));
    }
    let snr = cfg.snr_points()[0];
    let csi_receiver = cfg.train_receivers[0].members()[0].clone();
    let mut candidates = Vec::new();
    for c in &cfg.reference_candidates {
        let mut run = cfg.clone();
        run.reference_device = Some(c.clone());
        run.extractors = vec![ExtractorFamily::Rd];
        run.validate()?;
        let csi = csi_amplitude(&run, 0, snr, c, &csi_receiver)?;
        let score = eta_lf(c.clone(), &csi).map_err(|e| HarnessError::Invalid(format!("candidate {c}: {e}")))?;
        let ds = simulate_dataset(&run, 0, snr)?;
        let matrices = evaluate_dataset(&run, &ds)?;
        let rd_accuracy = matrices
            .iter()
            .find(|m| m.extractor == RD_FUSED)
            .and_then(|m| m.overall_mean());
        candidates.push(CandidateResult {
            device: c.clone(),
            eta_lf: score.eta_lf,
            rd_accuracy,
            csi_amplitude: csi,
        });
    }
    let paired: Vec<(f64, f64)> = candidates
        .iter()
        .filter_map(|c| c.rd_accuracy.map(|a| (c.eta_lf, a)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = paired.into_iter().unzip();
    let corr = pearson(&x, &y);
    let selected = candidates
        .iter()
        .fold(None::<&CandidateResult>, |best, c| match best {
            Some(b) if b.eta_lf >= c.eta_lf => Some(b),
            _ => Some(c),
        })
        .map(|c| c.device.clone());
    Ok(SweepReport {
        snr_db: snr,
        csi_receiver,
        candidates,
        pearson_r: corr.map(|c| c.0),
        p_value: corr.map(|c| c.1),
        selected,
    })
}
