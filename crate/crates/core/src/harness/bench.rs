//! `bench`: a full experiment plus stability statistics and, when
//! candidates are configured, a reference sweep, written as one report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, ExperimentReport, HarnessError, SnrRun};
use super::stability::{stability_of, StabilityReport};
use super::sweep::{run_reference_sweep, SweepReport};
use crate::io::{write_features, write_json, IoError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub experiment: ExperimentReport,
    pub stability: Vec<StabilityReport>,
    pub sweep: Option<SweepReport>,
}

pub struct BenchOutput {
    pub report: BenchReport,
    pub feature_tables: Vec<(String, Vec<crate::io::FeatureRow>)>,
}

pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchOutput, HarnessError> {
    let out = run_experiment(cfg)?;
    let stability = out.datasets.iter().map(stability_of).collect();
    let sweep = if cfg.reference_candidates.is_empty() {
        None
    } else {
        Some(run_reference_sweep(cfg)?)
    };
    let mut feature_tables = Vec::new();
    for ds in &out.datasets {
        let snr = ds.snr_db.map_or("noiseless".to_string(), |s| format!("{s}dB"));
        for &k in &ds.kinds {
            feature_tables.push((format!("features_{}_{snr}.csv", k.as_str()), ds.rows(k)));
        }
    }
    Ok(BenchOutput {
        report: BenchReport {
            experiment: out.report,
            stability,
            sweep,
        },
        feature_tables,
    })
}

/// One row per (SNR, extractor, training set, test receiver).
pub fn write_accuracy_csv(path: &Path, runs: &[SnrRun]) -> Result<(), IoError> {
    let err = |e: csv::Error| IoError::Invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["snr_db", "extractor", "train_set", "test_receiver", "mean", "std", "repeats", "test_samples"])
        .map_err(err)?;
    for run in runs {
        let snr = run.snr_db.map_or(String::new(), |s| format!("{s:?}"));
        for m in &run.matrices {
            for (row, cells) in m.rows.iter().zip(&m.cells) {
                for (col, c) in m.columns.iter().zip(cells) {
                    w.write_record([
                        snr.clone(),
                        m.extractor.clone(),
                        row.clone(),
                        col.clone(),
                        c.mean.map_or(String::new(), |v| format!("{v:?}")),
                        format!("{:?}", c.std),
                        c.accuracies.len().to_string(),
                        c.test_samples.to_string(),
                    ])
                    .map_err(err)?;
                }
            }
        }
    }
    w.flush().map_err(|e| IoError::Invalid(format!("{}: {e}", path.display())))
}

/// Writes `report.json`, `accuracy.csv` and the feature tables into
/// `out_dir`; returns the written paths.
pub fn write_bench(out_dir: &Path, out: &BenchOutput) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(out_dir).map_err(|e| IoError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();
    let p = out_dir.join("report.json");
    write_json(&p, &out.report)?;
    written.push(p);
    let p = out_dir.join("accuracy.csv");
    write_accuracy_csv(&p, &out.report.experiment.runs)?;
    written.push(p);
    for (name, rows) in &out.feature_tables {
        let p = out_dir.join(name);
        write_features(&p, rows)?;
        written.push(p);
    }
    Ok(written)
}
