use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rff_core::classify::{evaluate, evaluate_fused, train as fit};
use rff_core::features::{ExtractorKind, FeatureVector};
use rff_core::harness::experiment::{kinds_for, simulate_frame, simulate_model_capture};
use rff_core::harness::pipeline::{extract_features, frame_spectra, FrameSpectra, ModelSignal};
use rff_core::harness::{run_bench, write_bench, ExperimentConfig, ExtractorFamily, SnrSetting};
use rff_core::io::{
    load_model, read_csi_table, read_features, read_iq, save_model, write_features, write_iq, write_ref_scores,
    FeatureRow, IqMetadata,
};
use rff_core::refselect::rank_references;
use rff_core::{Model, SAMPLE_RATE};

use crate::{CliError, Common};

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn pipeline_err(e: impl std::fmt::Display) -> CliError {
    CliError::Pipeline(e.to_string())
}

/// Loads the configuration and applies flag overrides. Commands that only
/// use its processing settings call this directly.
fn load_settings(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(s) = c.snr_db {
        cfg.snr_db = Some(SnrSetting::Single(s));
    }
    if !c.extractor.is_empty() {
        let mut fams = Vec::new();
        for k in parse_kinds(&c.extractor)? {
            let f = match k {
                ExtractorKind::RdStf | ExtractorKind::RdLtf => ExtractorFamily::Rd,
                ExtractorKind::Hl => ExtractorFamily::Hl,
                ExtractorKind::Dv => ExtractorFamily::Dv,
            };
            if !fams.contains(&f) {
                fams.push(f);
            }
        }
        cfg.extractors = fams;
    }
    Ok(cfg)
}

/// [`load_settings`] plus validation of the whole experiment.
fn load_config(c: &Common) -> Result<ExperimentConfig, CliError> {
    let cfg = load_settings(c)?;
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

/// `RD` expands to both RD branches.
fn parse_kinds(names: &[String]) -> Result<Vec<ExtractorKind>, CliError> {
    let mut out = Vec::new();
    for n in names {
        let n = n.trim();
        let ks = match n.to_ascii_uppercase().as_str() {
            "RD" => vec![ExtractorKind::RdStf, ExtractorKind::RdLtf],
            _ => vec![n.parse::<ExtractorKind>().map_err(config_err)?],
        };
        for k in ks {
            if !out.contains(&k) {
                out.push(k);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn snr_label(snr: Option<f64>) -> String {
    snr.map_or("noiseless".into(), |s| format!("snr_{s}dB"))
}

pub fn simulate(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let devices = cfg.device_profiles();
    let receivers = cfg.receiver_profiles();
    let mut written = 0usize;
    for (si, snr) in cfg.snr_points().into_iter().enumerate() {
        let dir = c.out_dir.join(snr_label(snr));
        let meta = |labels: &[(&str, String)], frame| {
            let mut m = IqMetadata::new(SAMPLE_RATE);
            m.frame = frame;
            m.labels = labels.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            m.labels.insert("channel_scenario".into(), cfg.channel.scenario.label().into());
            if let Some(s) = snr {
                m.labels.insert("snr_db".into(), format!("{s:?}"));
            }
            m
        };
        if let Some(reference) = cfg.reference_device.as_ref().and_then(|id| devices.iter().find(|d| &d.device_id == id)) {
            for (r, rx) in receivers.iter().enumerate() {
                for cap in 0..cfg.model_captures {
                    let y = simulate_model_capture(&cfg, si, snr, reference, r, rx, cap);
                    let m = meta(
                        &[
                            ("role", "model".into()),
                            ("device", reference.device_id.clone()),
                            ("receiver", rx.device_id.clone()),
                            ("trial", cap.to_string()),
                        ],
                        y.frame,
                    );
                    let path = dir.join(format!("model__{}__{cap:04}.cf32", rx.device_id));
                    write_iq(&path, &y, &m).map_err(pipeline_err)?;
                    written += 1;
                }
            }
        }
        for (d, dev) in devices.iter().enumerate() {
            if Some(&dev.device_id) == cfg.reference_device.as_ref() {
                continue;
            }
            for (r, rx) in receivers.iter().enumerate() {
                for f in 0..cfg.frames_per_device {
                    let y = simulate_frame(&cfg, si, snr, (d, dev), (r, rx), f);
                    let m = meta(
                        &[
                            ("role", "frame".into()),
                            ("device", dev.device_id.clone()),
                            ("receiver", rx.device_id.clone()),
                            ("trial", f.to_string()),
                        ],
                        y.frame,
                    );
                    let path = dir.join(format!("{}__{}__{f:04}.cf32", dev.device_id, rx.device_id));
                    write_iq(&path, &y, &m).map_err(pipeline_err)?;
                    written += 1;
                }
            }
        }
    }
    println!("wrote {written} recordings under {}", c.out_dir.display());
    Ok(())
}

/// Recordings named directly or found (sorted) inside directories.
fn collect_recordings(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    fn walk(p: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
            entries.sort();
            for e in entries {
                walk(&e, out)?;
            }
        } else if matches!(p.extension().and_then(|e| e.to_str()), Some("cf32" | "ci16" | "iq")) {
            out.push(p.to_path_buf());
        }
        Ok(())
    }
    if inputs.is_empty() {
        return Err(config_err("no input recordings given"));
    }
    let mut out = Vec::new();
    for p in inputs {
        if !p.exists() {
            return Err(pipeline_err(format!("{}: no such file or directory", p.display())));
        }
        walk(p, &mut out).map_err(|e| pipeline_err(format!("{}: {e}", p.display())))?;
    }
    Ok(out)
}

pub fn extract(c: &Common, inputs: &[PathBuf]) -> Result<(), CliError> {
    let cfg = load_settings(c)?;
    let kinds = if c.extractor.is_empty() {
        kinds_for(&cfg.extractors)
    } else {
        parse_kinds(&c.extractor)?
    };
    let label = |m: &IqMetadata, k: &str| m.labels.get(k).cloned().unwrap_or_default();
    let mut frames = Vec::new();
    let mut captures: BTreeMap<String, Vec<FrameSpectra<f64>>> = BTreeMap::new();
    let mut dropped = 0usize;
    for path in collect_recordings(inputs)? {
        let rec = read_iq::<f64>(&path).map_err(pipeline_err)?;
        let spectra = frame_spectra(&rec.signal, &cfg.preprocess, cfg.window_backoff, cfg.format);
        let is_model = label(&rec.meta, "role") == "model";
        match spectra {
            Ok(s) if is_model => captures.entry(label(&rec.meta, "receiver")).or_default().push(s),
            Ok(s) => frames.push((rec.meta, s)),
            Err(e) => {
                dropped += 1;
                eprintln!("{}: dropped at {}: {e}", path.display(), e.stage());
            }
        }
    }
    let needs_model = kinds.iter().any(|k| matches!(k, ExtractorKind::RdStf | ExtractorKind::RdLtf));
    let models: BTreeMap<String, ModelSignal<f64>> = captures
        .iter()
        .filter_map(|(rx, caps)| ModelSignal::from_captures(rx.clone(), caps).map(|m| (rx.clone(), m)))
        .collect();
    let mut tables: BTreeMap<ExtractorKind, Vec<FeatureRow>> = kinds.iter().map(|&k| (k, Vec::new())).collect();
    for (meta, s) in &frames {
        let rx = label(meta, "receiver");
        let model = models.get(&rx);
        if needs_model && model.is_none() {
            return Err(pipeline_err(format!("no reference capture for receiver {rx:?}; RD needs one")));
        }
        let feats = match extract_features(s, model, &kinds, cfg.dv_mode) {
            Ok(f) => f,
            Err(e) => {
                dropped += 1;
                eprintln!("{} / {rx}: dropped at {}: {e}", label(meta, "device"), e.stage());
                continue;
            }
        };
        for (k, values) in feats {
            tables.get_mut(&k).unwrap().push(FeatureRow {
                extractor: k,
                device: label(meta, "device"),
                receiver: rx.clone(),
                channel_scenario: label(meta, "channel_scenario"),
                trial: label(meta, "trial").parse().unwrap_or(0),
                snr_db: meta.labels.get("snr_db").and_then(|s| s.parse().ok()),
                values,
            });
        }
    }
    for (k, rows) in &tables {
        let path = c.out_dir.join(format!("features_{}.csv", k.as_str()));
        write_features(&path, rows).map_err(pipeline_err)?;
        println!("{}: {} rows", path.display(), rows.len());
    }
    println!("{} frames, {dropped} dropped", frames.len() + dropped);
    Ok(())
}

pub fn select_ref(c: &Common, inputs: &[PathBuf]) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(config_err("no CSI table given"));
    }
    let mut candidates = Vec::new();
    for p in inputs {
        candidates.extend(read_csi_table(p).map_err(pipeline_err)?);
    }
    let ranked = rank_references(&candidates).map_err(pipeline_err)?;
    let path = c.out_dir.join("ref_scores.csv");
    write_ref_scores(&path, &ranked).map_err(pipeline_err)?;
    for (i, s) in ranked.iter().enumerate() {
        println!("{:>3}  {:<20} {:.6}", i + 1, s.device_id, s.eta_lf);
    }
    println!("selected: {}", ranked[0].device_id);
    Ok(())
}

fn read_tables(inputs: &[PathBuf], snr: Option<f64>) -> Result<Vec<FeatureRow>, CliError> {
    if inputs.is_empty() {
        return Err(config_err("no feature table given"));
    }
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_features(p).map_err(pipeline_err)?);
    }
    if let Some(s) = snr {
        rows.retain(|r| r.snr_db == Some(s));
    }
    Ok(rows)
}

pub fn train(c: &Common, inputs: &[PathBuf], receivers: &[String]) -> Result<(), CliError> {
    let cfg = load_settings(c)?;
    cfg.classifier.validate().map_err(config_err)?;
    let mut rows = read_tables(inputs, c.snr_db)?;
    if !receivers.is_empty() {
        rows.retain(|r| receivers.contains(&r.receiver));
    }
    let wanted = if c.extractor.is_empty() { None } else { Some(parse_kinds(&c.extractor)?) };
    let kinds: Vec<ExtractorKind> = {
        let mut k: Vec<ExtractorKind> = rows.iter().map(|r| r.extractor).collect();
        k.sort();
        k.dedup();
        k.retain(|k| wanted.as_ref().is_none_or(|w| w.contains(k)));
        k
    };
    if kinds.is_empty() {
        return Err(pipeline_err("no rows left to train on"));
    }
    let mut tc = cfg.classifier.clone();
    if let Some(s) = c.seed {
        tc.seed = s;
    }
    for k in kinds {
        let samples: Vec<FeatureVector<f64>> = rows.iter().filter(|r| r.extractor == k).map(FeatureRow::to_feature).collect();
        let model = fit(&samples, &tc).map_err(pipeline_err)?;
        let path = c.out_dir.join(format!("model_{}.json", k.as_str()));
        save_model(&path, &model).map_err(pipeline_err)?;
        println!(
            "{}: {} samples, {} classes, kept epoch {}",
            path.display(),
            samples.len(),
            model.classes.len(),
            model.best_epoch
        );
    }
    Ok(())
}

type RowKey = (String, String, u64, Option<u64>);

fn key(r: &FeatureRow) -> RowKey {
    (r.device.clone(), r.receiver.clone(), r.trial, r.snr_db.map(f64::to_bits))
}

pub fn eval(c: &Common, inputs: &[PathBuf], model_paths: &[PathBuf]) -> Result<(), CliError> {
    let models: Vec<Model> = model_paths.iter().map(|p| load_model(p).map_err(pipeline_err)).collect::<Result<_, _>>()?;
    let rows = read_tables(inputs, c.snr_db)?;
    let train_set = model_paths[0].file_stem().map_or(String::new(), |s| s.to_string_lossy().into_owned());
    let mut receivers: Vec<String> = rows.iter().map(|r| r.receiver.clone()).collect();
    receivers.sort();
    receivers.dedup();
    let mut out = Vec::new();
    match models.as_slice() {
        [m] => {
            for rx in &receivers {
                let test: Vec<_> = rows
                    .iter()
                    .filter(|r| &r.receiver == rx && r.extractor == m.trained_on)
                    .map(FeatureRow::to_feature)
                    .collect();
                if !test.is_empty() {
                    let acc = evaluate(m, &test).map_err(pipeline_err)?;
                    out.push((m.trained_on.to_string(), rx.clone(), acc, test.len()));
                }
            }
        }
        [a, b] => {
            for rx in &receivers {
                let side = |k: ExtractorKind| -> BTreeMap<RowKey, &FeatureRow> {
                    rows.iter().filter(|r| &r.receiver == rx && r.extractor == k).map(|r| (key(r), r)).collect()
                };
                let (sa, sb) = (side(a.trained_on), side(b.trained_on));
                let pairs: Vec<_> = sa
                    .iter()
                    .filter_map(|(k, ra)| sb.get(k).map(|rb| (ra.to_feature(), rb.to_feature())))
                    .collect();
                if !pairs.is_empty() {
                    let acc = evaluate_fused((a, b), &pairs).map_err(pipeline_err)?;
                    out.push(("RD".into(), rx.clone(), acc, pairs.len()));
                }
            }
        }
        _ => return Err(config_err("give one model, or two models to fuse")),
    }
    if out.is_empty() {
        return Err(pipeline_err("no test rows match the model's extractor"));
    }
    std::fs::create_dir_all(&c.out_dir).map_err(|e| pipeline_err(format!("{}: {e}", c.out_dir.display())))?;
    let path = c.out_dir.join("accuracy.csv");
    let mut text = String::from("extractor,train_set,test_receiver,accuracy,test_samples\n");
    for (ext, rx, acc, n) in &out {
        text.push_str(&format!("{ext},{train_set},{rx},{acc:?},{n}\n"));
        println!("{ext} {train_set} -> {rx}: {acc:.4} ({n} samples)");
    }
    std::fs::write(&path, text).map_err(|e| pipeline_err(format!("{}: {e}", path.display())))?;
    Ok(())
}

pub fn bench(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let out = run_bench(&cfg).map_err(|e| match e {
        rff_core::harness::HarnessError::Config(e) => config_err(e),
        other => pipeline_err(other),
    })?;
    let files = write_bench(&c.out_dir, &out).map_err(pipeline_err)?;
    for run in &out.report.experiment.runs {
        let snr = run.snr_db.map_or("noiseless".to_string(), |s| format!("{s} dB"));
        for m in &run.matrices {
            let v = m.overall_mean().map_or("n/a".to_string(), |v| format!("{v:.4}"));
            println!("{snr:>10}  {:<7} mean accuracy {v}", m.extractor);
        }
        println!("{snr:>10}  drop rate {:.4}", run.overall_drop_rate);
    }
    if let Some(s) = &out.report.sweep {
        println!("reference sweep: r = {:?}, p = {:?}", s.pearson_r, s.p_value);
    }
    println!("wrote {} files to {}", files.len(), c.out_dir.display());
    Ok(())
}
