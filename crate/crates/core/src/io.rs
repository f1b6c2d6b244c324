//! File formats: IQ recordings with JSON sidecars, feature tables (CSV and
//! JSON), candidate CSI tables, model files and reports.
//!
//! IQ layout: interleaved little-endian `I, Q` pairs, either `f32`
//! (canonical) or `i16` scaled by the sidecar's `scale`. The sidecar is the
//! recording path with its extension replaced by `.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::SoftmaxModel;
use crate::features::{ExtractorKind, FeatureVector};
use crate::refselect::RefScore;
use crate::signal::{ComplexSignal, FrameLayout};
use crate::waveform::{occupied_tones, TrainingField};
use crate::{Complex, Real};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: missing sidecar {sidecar}")]
    MissingSidecar { path: PathBuf, sidecar: PathBuf },
    #[error("{path}: byte offset {offset}: {message}")]
    Sample { path: PathBuf, offset: u64, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: line {line}: {message}")]
    Table { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IqFormat {
    #[default]
    Cf32Le,
    Ci16Le,
}

/// Sidecar metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqMetadata {
    pub sample_rate: f64,
    #[serde(default)]
    pub center_freq_hz: f64,
    #[serde(default)]
    pub format: IqFormat,
    /// Multiplier applied to `i16` samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameLayout>,
    /// Free-form labels such as device and receiver ids.
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub labels: std::collections::BTreeMap<String, String>,
}

impl IqMetadata {
    pub fn new(sample_rate: f64) -> Self {
        Self {
            sample_rate,
            center_freq_hz: 0.0,
            format: IqFormat::Cf32Le,
            scale: None,
            num_samples: None,
            frame: None,
            labels: Default::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IqRecording<T> {
    pub path: PathBuf,
    pub signal: ComplexSignal<T>,
    pub meta: IqMetadata,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn read_sidecar(path: &Path) -> Result<IqMetadata, IoError> {
    let sidecar = sidecar_path(path);
    if !sidecar.exists() {
        return Err(IoError::MissingSidecar {
            path: path.to_path_buf(),
            sidecar,
        });
    }
    let meta: IqMetadata = read_json(&sidecar)?;
    if !(meta.sample_rate > 0.0 && meta.sample_rate.is_finite()) {
        return Err(IoError::Json {
            path: sidecar,
            message: format!("sample_rate {} must be positive", meta.sample_rate),
        });
    }
    Ok(meta)
}

/// Reads a recording in the format its sidecar names.
pub fn read_iq<T: Real>(path: &Path) -> Result<IqRecording<T>, IoError> {
    let meta = read_sidecar(path)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    let samples = match meta.format {
        IqFormat::Cf32Le => decode_f32(path, &bytes)?,
        IqFormat::Ci16Le => decode_i16(path, &bytes, meta.scale.unwrap_or(1.0 / 32768.0))?,
    };
    let mut signal = ComplexSignal::new(samples);
    signal.sample_rate = meta.sample_rate;
    signal.frame = meta.frame;
    Ok(IqRecording {
        path: path.to_path_buf(),
        signal,
        meta,
    })
}

/// Reads an `i16` recording with an explicit scale, ignoring the sidecar's
/// format field.
pub fn read_iq_i16<T: Real>(path: &Path, scale: f64) -> Result<IqRecording<T>, IoError> {
    let mut meta = read_sidecar(path)?;
    let bytes = fs::read(path).map_err(io_err(path))?;
    let samples = decode_i16(path, &bytes, scale)?;
    meta.format = IqFormat::Ci16Le;
    meta.scale = Some(scale);
    let mut signal = ComplexSignal::new(samples);
    signal.sample_rate = meta.sample_rate;
    signal.frame = meta.frame;
    Ok(IqRecording {
        path: path.to_path_buf(),
        signal,
        meta,
    })
}

fn decode_f32<T: Real>(path: &Path, bytes: &[u8]) -> Result<Vec<Complex<T>>, IoError> {
    decode(path, bytes, 4, |c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
}

fn decode_i16<T: Real>(path: &Path, bytes: &[u8], scale: f64) -> Result<Vec<Complex<T>>, IoError> {
    if !(scale.is_finite() && scale != 0.0) {
        return Err(IoError::Invalid(format!("i16 scale {scale} must be finite and nonzero")));
    }
    decode(path, bytes, 2, |c| f64::from(i16::from_le_bytes([c[0], c[1]])) * scale)
}

fn decode<T: Real>(
    path: &Path,
    bytes: &[u8],
    width: usize,
    value: impl Fn(&[u8]) -> f64,
) -> Result<Vec<Complex<T>>, IoError> {
    let err = |offset: usize, message: &str| IoError::Sample {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    };
    if bytes.len() % width != 0 {
        return Err(err(bytes.len() - bytes.len() % width, "truncated value"));
    }
    let pair = 2 * width;
    if bytes.len() % pair != 0 {
        return Err(err(bytes.len() - width, "I value without its Q partner"));
    }
    bytes
        .chunks_exact(pair)
        .enumerate()
        .map(|(k, c)| {
            let (i, q) = (value(&c[..width]), value(&c[width..]));
            if !i.is_finite() {
                return Err(err(k * pair, "non-finite sample"));
            }
            if !q.is_finite() {
                return Err(err(k * pair + width, "non-finite sample"));
            }
            Ok(Complex::new(T::lit(i), T::lit(q)))
        })
        .collect()
}

/// Writes `signal` as `f32` pairs plus its sidecar.
pub fn write_iq<T: Real>(path: &Path, signal: &ComplexSignal<T>, meta: &IqMetadata) -> Result<(), IoError> {
    let mut meta = meta.clone();
    meta.format = IqFormat::Cf32Le;
    meta.scale = None;
    meta.sample_rate = signal.sample_rate;
    meta.num_samples = Some(signal.len());
    meta.frame = signal.frame;
    let mut bytes = Vec::with_capacity(signal.len() * 8);
    for z in &signal.samples {
        bytes.extend_from_slice(&(z.re.to_f64_lossy() as f32).to_le_bytes());
        bytes.extend_from_slice(&(z.im.to_f64_lossy() as f32).to_le_bytes());
    }
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(io_err(path))?;
    write_json(&sidecar_path(path), &meta)
}

/// Writes `i16` pairs (`round(x / scale)`, saturating) plus the sidecar.
pub fn write_iq_i16<T: Real>(
    path: &Path,
    signal: &ComplexSignal<T>,
    scale: f64,
    meta: &IqMetadata,
) -> Result<(), IoError> {
    let mut meta = meta.clone();
    meta.format = IqFormat::Ci16Le;
    meta.scale = Some(scale);
    meta.sample_rate = signal.sample_rate;
    meta.num_samples = Some(signal.len());
    meta.frame = signal.frame;
    let q = |v: T| (v.to_f64_lossy() / scale).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
    let mut bytes = Vec::with_capacity(signal.len() * 4);
    for z in &signal.samples {
        bytes.extend_from_slice(&q(z.re).to_le_bytes());
        bytes.extend_from_slice(&q(z.im).to_le_bytes());
    }
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(io_err(path))?;
    write_json(&sidecar_path(path), &meta)
}

fn ensure_parent(path: &Path) -> Result<(), IoError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(io_err(p)),
        _ => Ok(()),
    }
}

/// One feature table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub extractor: ExtractorKind,
    pub device: String,
    pub receiver: String,
    pub channel_scenario: String,
    pub trial: u64,
    /// `None` for noiseless captures (an empty CSV cell).
    pub snr_db: Option<f64>,
    pub values: Vec<f64>,
}

impl FeatureRow {
    pub fn to_feature(&self) -> FeatureVector<f64> {
        let tones = match self.extractor {
            ExtractorKind::RdStf | ExtractorKind::Dv => occupied_tones(TrainingField::LSTF),
            ExtractorKind::RdLtf | ExtractorKind::Hl => occupied_tones(TrainingField::LLTF),
        };
        FeatureVector {
            extractor: self.extractor,
            values: self.values.clone(),
            tone_indices: tones,
            device_hint: Some(self.device.clone()),
        }
    }
}

const FIXED_COLUMNS: [&str; 6] = ["extractor", "device", "receiver", "channel_scenario", "trial", "snr_db"];

fn check_rows(rows: &[FeatureRow]) -> Result<(), IoError> {
    if let Some(first) = rows.first() {
        for (i, r) in rows.iter().enumerate() {
            if r.extractor != first.extractor {
                return Err(IoError::Invalid(format!(
                    "row {i}: extractor {} differs from {}",
                    r.extractor, first.extractor
                )));
            }
            if r.values.len() != first.values.len() {
                return Err(IoError::Invalid(format!(
                    "row {i}: {} values, expected {}",
                    r.values.len(),
                    first.values.len()
                )));
            }
        }
    }
    Ok(())
}

/// Writes rows as CSV. Values use the shortest representation that
/// round-trips exactly.
pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<(), IoError> {
    check_rows(rows)?;
    ensure_parent(path)?;
    let csv_err = |e: csv::Error| IoError::Table {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let dim = rows.first().map_or(0, |r| r.values.len());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|k| format!("v{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.extractor.to_string(),
            r.device.clone(),
            r.receiver.clone(),
            r.channel_scenario.clone(),
            r.trial.to_string(),
            r.snr_db.map_or(String::new(), |s| format!("{s:?}")),
        ];
        rec.extend(r.values.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>, IoError> {
    let table = |line: u64, message: String| IoError::Table {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| table(0, e.to_string()))?;
    let header = r.headers().map_err(|e| table(1, e.to_string()))?.clone();
    if header.len() < FIXED_COLUMNS.len() || header.iter().zip(FIXED_COLUMNS).any(|(h, f)| h != f) {
        return Err(table(1, format!("header must start with {}", FIXED_COLUMNS.join(","))));
    }
    let dim = header.len() - FIXED_COLUMNS.len();
    for (k, h) in header.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if h != format!("v{k}") {
            return Err(table(1, format!("column {} is {h:?}, expected v{k}", FIXED_COLUMNS.len() + k)));
        }
    }
    let mut rows: Vec<FeatureRow> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            table(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(table(line, format!("{} values, expected {dim}", rec.len().saturating_sub(FIXED_COLUMNS.len()))));
        }
        let num = |i: usize| -> Result<f64, IoError> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| table(line, format!("column {}: {e}", header.get(i).unwrap_or("?"))))
        };
        let extractor: ExtractorKind = rec[0].parse().map_err(|e: crate::features::FeatureError| table(line, e.to_string()))?;
        if let Some(first) = rows.first() {
            if first.extractor != extractor {
                return Err(table(line, format!("extractor {extractor} in a {} table", first.extractor)));
            }
        }
        let trial = rec[4].parse::<u64>().map_err(|e| table(line, format!("column trial: {e}")))?;
        let snr_db = if rec[5].is_empty() { None } else { Some(num(5)?) };
        let values = (FIXED_COLUMNS.len()..header.len()).map(num).collect::<Result<Vec<_>, _>>()?;
        rows.push(FeatureRow {
            extractor,
            device: rec[1].to_string(),
            receiver: rec[2].to_string(),
            channel_scenario: rec[3].to_string(),
            trial,
            snr_db,
            values,
        });
    }
    Ok(rows)
}

pub fn write_features_json(path: &Path, rows: &[FeatureRow]) -> Result<(), IoError> {
    check_rows(rows)?;
    write_json(path, &rows)
}

pub fn read_features_json(path: &Path) -> Result<Vec<FeatureRow>, IoError> {
    let rows: Vec<FeatureRow> = read_json(path)?;
    check_rows(&rows).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(rows)
}

/// Candidate CSI table: a `device_id` column followed by amplitude columns.
pub fn read_csi_table(path: &Path) -> Result<Vec<(String, Vec<f64>)>, IoError> {
    let table = |line: u64, message: String| IoError::Table {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| table(0, e.to_string()))?;
    let header = r.headers().map_err(|e| table(1, e.to_string()))?.clone();
    if header.get(0) != Some("device_id") || header.len() < 2 {
        return Err(table(1, "header must be device_id followed by amplitude columns".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| table(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|e| table(line, format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        out.push((rec[0].to_string(), values));
    }
    Ok(out)
}

pub fn write_csi_table(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<(), IoError> {
    ensure_parent(path)?;
    let dim = rows.first().map_or(0, |r| r.1.len());
    if let Some((id, v)) = rows.iter().find(|r| r.1.len() != dim) {
        return Err(IoError::Invalid(format!("{id}: {} values, expected {dim}", v.len())));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::Invalid(e.to_string()))?;
    let mut header = vec!["device_id".to_string()];
    header.extend((0..dim).map(|k| format!("c{k}")));
    w.write_record(&header).map_err(|e| IoError::Invalid(e.to_string()))?;
    for (id, v) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(v.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec).map_err(|e| IoError::Invalid(e.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_ref_scores(path: &Path, scores: &[RefScore]) -> Result<(), IoError> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| IoError::Invalid(e.to_string()))?;
    w.write_record(["rank", "device_id", "eta_lf", "energy_before", "energy_after"])
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            s.device_id.clone(),
            format!("{:?}", s.eta_lf),
            format!("{:?}", s.energy_before),
            format!("{:?}", s.energy_after),
        ])
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn save_model<T: Real + Serialize>(path: &Path, model: &SoftmaxModel<T>) -> Result<(), IoError> {
    write_json(path, model)
}

pub fn load_model<T: Real + DeserializeOwned>(path: &Path) -> Result<SoftmaxModel<T>, IoError> {
    let m: SoftmaxModel<T> = read_json(path)?;
    m.validate().map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(m)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<(), IoError> {
    ensure_parent(path)?;
    let mut s = serde_json::to_string_pretty(value).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    s.push('\n');
    fs::write(path, s).map_err(io_err(path))
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D, IoError> {
    let s = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&s).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex32;

    fn sig32(n: usize) -> ComplexSignal<f32> {
        ComplexSignal::new((0..n).map(|k| Complex32::new(k as f32 * 0.25 - 1.0, (k as f32).sin())).collect())
    }

    fn row(dev: &str, trial: u64, dim: usize) -> FeatureRow {
        FeatureRow {
            extractor: ExtractorKind::Hl,
            device: dev.into(),
            receiver: "rx0".into(),
            channel_scenario: "flat".into(),
            trial,
            snr_db: if trial % 2 == 0 { Some(20.0 + trial as f64 / 3.0) } else { None },
            values: (0..dim).map(|k| ((k as f64 + 1.0) * (trial as f64 + 0.1)).sin() / 7.0).collect(),
        }
    }

    #[test]
    fn eight_floats_are_four_samples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.cf32");
        let floats: Vec<u8> = (0..8).flat_map(|k| (k as f32).to_le_bytes()).collect();
        fs::write(&p, floats).unwrap();
        write_json(&sidecar_path(&p), &IqMetadata::new(20e6)).unwrap();
        let r = read_iq::<f32>(&p).unwrap();
        assert_eq!(r.signal.len(), 4);
        assert_eq!(r.signal.samples[1], Complex32::new(2.0, 3.0));
    }

    #[test]
    fn iq_roundtrip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cap.cf32");
        let mut s = sig32(33);
        s.sample_rate = 25e6;
        let mut meta = IqMetadata::new(0.0);
        meta.center_freq_hz = 2.412e9;
        write_iq(&p, &s, &meta).unwrap();
        let r = read_iq::<f32>(&p).unwrap();
        assert_eq!(r.signal.samples, s.samples);
        assert_eq!(r.meta.sample_rate, 25e6);
        assert_eq!(r.meta.center_freq_hz, 2.412e9);
        assert_eq!(r.meta.num_samples, Some(33));
    }

    #[test]
    fn truncation_and_nan_report_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.cf32");
        write_iq(&p, &sig32(3), &IqMetadata::new(20e6)).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(20);
        fs::write(&p, &bytes).unwrap();
        match read_iq::<f64>(&p) {
            Err(IoError::Sample { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("{other:?}"),
        }
        bytes.truncate(18);
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_iq::<f64>(&p), Err(IoError::Sample { offset: 16, .. })));
        let mut nan = Vec::new();
        for v in [1.0f32, 2.0, 3.0, f32::NAN] {
            nan.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&p, nan).unwrap();
        assert!(matches!(read_iq::<f64>(&p), Err(IoError::Sample { offset: 12, .. })));
    }

    #[test]
    fn missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lonely.cf32");
        fs::write(&p, [0u8; 8]).unwrap();
        assert!(matches!(read_iq::<f64>(&p), Err(IoError::MissingSidecar { .. })));
    }

    #[test]
    fn i16_with_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sdr.ci16");
        let s = ComplexSignal::<f64>::new(vec![Complex::new(0.5, -0.25), Complex::new(-1.0, 0.0)]);
        write_iq_i16(&p, &s, 1.0 / 1024.0, &IqMetadata::new(20e6)).unwrap();
        let r = read_iq::<f64>(&p).unwrap();
        assert_eq!(r.signal.samples, s.samples);
        let r2 = read_iq_i16::<f64>(&p, 2.0 / 1024.0).unwrap();
        assert_eq!(r2.signal.samples[0], Complex::new(1.0, -0.5));
        assert!(read_iq_i16::<f64>(&p, 0.0).is_err());
    }

    #[test]
    fn feature_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows: Vec<_> = (0..100).map(|t| row(&format!("d{}", t % 7), t, 52)).collect();
        write_features(&p, &rows).unwrap();
        let back = read_features(&p).unwrap();
        assert_eq!(back.len(), 100);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.snr_db, b.snr_db);
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() <= 1e-15));
        }
        assert_eq!(back, rows);
        let j = dir.path().join("t.json");
        write_features_json(&j, &rows).unwrap();
        assert_eq!(read_features_json(&j).unwrap(), rows);
        assert_eq!(back[3].to_feature().tone_indices.len(), 52);
    }

    #[test]
    fn mixed_extractors_and_dim_drift_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let mut rows = vec![row("a", 0, 12), row("b", 1, 12)];
        rows[1].extractor = ExtractorKind::Dv;
        assert!(write_features(&p, &rows).is_err());
        fs::write(
            &p,
            "extractor,device,receiver,channel_scenario,trial,snr_db,v0,v1\nHL,a,r,flat,0,,0.1,0.2\nDV,a,r,flat,1,,0.1,0.2\n",
        )
        .unwrap();
        assert!(matches!(read_features(&p), Err(IoError::Table { line: 3, .. })));
        fs::write(
            &p,
            "extractor,device,receiver,channel_scenario,trial,snr_db,v0,v1\nHL,a,r,flat,0,,0.1,0.2\nHL,a,r,flat,1,,0.1\n",
        )
        .unwrap();
        match read_features(&p) {
            Err(IoError::Table { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "extractor,device,receiver,scenario,trial,snr_db\n").unwrap();
        assert!(matches!(read_features(&p), Err(IoError::Table { line: 1, .. })));
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_features(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().trim(), FIXED_COLUMNS.join(","));
        assert!(read_features(&p).unwrap().is_empty());
    }

    #[test]
    fn csi_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("csi.csv");
        let rows = vec![("a".to_string(), vec![1.0, 0.5, 0.25]), ("b".to_string(), vec![0.1, 0.2, 0.3])];
        write_csi_table(&p, &rows).unwrap();
        assert_eq!(read_csi_table(&p).unwrap(), rows);
    }

    #[test]
    fn model_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let mut m = SoftmaxModel::<f64>::zeros(ExtractorKind::Hl, vec!["a".into(), "b".into()], 2);
        m.weights[0][1] = 0.1 + 0.2;
        save_model(&p, &m).unwrap();
        assert_eq!(load_model::<f64>(&p).unwrap(), m);
        let text = fs::read_to_string(&p).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
        fs::write(&p, text).unwrap();
        assert!(load_model::<f64>(&p).is_err());
    }
}
