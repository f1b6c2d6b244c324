//! Reference-device ranking by the low-frequency energy ratio `eta_LF`
//! of a candidate's normalised CSI amplitude.
//!
//! The low-frequency component is the orthogonal projection of the input
//! onto the span of the level-4 db4 approximation synthesis vectors.
//! Zeroing details and resynthesising through the symmetric-extension
//! filter bank is not an orthogonal map on a 52-sample input, so it can
//! report ratios above one and is not idempotent; the projection keeps the
//! same subspace while guaranteeing both.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wavelet::{min_len, wavedec, waverec, Db4, Decomposition, WaveletError};
use crate::Real;

/// Decomposition depth.
pub const LEVELS: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    #[default]
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub levels: usize,
    pub extension: Extension,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            levels: LEVELS,
            extension: Extension::Symmetric,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RefSelectError {
    #[error("input of {len} samples is shorter than the {min} needed for {levels} levels")]
    LengthError { len: usize, min: usize, levels: usize },
    #[error("input has zero energy")]
    DegenerateInput,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("no candidates")]
    EmptyCandidates,
    #[error("only {LEVELS} db4 levels are supported, got {0}")]
    UnsupportedLevels(usize),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefScore {
    pub device_id: String,
    pub eta_lf: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Orthonormal basis (column-major, `dim` vectors of length `n`) of the
/// approximation subspace.
fn approximation_basis(n: usize, cfg: &WaveletConfig) -> Result<Vec<Vec<f64>>, RefSelectError> {
    if cfg.levels != LEVELS {
        return Err(RefSelectError::UnsupportedLevels(cfg.levels));
    }
    let min = min_len(cfg.levels);
    if n < min {
        return Err(RefSelectError::LengthError {
            len: n,
            min,
            levels: cfg.levels,
        });
    }
    let w = Db4::default();
    let shape = wavedec(&vec![0.0; n], cfg.levels, &w)?;
    let zero_details: Vec<Vec<f64>> = shape.details.iter().map(|d| vec![0.0; d.len()]).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(shape.approx.len());
    for i in 0..shape.approx.len() {
        let mut approx = vec![0.0; shape.approx.len()];
        approx[i] = 1.0;
        let mut v = waverec(
            &Decomposition {
                approx,
                details: zero_details.clone(),
            },
            &w,
        )?;
        v.truncate(n);
        // modified Gram-Schmidt, two passes; the synthesis vectors are
        // far from orthogonal near the boundaries
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    Ok(basis)
}

fn to_f64<T: Real>(x: &[T]) -> Result<Vec<f64>, RefSelectError> {
    let v: Vec<f64> = x.iter().map(|t| t.to_f64_lossy()).collect();
    if v.iter().all(|t| t.is_finite()) {
        Ok(v)
    } else {
        Err(RefSelectError::NonFinite)
    }
}

/// Low-frequency component of `x`: its projection onto the level-4
/// approximation subspace. Same length as the input.
pub fn lowpass_reconstruct<T: Real>(x: &[T], cfg: &WaveletConfig) -> Result<Vec<T>, RefSelectError> {
    let v = to_f64(x)?;
    let basis = approximation_basis(v.len(), cfg)?;
    let mut out = vec![0.0; v.len()];
    for q in &basis {
        let c: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
        out.iter_mut().zip(q).for_each(|(o, b)| *o += c * b);
    }
    Ok(out.into_iter().map(T::lit).collect())
}

/// `E_A / E_B` after normalising `csi_amplitude` to unit energy.
pub fn eta_lf<T: Real>(device_id: impl Into<String>, csi_amplitude: &[T]) -> Result<RefScore, RefSelectError> {
    let v = to_f64(csi_amplitude)?;
    let e: f64 = v.iter().map(|t| t * t).sum();
    if !(e > 0.0) {
        return Err(RefSelectError::DegenerateInput);
    }
    let s = e.sqrt();
    let unit: Vec<f64> = v.iter().map(|t| t / s).collect();
    let energy_before: f64 = unit.iter().map(|t| t * t).sum();
    let low = lowpass_reconstruct(&unit, &WaveletConfig::default())?;
    let energy_after: f64 = low.iter().map(|t| t * t).sum();
    Ok(RefScore {
        device_id: device_id.into(),
        eta_lf: energy_after / energy_before,
        energy_before,
        energy_after,
    })
}

/// Scores every candidate and sorts by descending `eta_lf`; equal scores
/// keep input order.
pub fn rank_references<T: Real>(candidates: &[(String, Vec<T>)]) -> Result<Vec<RefScore>, RefSelectError> {
    if candidates.is_empty() {
        return Err(RefSelectError::EmptyCandidates);
    }
    let mut scores = candidates
        .iter()
        .map(|(id, csi)| eta_lf(id.clone(), csi))
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_by(|a, b| b.eta_lf.total_cmp(&a.eta_lf));
    Ok(scores)
}

/// Candidate with the largest `eta_lf`; the first one wins ties.
pub fn select_reference<T: Real>(candidates: &[(String, Vec<T>)]) -> Result<String, RefSelectError> {
    Ok(rank_references(candidates)?.swap_remove(0).device_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type Mat = Vec<Vec<f64>>;

    fn matmul(a: &Mat, b: &Mat) -> Mat {
        a.iter()
            .map(|r| (0..b[0].len()).map(|j| r.iter().zip(b).map(|(x, row)| x * row[j]).sum()).collect())
            .collect()
    }

    fn apply(a: &Mat, x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    /// One analysis level as a dense matrix, built by folding the
    /// mirrored sample positions back onto the input.
    fn analysis_matrix(n: usize, h: &[f64; 8]) -> Mat {
        let mut rows = vec![vec![0.0; n]; (n + 7) / 2];
        for (k, row) in rows.iter_mut().enumerate() {
            for (j, hj) in h.iter().enumerate() {
                let p = 2 * k as isize + 1 - j as isize;
                let src = if p < 0 {
                    (-p - 1) as usize
                } else if p >= n as isize {
                    2 * n - 1 - p as usize
                } else {
                    p as usize
                };
                row[src] += hj;
            }
        }
        rows
    }

    /// One synthesis level from `m` coefficients: `2m - 6` outputs.
    fn synthesis_matrix(m: usize, g: &[f64; 8]) -> Mat {
        (0..2 * m - 6)
            .map(|n| {
                (0..m)
                    .map(|k| {
                        let j = n as isize + 6 - 2 * k as isize;
                        if (0..8).contains(&j) { g[j as usize] } else { 0.0 }
                    })
                    .collect()
            })
            .collect()
    }

    /// Dense-matrix eta: synthesis span of the level-4 approximation,
    /// projection through the normal equations.
    fn oracle_eta(x: &[f64]) -> f64 {
        let n = x.len();
        let e: f64 = x.iter().map(|v| v * v).sum();
        let x: Vec<f64> = x.iter().map(|v| v / e.sqrt()).collect();
        let w = Db4::default();
        let mut lens = vec![n];
        for _ in 0..4 {
            lens.push((lens.last().unwrap() + 7) / 2);
        }

        // analysis followed by synthesis is the identity on a probe
        let probe: Vec<f64> = (0..n).map(|k| (k as f64 * 0.3).cos() + 0.1 * k as f64).collect();
        let mut a = probe.clone();
        let mut details = Vec::new();
        for l in 0..4 {
            details.push(apply(&analysis_matrix(lens[l], &w.dec_hi), &a));
            a = apply(&analysis_matrix(lens[l], &w.dec_lo), &a);
        }
        for l in (0..4).rev() {
            a.truncate(lens[l + 1]);
            let lo = apply(&synthesis_matrix(lens[l + 1], &w.rec_lo), &a);
            let hi = apply(&synthesis_matrix(lens[l + 1], &w.rec_hi), &details[l]);
            a = lo.iter().zip(&hi).map(|(p, q)| p + q).collect();
        }
        assert!(a.iter().zip(&probe).all(|(p, q)| (p - q).abs() < 1e-9));

        let m = lens[4];
        let mut c: Mat = (0..m).map(|i| (0..m).map(|j| f64::from(i == j)).collect()).collect();
        for l in (0..4).rev() {
            c.truncate(lens[l + 1]);
            c = matmul(&synthesis_matrix(lens[l + 1], &w.rec_lo), &c);
        }
        let cols: Mat = (0..m).map(|j| c.iter().map(|r| r[j]).collect()).collect();

        let mut g = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..m {
                g[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            }
            g[i][m] = cols[i].iter().zip(&x).map(|(a, b)| a * b).sum();
        }
        for col in 0..m {
            let p = (col..m).max_by(|&a, &b| g[a][col].abs().total_cmp(&g[b][col].abs())).unwrap();
            g.swap(col, p);
            for r in 0..m {
                if r != col {
                    let f = g[r][col] / g[col][col];
                    for k in col..=m {
                        g[r][k] -= f * g[col][k];
                    }
                }
            }
        }
        let coef: Vec<f64> = (0..m).map(|i| g[i][m] / g[i][i]).collect();
        (0..n)
            .map(|t| (0..m).map(|i| coef[i] * cols[i][t]).sum::<f64>().powi(2))
            .sum()
    }

    fn alternating() -> Vec<f64> {
        (0..52).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect()
    }

    fn raised_cosine() -> Vec<f64> {
        (0..52).map(|k| 1.0 + 0.5 * (std::f64::consts::TAU * k as f64 / 52.0).cos()).collect()
    }

    #[test]
    fn constant_passes_unchanged() {
        let x = vec![0.3_f64; 52];
        let y = lowpass_reconstruct(&x, &WaveletConfig::default()).unwrap();
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
        let s = eta_lf("c", &x).unwrap();
        assert!((s.eta_lf - 1.0).abs() < 1e-9);
        assert!((s.energy_before - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_is_rejected_and_matches_oracle() {
        let s = eta_lf("alt", &alternating()).unwrap();
        assert!(s.eta_lf < 0.05);
        assert!((s.eta_lf - oracle_eta(&alternating())).abs() < 1e-9);
        // reference value from an independent numpy/pywt computation
        assert!((s.eta_lf - 0.010851284553971175).abs() < 1e-9, "{}", s.eta_lf);
        let r = eta_lf("rc", &raised_cosine()).unwrap();
        assert!((r.eta_lf - 0.9994361039710541).abs() < 1e-9, "{}", r.eta_lf);
        assert!((r.eta_lf - oracle_eta(&raised_cosine())).abs() < 1e-9);
    }

    #[test]
    fn projection_is_idempotent() {
        let cfg = WaveletConfig::default();
        let x: Vec<f64> = (0..52).map(|k| ((k * 7919) % 101) as f64 / 101.0).collect();
        let y = lowpass_reconstruct(&x, &cfg).unwrap();
        let z = lowpass_reconstruct(&y, &cfg).unwrap();
        let ey: f64 = y.iter().map(|v| v * v).sum();
        let diff: f64 = y.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(diff / ey < 1e-6);
    }

    #[test]
    fn smooth_beats_rippled() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from_seed(3);
        let smooth = raised_cosine();
        let rippled: Vec<f64> = smooth.iter().map(|v| v * (1.0 + 0.2 * rng.random_range(-1.0..1.0))).collect();
        let a = eta_lf("s", &smooth).unwrap().eta_lf;
        let b = eta_lf("r", &rippled).unwrap().eta_lf;
        assert!(a > b, "{a} vs {b}");
    }

    #[test]
    fn selection_rules() {
        let one = vec![("only".to_string(), alternating())];
        assert_eq!(select_reference(&one).unwrap(), "only");
        let two = vec![("alt".to_string(), alternating()), ("const".to_string(), vec![1.0; 52])];
        assert_eq!(select_reference(&two).unwrap(), "const");
        let rev: Vec<_> = two.iter().rev().cloned().collect();
        assert_eq!(select_reference(&rev).unwrap(), "const");
        let tie = vec![("a".to_string(), vec![1.0; 52]), ("b".to_string(), vec![2.0; 52])];
        assert_eq!(select_reference(&tie).unwrap(), "a");
        assert_eq!(select_reference::<f64>(&[]), Err(RefSelectError::EmptyCandidates));
    }

    #[test]
    fn errors() {
        assert_eq!(eta_lf("z", &[0.0; 52]), Err(RefSelectError::DegenerateInput));
        assert!(matches!(eta_lf("s", &[1.0; 10]), Err(RefSelectError::LengthError { len: 10, .. })));
        assert_eq!(eta_lf("n", &[f64::NAN; 52]), Err(RefSelectError::NonFinite));
        let cfg = WaveletConfig { levels: 3, ..Default::default() };
        assert!(lowpass_reconstruct(&[1.0; 52], &cfg).is_err());
    }

    #[test]
    fn odd_lengths_keep_their_length() {
        let x: Vec<f64> = (0..31).map(|k| 1.0 + 0.1 * k as f64).collect();
        let y = lowpass_reconstruct(&x, &WaveletConfig::default()).unwrap();
        assert_eq!(y.len(), 31);
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn works_in_single_precision() {
        let x: Vec<f32> = raised_cosine().into_iter().map(|v| v as f32).collect();
        let s = eta_lf("f", &x).unwrap();
        assert!((s.eta_lf - 0.9994361039710541).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn eta_in_unit_interval_and_scale_invariant(
            x in prop::collection::vec(-10.0f64..10.0, 52),
            c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0],
        ) {
            prop_assume!(x.iter().map(|v| v * v).sum::<f64>() > 1e-6);
            let a = eta_lf("x", &x).unwrap().eta_lf;
            prop_assert!(a > 0.0 && a <= 1.0 + 1e-9);
            let y: Vec<f64> = x.iter().map(|v| v * c).collect();
            let b = eta_lf("y", &y).unwrap().eta_lf;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
