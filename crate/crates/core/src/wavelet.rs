//! Daubechies-4 (8-tap) discrete wavelet transform with half-sample
//! symmetric boundary extension.
//!
//! Coefficient lengths and indexing follow the common `symmetric` mode
//! convention: one analysis level maps `n` samples to `(n + 7) / 2`
//! coefficients, and synthesis returns `2m - 6` samples, trimming a
//! trailing approximation coefficient when it outruns the details.

use thiserror::Error;

/// Filter length.
pub const DB4_LEN: usize = 8;

/// db4 decomposition low-pass filter.
pub const DB4_DEC_LO: [f64; DB4_LEN] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("level {level} input has {len} samples, needs at least {min}")]
    TooShort { level: usize, len: usize, min: usize },
    #[error("approximation has {approx} coefficients, detail has {detail}")]
    LengthMismatch { approx: usize, detail: usize },
}

/// The four db4 filters.
#[derive(Clone, Debug, PartialEq)]
pub struct Db4 {
    pub dec_lo: [f64; DB4_LEN],
    pub dec_hi: [f64; DB4_LEN],
    pub rec_lo: [f64; DB4_LEN],
    pub rec_hi: [f64; DB4_LEN],
}

impl Default for Db4 {
    fn default() -> Self {
        let dec_lo = DB4_DEC_LO;
        let mut dec_hi = [0.0; DB4_LEN];
        let mut rec_lo = [0.0; DB4_LEN];
        let mut rec_hi = [0.0; DB4_LEN];
        for k in 0..DB4_LEN {
            let r = dec_lo[DB4_LEN - 1 - k];
            rec_lo[k] = r;
            // quadrature mirror: g[k] = (-1)^k h[N-1-k]
            rec_hi[k] = if k % 2 == 0 { dec_lo[k] } else { -dec_lo[k] };
            dec_hi[k] = if k % 2 == 0 { -r } else { r };
        }
        // dec_hi is the reverse of rec_hi
        for k in 0..DB4_LEN {
            debug_assert_eq!(dec_hi[k], rec_hi[DB4_LEN - 1 - k]);
        }
        Self {
            dec_lo,
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }
}

/// Half-sample symmetric index: `x[-1] = x[0]`, `x[n] = x[n-1]`.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Number of coefficients one analysis level yields for `n` inputs.
pub fn coeff_len(n: usize) -> usize {
    (n + DB4_LEN - 1) / 2
}

fn analysis(x: &[f64], f: &[f64; DB4_LEN]) -> Vec<f64> {
    let n = x.len();
    (0..coeff_len(n))
        .map(|k| {
            (0..DB4_LEN)
                .map(|j| f[j] * x[mirror(2 * k as isize + 1 - j as isize, n)])
                .sum()
        })
        .collect()
}

/// One analysis level: `(approximation, detail)`.
pub fn dwt(x: &[f64], w: &Db4) -> (Vec<f64>, Vec<f64>) {
    (analysis(x, &w.dec_lo), analysis(x, &w.dec_hi))
}

/// One synthesis level.
pub fn idwt(a: &[f64], d: &[f64], w: &Db4) -> Result<Vec<f64>, WaveletError> {
    if a.len() != d.len() {
        return Err(WaveletError::LengthMismatch {
            approx: a.len(),
            detail: d.len(),
        });
    }
    let m = a.len();
    let out_len = (2 * m + 2).saturating_sub(DB4_LEN);
    let mut out = vec![0.0; out_len];
    for (n, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..m {
            let j = n as isize + DB4_LEN as isize - 2 - 2 * k as isize;
            if (0..DB4_LEN as isize).contains(&j) {
                let j = j as usize;
                s += a[k] * w.rec_lo[j] + d[k] * w.rec_hi[j];
            }
        }
        *o = s;
    }
    Ok(out)
}

/// Multilevel decomposition: the deepest approximation and the details
/// ordered deepest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub approx: Vec<f64>,
    pub details: Vec<Vec<f64>>,
}

/// `levels`-level analysis. Every level's input must hold at least one
/// filter length of samples.
pub fn wavedec(x: &[f64], levels: usize, w: &Db4) -> Result<Decomposition, WaveletError> {
    let mut a = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for level in 1..=levels {
        if a.len() < DB4_LEN {
            return Err(WaveletError::TooShort {
                level,
                len: a.len(),
                min: DB4_LEN,
            });
        }
        let (na, d) = dwt(&a, w);
        details.push(d);
        a = na;
    }
    details.reverse();
    Ok(Decomposition { approx: a, details })
}

pub fn waverec(dec: &Decomposition, w: &Db4) -> Result<Vec<f64>, WaveletError> {
    let mut a = dec.approx.clone();
    for d in &dec.details {
        if a.len() == d.len() + 1 {
            a.pop();
        }
        a = idwt(&a, d, w)?;
    }
    Ok(a)
}

/// Smallest input length that survives `levels` analysis levels.
pub fn min_len(levels: usize) -> usize {
    (DB4_LEN..)
        .find(|&n| {
            let mut m = n;
            for _ in 1..levels {
                m = coeff_len(m);
                if m < DB4_LEN {
                    return false;
                }
            }
            true
        })
        .expect("unbounded search")
}
