//! Summary statistics for reports.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Sample standard deviation (`n - 1`); zero for fewer than two values.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Pearson correlation and its two-sided p-value from Student's t with
/// `n - 2` degrees of freedom. A constant input gives `(0, 1)`. Needs at
/// least three pairs.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Some((0.0, 1.0));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    if (1.0 - r * r) <= f64::EPSILON {
        return Some((r, 0.0));
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((r, (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)))
}

/// Cosine similarity after removing each vector's mean (Pearson
/// correlation of the entries).
pub fn centered_cosine(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a).unwrap_or(0.0);
    let mb = mean(b).unwrap_or(0.0);
    let x: Vec<f64> = a.iter().map(|v| v - ma).collect();
    let y: Vec<f64> = b.iter().map(|v| v - mb).collect();
    crate::features::cosine_similarity(&x, &y)
}
