//! Small shared statistics helpers.

use crate::error::{Error, Result};

/// Sample moments: mean, standard deviation (n-1), skewness, and excess
/// kurtosis (0 for a normal distribution).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn summary_stats(sample: &[f64]) -> Result<SummaryStats> {
    let n = sample.len();
    if n < 4 {
        return Err(Error::InsufficientData { need: 4, got: n });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let m2 = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(Error::Numeric("zero-variance sample: skewness/kurtosis undefined".into()));
    }
    let m3 = sample.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = sample.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    Ok(SummaryStats {
        mean,
        std: (m2 * nf / (nf - 1.0)).sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        // Average ranks over ties.
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &idx in &order[i..=j] {
            r[idx] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::ShapeMismatch("spearman needs two equal-length samples".into()));
    }
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma).powi(2);
        db += (rb[i] - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        return Err(Error::Numeric("constant ranks".into()));
    }
    Ok(num / (da * db).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_sample_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample: Vec<f64> = (0..1_000_000)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                z
            })
            .collect();
        let s = summary_stats(&sample).unwrap();
        assert!(s.mean.abs() < 0.01);
        assert!((s.std - 1.0).abs() < 0.01);
        assert!(s.skewness.abs() < 0.01, "skew {}", s.skewness);
        assert!(s.kurtosis.abs() < 0.02, "kurt {}", s.kurtosis);
    }

    #[test]
    fn translation_invariance() {
        let sample: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let shifted: Vec<f64> = sample.iter().map(|x| x + 5.0).collect();
        let a = summary_stats(&sample).unwrap();
        let b = summary_stats(&shifted).unwrap();
        assert!((b.mean - a.mean - 5.0).abs() < 1e-12);
        assert!((b.std - a.std).abs() < 1e-12);
        assert!((b.skewness - a.skewness).abs() < 1e-9);
        assert!((b.kurtosis - a.kurtosis).abs() < 1e-9);
    }

    #[test]
    fn spearman_perfect_and_reversed() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| x * 3.0 + 1.0).collect();
        assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((spearman(&a, &c).unwrap() + 1.0).abs() < 1e-12);
    }
}
