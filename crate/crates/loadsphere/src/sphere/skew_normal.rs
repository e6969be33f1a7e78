//! Skew-normal distribution: method-of-moments initialization, Nelder-Mead
//! maximum likelihood, numeric CDF/quantiles, and an exact sampler.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::von_mises::simpson;
use crate::error::{Error, Result};

const SQRT_2_OVER_PI: f64 = 0.7978845608028654;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SkewNormalParams {
    /// Location xi.
    pub location: f64,
    /// Scale omega > 0.
    pub scale: f64,
    /// Shape alpha; 0 recovers the normal distribution.
    pub shape: f64,
}

/// Fit result; `converged = false` means the moment-based fallback was kept.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SkewNormalFit {
    pub params: SkewNormalParams,
    pub converged: bool,
}

impl SkewNormalParams {
    pub fn pdf(&self, x: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        let z = (x - self.location) / self.scale;
        2.0 / self.scale * n.pdf(z) * n.cdf(self.shape * z)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        let z = (x - self.location) / self.scale;
        let phi_tail = n.cdf(self.shape * z).max(1e-300);
        (2.0f64).ln() - self.scale.ln() + n.ln_pdf(z) + phi_tail.ln()
    }

    /// Numeric CDF by Simpson integration from the far left tail.
    pub fn cdf(&self, x: f64) -> f64 {
        let lo = self.location - 12.0 * self.scale * (1.0 + self.shape.abs() * 0.0).max(1.0);
        if x <= lo {
            return 0.0;
        }
        simpson(|t| self.pdf(t), lo, x, 4000).clamp(0.0, 1.0)
    }

    /// Quantile by bisection of the numeric CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("quantile level {p}")));
        }
        let (mut lo, mut hi) = (
            self.location - 12.0 * self.scale,
            self.location + 12.0 * self.scale,
        );
        for _ in 0..70 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Exact sampler via the delta-representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let delta = self.shape / (1.0 + self.shape * self.shape).sqrt();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let v = delta * z0.abs() + (1.0 - delta * delta).sqrt() * z1;
        self.location + self.scale * v
    }
}

fn moments(sample: &[f64]) -> (f64, f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let m2 = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = sample.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    (mean, m2, m3 / m2.powf(1.5))
}

/// Method-of-moments estimate, used to seed the likelihood optimization.
pub fn moment_fit(sample: &[f64]) -> Result<SkewNormalParams> {
    let (mean, m2, skew) = moments(sample);
    if m2 <= 0.0 {
        return Err(Error::Numeric("zero-variance sample".into()));
    }
    // Invert the skewness formula; the skew-normal family caps |skewness|
    // just below 0.9953, so clamp before inverting.
    let g = skew.clamp(-0.99, 0.99);
    let u = (2.0 * g.abs() / (4.0 - std::f64::consts::PI)).powf(1.0 / 3.0);
    let bd = u / (1.0 + u * u).sqrt(); // b*delta with b = sqrt(2/pi)
    let delta = (bd / SQRT_2_OVER_PI).clamp(-0.995, 0.995) * g.signum();
    let omega = (m2 / (1.0 - SQRT_2_OVER_PI * SQRT_2_OVER_PI * delta * delta)).sqrt();
    let xi = mean - omega * delta * SQRT_2_OVER_PI;
    let alpha = delta / (1.0 - delta * delta).sqrt();
    Ok(SkewNormalParams { location: xi, scale: omega, shape: alpha })
}

/// MLE via Nelder-Mead on (xi, ln omega, alpha), moment-initialized.
pub fn fit_skew_normal(sample: &[f64]) -> Result<SkewNormalFit> {
    if sample.len() < 20 {
        return Err(Error::InsufficientData { need: 20, got: sample.len() });
    }
    let init = moment_fit(sample)?;
    let nll = |p: &[f64; 3]| -> f64 {
        let params = SkewNormalParams { location: p[0], scale: p[1].exp(), shape: p[2] };
        -sample.iter().map(|&x| params.ln_pdf(x)).sum::<f64>()
    };
    let x0 = [init.location, init.scale.ln(), init.shape];
    let (best, converged) = nelder_mead(nll, x0, 500, 1e-10);
    let params = SkewNormalParams {
        location: best[0],
        scale: best[1].exp(),
        shape: best[2],
    };
    if converged {
        Ok(SkewNormalFit { params, converged: true })
    } else {
        Ok(SkewNormalFit { params: init, converged: false })
    }
}

/// Plain Nelder-Mead in 3 dimensions. Returns the best vertex and whether
/// the simplex spread fell below `tol` within `max_iter` iterations.
fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: F,
    x0: [f64; 3],
    max_iter: usize,
    tol: f64,
) -> ([f64; 3], bool) {
    let step = [0.05_f64.max(x0[0].abs() * 0.05), 0.1, 0.5];
    let mut simplex: Vec<[f64; 3]> = vec![x0];
    for i in 0..3 {
        let mut v = x0;
        v[i] += step[i];
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut converged = false;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap());
        let s2: Vec<[f64; 3]> = order.iter().map(|&i| simplex[i]).collect();
        let f2: Vec<f64> = order.iter().map(|&i| fv[i]).collect();
        simplex = s2;
        fv = f2;

        if (fv[3] - fv[0]).abs() <= tol * (1.0 + fv[0].abs()) {
            converged = true;
            break;
        }

        let mut centroid = [0.0; 3];
        for v in simplex.iter().take(3) {
            for k in 0..3 {
                centroid[k] += v[k] / 3.0;
            }
        }
        let reflect = |c: f64, w: f64, coef: f64| c + coef * (c - w);
        let mut xr = [0.0; 3];
        for k in 0..3 {
            xr[k] = reflect(centroid[k], simplex[3][k], 1.0);
        }
        let fr = f(&xr);
        if fr < fv[0] {
            let mut xe = [0.0; 3];
            for k in 0..3 {
                xe[k] = reflect(centroid[k], simplex[3][k], 2.0);
            }
            let fe = f(&xe);
            if fe < fr {
                simplex[3] = xe;
                fv[3] = fe;
            } else {
                simplex[3] = xr;
                fv[3] = fr;
            }
        } else if fr < fv[2] {
            simplex[3] = xr;
            fv[3] = fr;
        } else {
            let mut xc = [0.0; 3];
            for k in 0..3 {
                xc[k] = centroid[k] + 0.5 * (simplex[3][k] - centroid[k]);
            }
            let fc = f(&xc);
            if fc < fv[3] {
                simplex[3] = xc;
                fv[3] = fc;
            } else {
                for i in 1..4 {
                    for k in 0..3 {
                        simplex[i][k] = simplex[0][k] + 0.5 * (simplex[i][k] - simplex[0][k]);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }
    (simplex[0], converged)
}
