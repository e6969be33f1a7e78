//! Von Mises distribution: maximum-likelihood fitting, CDF/quantiles by
//! numeric inversion, and a Best-Fisher sampler for Monte Carlo checks.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bessel::{bessel_i0, bessel_ratio};
use crate::error::{Error, Result};

/// Concentration cap for numerically degenerate samples (all angles equal).
pub const KAPPA_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VonMisesParams {
    /// Mean direction, radians in (-pi, pi].
    pub mu: f64,
    /// Concentration, >= 0 (0 is the circular uniform distribution).
    pub kappa: f64,
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Circular mean and mean resultant length of a sample of angles.
pub fn circular_mean_resultant(angles: &[f64]) -> (f64, f64) {
    let n = angles.len() as f64;
    let c: f64 = angles.iter().map(|a| a.cos()).sum::<f64>() / n;
    let s: f64 = angles.iter().map(|a| a.sin()).sum::<f64>() / n;
    (s.atan2(c), (c * c + s * s).sqrt())
}

/// MLE fit: circular mean for mu, then the Banerjee closed form for kappa
/// refined by one Newton step on `A(kappa) = R`.
pub fn fit_von_mises(angles: &[f64]) -> Result<VonMisesParams> {
    if angles.len() < 10 {
        return Err(Error::InsufficientData { need: 10, got: angles.len() });
    }
    let (mu, r) = circular_mean_resultant(angles);
    if r < 1e-12 {
        // No preferred direction; mu is undefined, report the uniform fit.
        return Ok(VonMisesParams { mu: 0.0, kappa: 0.0 });
    }
    if r >= 1.0 - 1e-12 {
        return Ok(VonMisesParams { mu: wrap_angle(mu), kappa: KAPPA_MAX });
    }
    let mut kappa = r * (2.0 - r * r) / (1.0 - r * r);
    // One Newton step on A(kappa) - R = 0; A'(k) = 1 - A/k - A^2.
    let a = bessel_ratio(kappa);
    let da = 1.0 - a / kappa - a * a;
    if da.abs() > 1e-14 {
        kappa -= (a - r) / da;
    }
    Ok(VonMisesParams { mu: wrap_angle(mu), kappa: kappa.clamp(0.0, KAPPA_MAX) })
}

impl VonMisesParams {
    pub fn pdf(&self, x: f64) -> f64 {
        if self.kappa > 500.0 {
            // Normal limit N(mu, 1/kappa); avoids I0 overflow.
            let s2 = 1.0 / self.kappa;
            let d = wrap_angle(x - self.mu);
            return (-0.5 * d * d / s2).exp() / (2.0 * PI * s2).sqrt();
        }
        (self.kappa * (x - self.mu).cos()).exp() / (2.0 * PI * bessel_i0(self.kappa))
    }

    /// CDF on the branch (mu - pi, mu + pi], by Simpson integration.
    pub fn cdf(&self, x: f64) -> f64 {
        let lo = self.mu - PI;
        let hi = wrap_to_branch(x, self.mu);
        if self.kappa > 500.0 {
            let sd = (1.0 / self.kappa).sqrt();
            return normal_cdf((hi - self.mu) / sd);
        }
        simpson(|t| self.pdf(t), lo, hi, 4000)
    }

    /// Quantile by bisection of the CDF on (mu - pi, mu + pi].
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("quantile level {p}")));
        }
        if self.kappa > 500.0 {
            let sd = (1.0 / self.kappa).sqrt();
            return Ok(self.mu + sd * normal_quantile(p));
        }
        let (mut lo, mut hi) = (self.mu - PI, self.mu + PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Best-Fisher rejection sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.kappa < 1e-8 {
            return wrap_angle(rng.gen_range(-PI..PI));
        }
        let tau = 1.0 + (1.0 + 4.0 * self.kappa * self.kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * self.kappa);
        let rr = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let u1: f64 = rng.gen();
            let z = (PI * u1).cos();
            let f = (1.0 + rr * z) / (rr + z);
            let c = self.kappa * (rr - f);
            let u2: f64 = rng.gen();
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let u3: f64 = rng.gen();
                let sign = if u3 - 0.5 >= 0.0 { 1.0 } else { -1.0 };
                return wrap_angle(sign * f.acos() + self.mu);
            }
        }
    }
}

/// Map `x` into the branch (center - pi, center + pi].
pub fn wrap_to_branch(x: f64, center: f64) -> f64 {
    center + wrap_angle(x - center)
}

pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if (b - a).abs() < 1e-300 {
        return 0.0;
    }
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}
