//! Penalized cubic B-spline smoother with GCV-selected smoothing parameter.
//!
//! Uniform cubic B-spline basis over the data range, second-difference
//! coefficient penalty, and a log-spaced GCV grid with a positive floor so the
//! smoother never degenerates into an interpolant.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

const DEGREE: usize = 3;

#[derive(Debug, Clone)]
pub struct SmoothingSpline {
    /// Extended (uniform) knot vector.
    knots: Vec<f64>,
    coefficients: Vec<f64>,
    domain: (f64, f64),
    pub lambda: f64,
    pub gcv_score: f64,
}

/// Cubic B-spline basis values at `x`: the index of the first of the four
/// active basis functions, and their values.
fn basis_at(knots: &[f64], x: f64) -> (usize, [f64; 4]) {
    let nb = knots.len() - DEGREE - 1;
    // Locate the knot span containing x.
    let mut span = DEGREE;
    while span < nb - 1 && x >= knots[span + 1] {
        span += 1;
    }
    // Cox-de Boor triangle.
    let mut values = [0.0f64; 4];
    values[0] = 1.0;
    let mut left = [0.0f64; 4];
    let mut right = [0.0f64; 4];
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { values[r] / denom } else { 0.0 };
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    (span - DEGREE, values)
}

fn build_knots(lo: f64, hi: f64, segments: usize) -> Vec<f64> {
    let h = (hi - lo) / segments as f64;
    (0..=(segments + 2 * DEGREE))
        .map(|i| lo + h * (i as f64 - DEGREE as f64))
        .collect()
}

impl SmoothingSpline {
    /// Fit `y` as a smooth function of `x`. `knot_count` controls the basis
    /// size (number of interior grid points, >= 2).
    pub fn fit(x: &[f64], y: &[f64], knot_count: usize) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::ShapeMismatch(format!("{} x values vs {} y values", n, y.len())));
        }
        if n < 5 {
            return Err(Error::InsufficientData { need: 5, got: n });
        }
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Numeric("degenerate abscissa range".into()));
        }
        // Pad the domain slightly so boundary points sit strictly inside.
        let pad = (hi - lo) * 1e-9;
        let (lo, hi) = (lo - pad, hi + pad);
        let segments = knot_count.max(2);
        let knots = build_knots(lo, hi, segments);
        let nb = knots.len() - DEGREE - 1;

        let mut b = DMatrix::zeros(n, nb);
        for (i, &xi) in x.iter().enumerate() {
            let (first, vals) = basis_at(&knots, xi.clamp(lo, hi));
            for (k, v) in vals.iter().enumerate() {
                b[(i, first + k)] = *v;
            }
        }
        let yv = DVector::from_column_slice(y);
        let btb = b.transpose() * &b;
        let bty = b.transpose() * &yv;

        // Second-difference penalty on coefficients.
        let mut d2 = DMatrix::zeros(nb - 2, nb);
        for i in 0..nb - 2 {
            d2[(i, i)] = 1.0;
            d2[(i, i + 1)] = -2.0;
            d2[(i, i + 2)] = 1.0;
        }
        let penalty = d2.transpose() * d2;

        // GCV over a log-spaced lambda grid, scaled to the problem and floored
        // away from zero.
        let penalty_trace: f64 = penalty.trace();
        let scale = btb.trace() / penalty_trace.max(1e-300);
        let mut best: Option<(f64, f64, DVector<f64>)> = None;
        for step in 0..25 {
            let lambda = scale * 10f64.powf(-4.0 + 8.0 * step as f64 / 24.0);
            let a = &btb + &penalty * lambda + DMatrix::identity(nb, nb) * (1e-10 * scale);
            let chol = match Cholesky::new(a) {
                Some(c) => c,
                None => continue,
            };
            let beta = chol.solve(&bty);
            let fitted = &b * &beta;
            let rss: f64 = (&yv - &fitted).norm_squared();
            // EDF = trace(A^{-1} B'B).
            let inv_btb = chol.solve(&btb);
            let edf = inv_btb.trace();
            let denom = (n as f64 - edf).max(1e-6);
            let gcv = n as f64 * rss / (denom * denom);
            if best.as_ref().map_or(true, |(g, _, _)| gcv < *g) {
                best = Some((gcv, lambda, beta));
            }
        }
        let (gcv_score, lambda, beta) =
            best.ok_or_else(|| Error::Numeric("spline system not positive definite".into()))?;
        Ok(Self {
            knots,
            coefficients: beta.as_slice().to_vec(),
            domain: (lo, hi),
            lambda,
            gcv_score,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.domain.0, self.domain.1);
        let (first, vals) = basis_at(&self.knots, x);
        vals.iter()
            .enumerate()
            .map(|(k, v)| v * self.coefficients[first + k])
            .sum()
    }
}
