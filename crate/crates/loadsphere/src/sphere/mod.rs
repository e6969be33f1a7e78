//! Sphere fitting in the 3-D embedding, spherical-coordinate transforms, and
//! marginal-distribution outlier detection.
//!
//! The sphere is fitted by the linearized least-squares formulation: expanding
//! `||z - c||^2 = rho` gives a system linear in `(2c, rho - ||c||^2)`. Outliers
//! are flagged per spherical coordinate against the central confidence interval
//! of a fitted von Mises (angles) or skew-normal (radius) marginal.

mod bessel;
mod skew_normal;
mod von_mises;

pub use bessel::bessel_ratio;
pub use skew_normal::{fit_skew_normal, moment_fit, SkewNormalFit, SkewNormalParams};
pub use von_mises::{
    circular_mean_resultant, fit_von_mises, wrap_angle, wrap_to_branch, VonMisesParams, KAPPA_MAX,
};

use nalgebra::{DMatrix, DVector, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indices;

/// Least-squares sphere: center, radius, and RMS of the radial residuals.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SphereFit {
    pub center: [f64; 3],
    pub radius: f64,
    pub residual_rms: f64,
}

/// Spherical coordinates of every point, relative to a fitted sphere center.
///
/// Azimuth is measured from the positive first axis, polar angle from the
/// positive third axis. Points that coincide with the center have no defined
/// direction and are flagged in `undefined`.
#[derive(Debug, Clone)]
pub struct SphericalCoords {
    pub azimuth: Vec<f64>,
    pub polar: Vec<f64>,
    pub radius: Vec<f64>,
    pub undefined: Vec<bool>,
}

/// Fitted marginal models for the three spherical coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphereModel {
    pub fit: SphereFit,
    /// Circular mean subtracted from the azimuth before fitting/testing.
    pub azimuth_center: f64,
    pub azimuth: VonMisesParams,
    pub polar: VonMisesParams,
    pub radius: SkewNormalFit,
}

/// Per-variable rejection bounds at a given confidence level.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RejectionBounds {
    pub azimuth: (f64, f64),
    pub polar: (f64, f64),
    pub radius: (f64, f64),
    pub level: f64,
}

/// Per-profile outlier flags plus the bounds that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutlierReport {
    pub bounds: RejectionBounds,
    pub azimuth_out: Vec<bool>,
    pub polar_out: Vec<bool>,
    pub radius_out: Vec<bool>,
}

impl OutlierReport {
    pub fn any_out(&self, i: usize) -> bool {
        self.azimuth_out[i] || self.polar_out[i] || self.radius_out[i]
    }

    pub fn len(&self) -> usize {
        self.azimuth_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuth_out.is_empty()
    }
}

const ORIGIN_EPS: f64 = 1e-12;

/// Fit a sphere to `points` (M x 3) by linear least squares.
pub fn fit_sphere(points: &DMatrix<f64>) -> Result<SphereFit> {
    let m = points.nrows();
    if points.ncols() != 3 {
        return Err(Error::ShapeMismatch(format!("{} columns, expected 3", points.ncols())));
    }
    if m < 4 {
        return Err(Error::InsufficientData { need: 4, got: m });
    }
    // Rows [2x 2y 2z 1] * [c; rho - ||c||^2] = ||p||^2, solved via normal
    // equations (4x4).
    let mut ata = Matrix4::<f64>::zeros();
    let mut atb = Vector4::<f64>::zeros();
    for i in 0..m {
        let p = Vector3::new(points[(i, 0)], points[(i, 1)], points[(i, 2)]);
        let row = Vector4::new(2.0 * p.x, 2.0 * p.y, 2.0 * p.z, 1.0);
        let b = p.norm_squared();
        ata += row * row.transpose();
        atb += row * b;
    }
    let solution = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| Error::DegenerateGeometry("coplanar or collinear points".into()))?;
    let center = Vector3::new(solution[0], solution[1], solution[2]);
    let rho = solution[3] + center.norm_squared();
    if rho <= 0.0 {
        return Err(Error::DegenerateGeometry("non-positive squared radius".into()));
    }
    let radius = rho.sqrt();
    let mut ss = 0.0;
    for i in 0..m {
        let p = Vector3::new(points[(i, 0)], points[(i, 1)], points[(i, 2)]);
        let d = (p - center).norm() - radius;
        ss += d * d;
    }
    Ok(SphereFit {
        center: [center.x, center.y, center.z],
        radius,
        residual_rms: (ss / m as f64).sqrt(),
    })
}

/// Transform points to spherical coordinates around the fitted center.
pub fn to_spherical(points: &DMatrix<f64>, fit: &SphereFit) -> SphericalCoords {
    let m = points.nrows();
    let c = fit.center;
    let mut out = SphericalCoords {
        azimuth: vec![0.0; m],
        polar: vec![0.0; m],
        radius: vec![0.0; m],
        undefined: vec![false; m],
    };
    for i in 0..m {
        let x = points[(i, 0)] - c[0];
        let y = points[(i, 1)] - c[1];
        let z = points[(i, 2)] - c[2];
        let r = (x * x + y * y + z * z).sqrt();
        if r < ORIGIN_EPS {
            out.undefined[i] = true;
            continue;
        }
        let rxy = (x * x + y * y).sqrt();
        let phi = if rxy < ORIGIN_EPS {
            0.0 // pole: azimuth conventionally 0
        } else {
            let sign = if y >= 0.0 { 1.0 } else { -1.0 };
            sign * (x / rxy).acos()
        };
        out.azimuth[i] = phi;
        out.polar[i] = (z / r).acos();
        out.radius[i] = r;
    }
    out
}

/// Reconstruct a centered Cartesian point from one spherical triple.
pub fn spherical_to_cartesian(azimuth: f64, polar: f64, radius: f64) -> [f64; 3] {
    [
        radius * polar.sin() * azimuth.cos(),
        radius * polar.sin() * azimuth.sin(),
        radius * polar.cos(),
    ]
}

/// Fit the three marginal distributions to the spherical coordinates.
/// Undefined-direction rows are excluded from the fits.
pub fn fit_sphere_model(points: &DMatrix<f64>) -> Result<SphereModel> {
    let fit = fit_sphere(points)?;
    let coords = to_spherical(points, &fit);
    let keep: Vec<usize> = (0..coords.azimuth.len()).filter(|&i| !coords.undefined[i]).collect();
    let azimuths: Vec<f64> = keep.iter().map(|&i| coords.azimuth[i]).collect();
    let polars: Vec<f64> = keep.iter().map(|&i| coords.polar[i]).collect();
    let radii: Vec<f64> = keep.iter().map(|&i| coords.radius[i]).collect();

    let (azimuth_center, _) = circular_mean_resultant(&azimuths);
    let centered: Vec<f64> = azimuths.iter().map(|&a| wrap_angle(a - azimuth_center)).collect();
    let azimuth = fit_von_mises(&centered)?;
    let polar = fit_von_mises(&polars)?;
    let radius = fit_skew_normal(&radii)?;
    Ok(SphereModel { fit, azimuth_center, azimuth, polar, radius })
}

/// Central rejection interval `[q_{(1-level)/2}, q_{(1+level)/2}]` per variable.
pub fn rejection_bounds(model: &SphereModel, level: f64) -> Result<RejectionBounds> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level {level}")));
    }
    let lo_p = (1.0 - level) / 2.0;
    let hi_p = (1.0 + level) / 2.0;
    Ok(RejectionBounds {
        azimuth: (model.azimuth.quantile(lo_p)?, model.azimuth.quantile(hi_p)?),
        polar: (model.polar.quantile(lo_p)?, model.polar.quantile(hi_p)?),
        radius: (model.radius.params.quantile(lo_p)?, model.radius.params.quantile(hi_p)?),
        level,
    })
}

/// Flag profiles whose spherical coordinates fall outside the rejection
/// bounds. The azimuth is centered by the model's circular mean before
/// testing; undefined-direction rows are flagged as radius outliers.
pub fn detect_outliers(
    model: &SphereModel,
    coords: &SphericalCoords,
    level: f64,
) -> Result<OutlierReport> {
    let bounds = rejection_bounds(model, level)?;
    let m = coords.azimuth.len();
    let flags = map_indices(m, |i| {
        if coords.undefined[i] {
            return (false, false, true);
        }
        let phi = wrap_to_branch(
            wrap_angle(coords.azimuth[i] - model.azimuth_center),
            model.azimuth.mu,
        );
        let theta = wrap_to_branch(coords.polar[i], model.polar.mu);
        let r = coords.radius[i];
        (
            phi < bounds.azimuth.0 || phi > bounds.azimuth.1,
            theta < bounds.polar.0 || theta > bounds.polar.1,
            r < bounds.radius.0 || r > bounds.radius.1,
        )
    });
    let mut report = OutlierReport {
        bounds,
        azimuth_out: Vec::with_capacity(m),
        polar_out: Vec::with_capacity(m),
        radius_out: Vec::with_capacity(m),
    };
    for (a, p, r) in flags {
        report.azimuth_out.push(a);
        report.polar_out.push(p);
        report.radius_out.push(r);
    }
    Ok(report)
}

/// Convenience: matrix from row triples.
pub fn points_from_rows(rows: &[[f64; 3]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j])
}

#[allow(dead_code)]
pub(crate) fn column(points: &DMatrix<f64>, j: usize) -> DVector<f64> {
    points.column(j).clone_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn axis_points_give_unit_sphere() {
        let pts = points_from_rows(&[
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]);
        let fit = fit_sphere(&pts).unwrap();
        assert_abs_diff_eq!(fit.center[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.center[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.center[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.radius, 1.0, epsilon = 1e-12);
    }

    fn sphere_points(center: [f64; 3], radius: f64, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = DMatrix::zeros(n, 3);
        for i in 0..n {
            let v: [f64; 3] = [
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
                rng.sample(rand_distr::StandardNormal),
            ];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            for j in 0..3 {
                pts[(i, j)] = center[j] + radius * v[j] / norm;
            }
        }
        pts
    }

    #[test]
    fn exact_sphere_recovery() {
        let pts = sphere_points([1.0, 2.0, 3.0], 0.8, 500, 4);
        let fit = fit_sphere(&pts).unwrap();
        assert_abs_diff_eq!(fit.center[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.center[1], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.center[2], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.radius, 0.8, epsilon = 1e-9);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn noisy_sphere_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pts = sphere_points([1.0, 2.0, 3.0], 0.8, 500, 4);
        for v in pts.iter_mut() {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            *v += 0.01 * e;
        }
        let fit = fit_sphere(&pts).unwrap();
        for (j, c) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((fit.center[j] - c).abs() < 0.01);
        }
        assert!((fit.radius - 0.8).abs() < 0.01);
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let mut pts = DMatrix::zeros(10, 3);
        for i in 0..10 {
            pts[(i, 0)] = i as f64;
            pts[(i, 1)] = (i * i) as f64 * 0.1;
            pts[(i, 2)] = 0.0;
        }
        // All in the z=0 plane: infinitely many spheres fit equally badly in z.
        // The normal matrix is still full rank here because rho couples in, so
        // check the truly collinear case instead.
        let mut line = DMatrix::zeros(10, 3);
        for i in 0..10 {
            line[(i, 0)] = i as f64;
        }
        assert!(fit_sphere(&line).is_err());
    }

    #[test]
    fn spherical_axis_cases() {
        let fit = SphereFit { center: [0.0; 3], radius: 1.0, residual_rms: 0.0 };
        let pts = points_from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 1.0]]);
        let sc = to_spherical(&pts, &fit);
        assert_abs_diff_eq!(sc.azimuth[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.polar[0], PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.radius[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.azimuth[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.polar[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.azimuth[2], PI / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sc.polar[2], (1.0 / 3f64.sqrt()).acos(), epsilon = 1e-12);
        assert_abs_diff_eq!(sc.radius[2], 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn spherical_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let fit = SphereFit { center: [0.3, -0.2, 0.1], radius: 1.0, residual_rms: 0.0 };
        let pts = DMatrix::from_fn(200, 3, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let sc = to_spherical(&pts, &fit);
        for i in 0..200 {
            if sc.undefined[i] {
                continue;
            }
            let back = spherical_to_cartesian(sc.azimuth[i], sc.polar[i], sc.radius[i]);
            for j in 0..3 {
                assert_abs_diff_eq!(back[j] + fit.center[j], pts[(i, j)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sphere_fit_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut pts = sphere_points([0.5, -0.5, 0.2], 1.1, 300, 6);
        for v in pts.iter_mut() {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            *v += 0.02 * e;
        }
        let fit = fit_sphere(&pts).unwrap();
        let objective = |c: [f64; 3], rho: f64| -> f64 {
            let mut s = 0.0;
            for i in 0..pts.nrows() {
                let d2 = (0..3).map(|j| (pts[(i, j)] - c[j]).powi(2)).sum::<f64>();
                s += (d2 - rho).powi(2);
            }
            s
        };
        let rho = fit.radius * fit.radius;
        let base = objective(fit.center, rho);
        for axis in 0..4 {
            for dir in [-1e-6, 1e-6] {
                let mut c = fit.center;
                let mut r = rho;
                if axis < 3 {
                    c[axis] += dir;
                } else {
                    r += dir;
                }
                assert!(objective(c, r) >= base - 1e-12);
            }
        }
    }

    #[test]
    fn far_tail_radius_is_flagged() {
        let mut pts = sphere_points([0.0, 0.0, 0.0], 1.0, 300, 31);
        // Perturb radii slightly so the SN fit has spread, then plant a far point.
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for v in pts.iter_mut() {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            *v += 0.01 * e;
        }
        pts[(0, 0)] = 0.05;
        pts[(0, 1)] = 0.0;
        pts[(0, 2)] = 0.0;
        let model = fit_sphere_model(&pts).unwrap();
        let coords = to_spherical(&pts, &model.fit);
        let report = detect_outliers(&model, &coords, 0.95).unwrap();
        assert!(report.radius_out[0]);
    }

    #[test]
    fn nested_rejection_regions() {
        let pts = {
            let mut rng = ChaCha8Rng::seed_from_u64(33);
            let mut p = sphere_points([0.0, 0.0, 0.0], 1.0, 400, 34);
            for v in p.iter_mut() {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                *v += 0.02 * e;
            }
            p
        };
        let model = fit_sphere_model(&pts).unwrap();
        let coords = to_spherical(&pts, &model.fit);
        let r95 = detect_outliers(&model, &coords, 0.95).unwrap();
        let r99 = detect_outliers(&model, &coords, 0.99).unwrap();
        for i in 0..r95.len() {
            if r99.any_out(i) {
                assert!(r95.any_out(i), "0.99 flag not nested in 0.95 at {i}");
            }
        }
    }
}
