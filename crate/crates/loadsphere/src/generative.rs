//! Synthetic-profile generation: von Mises-Fisher sampling on the fitted
//! sphere centered along the principal curve, a multivariate-Gaussian
//! baseline, and the KS/RMSE scores used to compare generated corpora with
//! real ones.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::PrincipalCurve;
use crate::embedding::{reconstruct, Embedding, EmbeddingModel};
use crate::error::{Error, Result};
use crate::parallel::map_indices;
use crate::profiles::ProfileMatrix;
use crate::sphere::SphereFit;

/// von Mises-Fisher distribution on the unit 2-sphere.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VmfParams {
    pub mean_direction: [f64; 3],
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(mean_direction: [f64; 3], kappa: f64) -> Result<Self> {
        let norm = norm3(&mean_direction);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "mean direction norm {norm} != 1"
            )));
        }
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa = {kappa} must be positive")));
        }
        Ok(Self { mean_direction, kappa })
    }
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Rotation taking the north pole (0,0,1) to `mu` (unit), as a matrix.
fn pole_rotation(mu: &[f64; 3]) -> Matrix3<f64> {
    let z = Vector3::new(0.0, 0.0, 1.0);
    let m = Vector3::new(mu[0], mu[1], mu[2]);
    let c = z.dot(&m);
    if c > 1.0 - 1e-12 {
        return Matrix3::identity();
    }
    if c < -1.0 + 1e-12 {
        // Antipodal: rotate half a turn around the x axis.
        return Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
    }
    let axis = z.cross(&m).normalize();
    let s = (1.0 - c * c).sqrt();
    let k = Matrix3::new(
        0.0, -axis[2], axis[1], axis[2], 0.0, -axis[0], -axis[1], axis[0], 0.0,
    );
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

fn sample_vmf_with<R: Rng>(params: &VmfParams, n: usize, rng: &mut R) -> Vec<[f64; 3]> {
    let kappa = params.kappa;
    let rot = pole_rotation(&params.mean_direction);
    (0..n)
        .map(|_| {
            // Inverse CDF of the polar cosine: density on [-1,1] is
            // proportional to exp(kappa * w), so
            // w = 1 + ln(u + (1-u) e^{-2 kappa}) / kappa.
            let u: f64 = rng.gen();
            let w = (1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa).clamp(-1.0, 1.0);
            let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let r = (1.0 - w * w).max(0.0).sqrt();
            let p = rot * Vector3::new(r * phi.cos(), r * phi.sin(), w);
            [p[0], p[1], p[2]]
        })
        .collect()
}

/// Draw `n` unit vectors from the VMF distribution. Deterministic given seed.
pub fn sample_vmf(params: &VmfParams, n: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if !(params.kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kappa = {} must be positive; use a uniform sphere sampler for the isotropic case",
            params.kappa
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_vmf_with(params, n, &mut rng))
}

/// Mean-resultant identity A_3(kappa) = coth(kappa) - 1/kappa for the
/// 2-sphere VMF.
pub fn vmf_mean_resultant(kappa: f64) -> f64 {
    if kappa < 1e-8 {
        return kappa / 3.0;
    }
    // coth(kappa) -> 1 well within f64 precision for large kappa.
    let coth = if kappa > 20.0 { 1.0 } else { kappa.cosh() / kappa.sinh() };
    coth - 1.0 / kappa
}

/// Maximum-likelihood fit of a VMF distribution to unit vectors.
pub fn fit_vmf(directions: &[[f64; 3]]) -> Result<VmfParams> {
    if directions.len() < 10 {
        return Err(Error::InsufficientData { need: 10, got: directions.len() });
    }
    let n = directions.len() as f64;
    let mut sum = [0.0; 3];
    for d in directions {
        for j in 0..3 {
            sum[j] += d[j];
        }
    }
    let resultant = norm3(&sum) / n;
    if resultant < 1e-12 {
        return Err(Error::Numeric("zero resultant: mean direction undefined".into()));
    }
    let mean_direction = [
        sum[0] / (resultant * n),
        sum[1] / (resultant * n),
        sum[2] / (resultant * n),
    ];
    let r = resultant.min(1.0 - 1e-12);
    // Banerjee et al. approximation for p = 3, then Newton refinement on
    // A_3(kappa) = r with A' = 1 - A^2 - 2A/kappa.
    let mut kappa = r * (3.0 - r * r) / (1.0 - r * r);
    for _ in 0..25 {
        let a = vmf_mean_resultant(kappa);
        let da = 1.0 - a * a - 2.0 * a / kappa;
        if da.abs() < 1e-300 {
            break;
        }
        let next = (kappa - (a - r) / da).clamp(kappa / 10.0, kappa * 10.0);
        if (next - kappa).abs() <= 1e-10 * kappa {
            kappa = next;
            break;
        }
        kappa = next;
    }
    VmfParams::new(mean_direction, kappa.min(1e8))
}

/// Everything needed to generate synthetic profiles: the inverse pipeline
/// plus the VMF concentration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub embedding: EmbeddingModel,
    pub sphere: SphereFit,
    pub curve: PrincipalCurve,
    pub kappa: f64,
    /// Retained components (3: the curve lives in the 3-D embedding).
    pub retained: usize,
}

/// Generated standardized-shape profiles with their source curve parameter.
#[derive(Debug, Clone)]
pub struct SyntheticProfiles {
    pub profiles: ProfileMatrix,
    pub source_s: Vec<f64>,
}

/// Sample `per_point` profiles around each curve location `f(s)`: draw VMF
/// directions centered on the unit direction of `f(s)` from the sphere
/// center, scale to the sphere radius, invert the PCA projection, and scale
/// by sqrt(D). Each `s` batch uses its own RNG stream so generation is
/// deterministic regardless of batch order or parallelism.
pub fn generate_profiles(
    model: &GeneratorModel,
    s_values: &[f64],
    per_point: usize,
    seed: u64,
) -> Result<SyntheticProfiles> {
    if s_values.is_empty() || per_point == 0 {
        return Err(Error::InvalidParameter("need at least one s value and one profile per point".into()));
    }
    if s_values.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
        return Err(Error::InvalidParameter("s values must lie in [0, 1]".into()));
    }
    let d = model.embedding.dim();
    let batches = map_indices(s_values.len(), |b| {
        let s = s_values[b];
        let f = model.curve.eval(s);
        let dir = [
            f[0] - model.sphere.center[0],
            f[1] - model.sphere.center[1],
            f[2] - model.sphere.center[2],
        ];
        let norm = norm3(&dir);
        if norm < 1e-9 {
            return Err(Error::DegenerateGeometry(format!(
                "curve point at s = {s} coincides with the sphere center"
            )));
        }
        let mu = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
        let params = VmfParams::new(mu, model.kappa)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let draws = sample_vmf_with(&params, per_point, &mut rng);
        let mut coords = DMatrix::zeros(per_point, 3);
        for (i, v) in draws.iter().enumerate() {
            for j in 0..3 {
                coords[(i, j)] = model.sphere.center[j] + model.sphere.radius * v[j];
            }
        }
        Ok(coords)
    });

    let mut values = DMatrix::zeros(s_values.len() * per_point, d);
    let mut ids = Vec::with_capacity(s_values.len() * per_point);
    let mut source_s = Vec::with_capacity(s_values.len() * per_point);
    let sqrt_d = (d as f64).sqrt();
    for (b, batch) in batches.into_iter().enumerate() {
        let coords = batch?;
        let ids_batch: Vec<String> =
            (0..per_point).map(|k| format!("syn-{b:03}-{k:03}")).collect();
        let emb = Embedding { coords, meter_ids: ids_batch.clone() };
        let x = reconstruct(&model.embedding, &emb)?;
        for i in 0..per_point {
            for j in 0..d {
                values[(b * per_point + i, j)] = sqrt_d * x[(i, j)];
            }
            source_s.push(s_values[b]);
        }
        ids.extend(ids_batch);
    }
    Ok(SyntheticProfiles {
        profiles: ProfileMatrix::from_values(values, ids)?,
        source_s,
    })
}

/// Multivariate-Gaussian baseline over standardized profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MvgModel {
    pub mean: Vec<f64>,
    /// Row-major D x D covariance (diagonal loading applied when the sample
    /// is rank-deficient).
    pub covariance: Vec<f64>,
    pub shrinkage_applied: bool,
}

impl MvgModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.covariance)
    }
}

/// Moment fit of an MVG to the rows of `data`, with diagonal loading
/// delta = 1e-6 trace/D when the sample cannot support a full-rank
/// covariance.
pub fn fit_mvg(data: &DMatrix<f64>) -> Result<MvgModel> {
    let m = data.nrows();
    let d = data.ncols();
    if m < 2 {
        return Err(Error::InsufficientData { need: 2, got: m });
    }
    let mean = data.row_mean();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let mut cov = centered.transpose() * &centered / (m as f64 - 1.0);
    // Symmetrize against floating-point drift.
    cov = (&cov + cov.transpose()) * 0.5;
    let rank_deficient = m <= d || nalgebra::Cholesky::new(cov.clone()).is_none();
    let mut shrinkage_applied = false;
    if rank_deficient {
        let delta = 1e-6 * cov.trace() / d as f64;
        if delta > 0.0 {
            for i in 0..d {
                cov[(i, i)] += delta;
            }
            shrinkage_applied = true;
        }
    }
    Ok(MvgModel {
        mean: mean.iter().copied().collect(),
        covariance: cov.transpose().as_slice().to_vec(),
        shrinkage_applied,
    })
}

/// Draw `n` rows from the fitted MVG. Deterministic given seed.
pub fn sample_mvg(model: &MvgModel, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let d = model.dim();
    let cov = model.covariance_matrix();
    let max_abs = cov.abs().max();
    let factor = match nalgebra::Cholesky::new(cov) {
        Some(c) => Some(c.l()),
        None if max_abs < 1e-12 => None, // zero covariance: all samples at the mean
        None => {
            return Err(Error::Numeric(
                "singular covariance; refit with shrinkage before sampling".into(),
            ))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        if let Some(l) = &factor {
            let z = nalgebra::DVector::from_fn(d, |_, _| {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                e
            });
            let x = l * z;
            for j in 0..d {
                out[(i, j)] = model.mean[j] + x[j];
            }
        } else {
            for j in 0..d {
                out[(i, j)] = model.mean[j];
            }
        }
    }
    Ok(out)
}

/// Two-sample Kolmogorov-Smirnov statistic between pooled value sets.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] == x {
            i += 1;
        }
        while j < sb.len() && sb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// RMSE between the per-time-step medians of two profile sets.
pub fn rmse_profiles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} time steps",
            a.ncols(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::InsufficientData { need: 1, got: 0 });
    }
    let median = |m: &DMatrix<f64>, j: usize| -> f64 {
        let mut col: Vec<f64> = m.column(j).iter().copied().collect();
        col.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let n = col.len();
        if n % 2 == 1 {
            col[n / 2]
        } else {
            0.5 * (col[n / 2 - 1] + col[n / 2])
        }
    };
    let d = a.ncols();
    let sse: f64 = (0..d)
        .map(|j| (median(a, j) - median(b, j)).powi(2))
        .sum();
    Ok((sse / d as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{fit_principal_curve, order_dataset, CurveConfig};
    use crate::embedding::{fit_pca, project};
    use crate::oracle::{generate_process, SyntheticProcessConfig};
    use crate::profiles::{normalize, standardize};
    use crate::sphere::fit_sphere;
    use approx::assert_abs_diff_eq;

    fn fitted_generator(seed: u64, kappa: f64) -> (GeneratorModel, DMatrix<f64>) {
        let config = SyntheticProcessConfig { seed, ..Default::default() };
        let (p, _) = generate_process(&config, true).unwrap();
        let x = normalize(&standardize(&p).unwrap());
        let embedding = fit_pca(&x).unwrap();
        let z = project(&embedding, &x, 3).unwrap().coords;
        let sphere = fit_sphere(&z).unwrap();
        let curve = fit_principal_curve(&z, &CurveConfig::default()).unwrap();
        (GeneratorModel { embedding, sphere, curve, kappa, retained: 3 }, z)
    }

    #[test]
    fn vmf_concentration_limit() {
        let mu = [0.0, 0.6, 0.8];
        let params = VmfParams::new(mu, 1e6).unwrap();
        for p in sample_vmf(&params, 1000, 7).unwrap() {
            let d = ((p[0] - mu[0]).powi(2) + (p[1] - mu[1]).powi(2) + (p[2] - mu[2]).powi(2))
                .sqrt();
            assert!(d < 0.01, "distance {d}");
        }
    }

    #[test]
    fn vmf_round_trip_kappa_7_1() {
        let mu = [1.0 / 3.0_f64.sqrt(); 3];
        let params = VmfParams::new(mu, 7.1).unwrap();
        let sample = sample_vmf(&params, 100_000, 11).unwrap();
        let fit = fit_vmf(&sample).unwrap();
        let dot: f64 = (0..3).map(|j| fit.mean_direction[j] * mu[j]).sum();
        assert!(dot.clamp(-1.0, 1.0).acos().to_degrees() < 1.0);
        assert!((fit.kappa - 7.1).abs() / 7.1 < 0.05, "kappa {}", fit.kappa);
    }

    #[test]
    fn vmf_resultant_identity() {
        for &kappa in &[0.5, 2.0, 7.1, 20.0] {
            let params = VmfParams::new([0.0, 0.0, 1.0], kappa).unwrap();
            let sample = sample_vmf(&params, 100_000, 3).unwrap();
            let mut sum = [0.0; 3];
            for p in &sample {
                for j in 0..3 {
                    sum[j] += p[j];
                }
            }
            let r = norm3(&sum) / sample.len() as f64;
            let expected = vmf_mean_resultant(kappa);
            assert!(
                (r - expected).abs() / expected < 0.02,
                "kappa {kappa}: R-bar {r} vs A(kappa) {expected}"
            );
        }
    }

    #[test]
    fn vmf_polar_cosine_matches_analytic_cdf() {
        let kappa = 3.0;
        let params = VmfParams::new([0.0, 0.0, 1.0], kappa).unwrap();
        let n = 100_000;
        let mut w: Vec<f64> = sample_vmf(&params, n, 5)
            .unwrap()
            .iter()
            .map(|p| p[2])
            .collect();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // F(w) = (e^{kappa w} - e^{-kappa}) / (e^{kappa} - e^{-kappa})
        let cdf = |x: f64| ((kappa * x).exp() - (-kappa).exp()) / (kappa.exp() - (-kappa).exp());
        let mut d = 0.0f64;
        for (i, &x) in w.iter().enumerate() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n as f64).abs());
            d = d.max((f - (i + 1) as f64 / n as f64).abs());
        }
        // One-sample KS: critical value at alpha = 0.01 is 1.63 / sqrt(n).
        assert!(d * (n as f64).sqrt() < 1.63, "sqrt(n) D = {}", d * (n as f64).sqrt());
    }

    #[test]
    fn vmf_rotation_equivariance() {
        let kappa = 7.1;
        let base = VmfParams::new([0.0, 0.0, 1.0], kappa).unwrap();
        // Rotation: pole to an arbitrary direction.
        let target = [0.48, -0.6, 0.64];
        let rot = pole_rotation(&target);
        let rotated = VmfParams::new(target, kappa).unwrap();
        let a = sample_vmf(&base, 50_000, 9).unwrap();
        let b = sample_vmf(&rotated, 50_000, 9).unwrap();
        let mean = |s: &[[f64; 3]]| {
            let mut m = [0.0; 3];
            for p in s {
                for j in 0..3 {
                    m[j] += p[j];
                }
            }
            let n = norm3(&m);
            [m[0] / n, m[1] / n, m[2] / n]
        };
        let ma = mean(&a);
        let expected = rot * Vector3::new(ma[0], ma[1], ma[2]);
        let mb = mean(&b);
        let dot = expected[0] * mb[0] + expected[1] * mb[1] + expected[2] * mb[2];
        assert!(dot.clamp(-1.0, 1.0).acos().to_degrees() < 1.0);
    }

    #[test]
    fn vmf_seeded_determinism() {
        let params = VmfParams::new([0.6, 0.0, 0.8], 4.0).unwrap();
        let a = sample_vmf(&params, 1000, 42).unwrap();
        let b = sample_vmf(&params, 1000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_vmf(&params, 1000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generate_paper_protocol_count_and_norms() {
        let (model, _) = fitted_generator(1, 7.1);
        let s: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
        let out = generate_profiles(&model, &s, 10, 123).unwrap();
        assert_eq!(out.profiles.values().nrows(), 250);
        assert_eq!(out.source_s.len(), 250);
        // Re-standardized rows keep the sqrt(D) norm identity.
        let std = standardize(&out.profiles).unwrap();
        let d = std.values().ncols() as f64;
        for row in std.values().row_iter() {
            assert_abs_diff_eq!(row.norm(), d.sqrt(), epsilon = 1e-6);
        }
    }

    #[test]
    fn generate_concentration_limit_hits_curve_reconstruction() {
        let (model, _) = fitted_generator(2, 1e6);
        let s = [0.37];
        let out = generate_profiles(&model, &s, 5, 7).unwrap();
        // Rank-3 reconstruction of the curve point, scaled by sqrt(D).
        let f = model.curve.eval(0.37);
        let coords = DMatrix::from_row_slice(1, 3, &f);
        let emb = Embedding { coords, meter_ids: vec!["c".into()] };
        let x = reconstruct(&model.embedding, &emb).unwrap();
        let d = model.embedding.dim();
        let sqrt_d = (d as f64).sqrt();
        for i in 0..out.profiles.values().nrows() {
            for j in 0..d {
                // The sphere fit leaves a small radial gap between f(s) and
                // its spherical projection; 1e-2 covers the concentration
                // limit on top of that.
                assert!(
                    (out.profiles.values()[(i, j)] - sqrt_d * x[(0, j)]).abs() < 1e-2 + 2.0 * model.sphere.residual_rms,
                    "row {i} col {j}"
                );
            }
        }
    }

    #[test]
    fn generate_round_trip_projection_indices() {
        let (model, _) = fitted_generator(3, 50.0);
        let s_values = [0.15, 0.45, 0.8];
        let out = generate_profiles(&model, &s_values, 40, 99).unwrap();
        let x = normalize(&standardize(&out.profiles).unwrap());
        let z = project(&model.embedding, &x, 3).unwrap().coords;
        let ordered = order_dataset(&model.curve, &z);
        for (b, &s) in s_values.iter().enumerate() {
            let batch = &ordered.s[b * 40..(b + 1) * 40];
            let mean = batch.iter().sum::<f64>() / 40.0;
            assert!((mean - s).abs() < 0.05, "batch {b}: mean {mean} vs s {s}");
        }
    }

    #[test]
    fn mvg_moment_recovery_and_zero_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = 6;
        let m = 5000;
        let data = DMatrix::from_fn(m, d, |_, j| {
            let e: f64 = rng.sample(rand_distr::StandardNormal);
            j as f64 + (1.0 + 0.3 * j as f64) * e
        });
        let model = fit_mvg(&data).unwrap();
        let sample = sample_mvg(&model, 100_000, 4).unwrap();
        let refit = fit_mvg(&sample).unwrap();
        for j in 0..d {
            assert!((refit.mean[j] - model.mean[j]).abs() < 0.01 * (1.0 + model.mean[j].abs()));
        }
        let frob_diff = (refit.covariance_matrix() - model.covariance_matrix()).norm();
        assert!(frob_diff / model.covariance_matrix().norm() < 0.05);

        // Zero covariance collapses every sample onto the mean.
        let constant = DMatrix::from_fn(10, 3, |_, j| j as f64);
        let zero = fit_mvg(&constant).unwrap();
        let s = sample_mvg(&zero, 5, 0).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                assert_abs_diff_eq!(s[(i, j)], j as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ks_distance_reference_cases() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        assert_abs_diff_eq!(ks_distance(&a, &a).unwrap(), 0.0, epsilon = 1e-12);
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert_abs_diff_eq!(ks_distance(&a, &b).unwrap(), 1.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let v: Vec<f64> = (0..100_000).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let d = ks_distance(&u, &v).unwrap();
        assert!((d - 0.5).abs() < 0.01, "d = {d}");
    }

    #[test]
    fn rmse_reference_cases() {
        let a = DMatrix::from_fn(9, 4, |i, j| i as f64 + j as f64);
        assert_abs_diff_eq!(rmse_profiles(&a, &a).unwrap(), 0.0, epsilon = 1e-12);
        let b = a.map(|x| x + 0.01);
        assert_abs_diff_eq!(rmse_profiles(&a, &b).unwrap(), 0.01, epsilon = 1e-12);
        let c = DMatrix::zeros(3, 5);
        assert!(rmse_profiles(&a, &c).is_err());
    }
}
