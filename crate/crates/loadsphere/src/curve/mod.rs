//! Principal-curve fitting over the 3-D point cloud, projection indices,
//! latent ordering, s-binning into clusters, and a Ward-linkage baseline.
//!
//! The curve is fitted by projection/smoothing alternation: project points to
//! the current curve for their `s` values, smooth each coordinate against `s`
//! with a penalized spline, reparametrize the result to unit speed, repeat
//! until the mean squared projection distance stops improving.

mod spline;

pub use spline::SmoothingSpline;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indices;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurveConfig {
    /// Relative residual-change convergence tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Spline segments; `None` picks `min(25, M/10)`.
    pub knots: Option<usize>,
    /// Projection grid cells.
    pub grid: usize,
    /// Dense curve samples kept after reparametrization.
    pub samples: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { tol: 1e-4, max_iter: 50, knots: None, grid: 2000, samples: 2001 }
    }
}

/// Fitted space curve, stored as a dense unit-speed polyline over s in [0,1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrincipalCurve {
    pub points: Vec<[f64; 3]>,
    /// Cumulative arc length at each sample; last entry is the total length.
    pub arc_length: Vec<f64>,
    /// Mean squared orthogonal projection distance at the accepted iterate.
    pub fit_residual: f64,
    pub converged: bool,
    /// Set when the curve explains little of the cloud's variance (no latent
    /// 1-D structure).
    pub low_explained_variance: bool,
    pub iterations: usize,
}

/// Projection indices plus the permutation sorting profiles by `s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderedDataset {
    pub s: Vec<f64>,
    /// `permutation[rank] = row index`; ties broken by original row index.
    pub permutation: Vec<usize>,
}

/// Hard clusters from binning the curve parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterBins {
    pub boundaries: Vec<f64>,
    pub labels: Vec<usize>,
    pub empty_bins: Vec<usize>,
}

/// The paper's default cut points: C1 [0,0.2), C2 [0.2,0.4), C3 [0.4,0.6),
/// C4 [0.6,1.0].
pub const DEFAULT_BINS: [f64; 3] = [0.2, 0.4, 0.6];

impl PrincipalCurve {
    pub fn n_samples(&self) -> usize {
        self.points.len()
    }

    /// Curve position at `s` (linear interpolation on the dense samples).
    pub fn eval(&self, s: f64) -> [f64; 3] {
        let n = self.points.len();
        let s = s.clamp(0.0, 1.0);
        let x = s * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        let t = x - i as f64;
        let a = self.points[i];
        let b = self.points[i + 1];
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]
    }

    pub fn total_length(&self) -> f64 {
        *self.arc_length.last().unwrap()
    }

    /// Same geometry traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let total = self.total_length();
        let mut points = self.points.clone();
        points.reverse();
        let mut arc = vec![0.0; self.arc_length.len()];
        for (i, a) in self.arc_length.iter().rev().enumerate() {
            arc[i] = total - a;
        }
        Self { points, arc_length: arc, ..self.clone() }
    }
}

fn row3(points: &DMatrix<f64>, i: usize) -> [f64; 3] {
    [points[(i, 0)], points[(i, 1)], points[(i, 2)]]
}

/// Rotation-robust initial parameter: rank of each point's angle in the
/// best-fit plane of the cloud, centered by the circular mean.
fn initial_s(points: &DMatrix<f64>) -> Vec<f64> {
    let m = points.nrows();
    let mean = [
        points.column(0).mean(),
        points.column(1).mean(),
        points.column(2).mean(),
    ];
    let mut cov = Matrix3::zeros();
    for i in 0..m {
        let d = Vector3::new(
            points[(i, 0)] - mean[0],
            points[(i, 1)] - mean[1],
            points[(i, 2)] - mean[2],
        );
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let e1 = eig.eigenvectors.column(order[0]).clone_owned();
    let e2 = eig.eigenvectors.column(order[1]).clone_owned();

    let angles: Vec<f64> = (0..m)
        .map(|i| {
            let d = Vector3::new(
                points[(i, 0)] - mean[0],
                points[(i, 1)] - mean[1],
                points[(i, 2)] - mean[2],
            );
            d.dot(&e2).atan2(d.dot(&e1))
        })
        .collect();
    // Cut the circle at the largest angular gap so the data never straddles
    // the branch point, then rank from there.
    let mut sorted = angles.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut cut = sorted[0];
    let mut widest = 2.0 * std::f64::consts::PI - (sorted[m - 1] - sorted[0]);
    for w in sorted.windows(2) {
        if w[1] - w[0] > widest {
            widest = w[1] - w[0];
            cut = w[1];
        }
    }
    let centered: Vec<f64> = angles
        .iter()
        .map(|&a| {
            let d = a - cut;
            d.rem_euclid(2.0 * std::f64::consts::PI)
        })
        .collect();

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| centered[a].partial_cmp(&centered[b]).unwrap().then(a.cmp(&b)));
    let mut s = vec![0.0; m];
    for (rank, &i) in order.iter().enumerate() {
        s[i] = rank as f64 / (m - 1) as f64;
    }
    s
}

/// Resample a raw spline curve to a unit-speed polyline over s in [0,1].
fn reparametrize(raw: &[[f64; 3]], samples: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let n = raw.len();
    let mut cum = vec![0.0; n];
    for i in 1..n {
        let d = ((raw[i][0] - raw[i - 1][0]).powi(2)
            + (raw[i][1] - raw[i - 1][1]).powi(2)
            + (raw[i][2] - raw[i - 1][2]).powi(2))
        .sqrt();
        cum[i] = cum[i - 1] + d;
    }
    let total = cum[n - 1];
    let mut points = Vec::with_capacity(samples);
    let mut arc = Vec::with_capacity(samples);
    let mut j = 0usize;
    for k in 0..samples {
        let target = total * k as f64 / (samples - 1) as f64;
        while j + 2 < n && cum[j + 1] < target {
            j += 1;
        }
        let seg = (cum[j + 1] - cum[j]).max(1e-300);
        let t = ((target - cum[j]) / seg).clamp(0.0, 1.0);
        points.push([
            raw[j][0] + t * (raw[j + 1][0] - raw[j][0]),
            raw[j][1] + t * (raw[j + 1][1] - raw[j][1]),
            raw[j][2] + t * (raw[j + 1][2] - raw[j][2]),
        ]);
        arc.push(target);
    }
    (points, arc)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Project one point to the curve: grid search over the dense samples plus
/// golden-section refinement in each near-minimal cell. When two curve
/// locations are equally close, the larger `s` wins.
pub fn project_to_curve(curve: &PrincipalCurve, point: &[f64; 3]) -> (f64, f64) {
    let n = curve.points.len();
    let mut best = f64::INFINITY;
    let mut dists = Vec::with_capacity(n);
    for p in &curve.points {
        let d = dist2(p, point);
        dists.push(d);
        if d < best {
            best = d;
        }
    }
    // Refine every cell whose sample distance is within a whisker of the
    // global minimum; the sup-of-argmin rule then picks the largest s.
    let mut result_s = 0.0;
    let mut result_d = f64::INFINITY;
    let cell = 1.0 / (n - 1) as f64;
    let mut i = 0;
    while i < n {
        if dists[i] <= best + 1e-9 {
            let lo = (i.saturating_sub(1)) as f64 * cell;
            let hi = ((i + 1).min(n - 1)) as f64 * cell;
            let (s, d) = golden_section(curve, point, lo, hi);
            if d < result_d - 1e-12 || (d < result_d + 1e-12 && s > result_s) {
                result_d = d;
                result_s = s;
            }
            i += 2; // adjacent near-minimal samples share the refined cell
        } else {
            i += 1;
        }
    }
    (result_s, result_d.sqrt())
}

fn golden_section(curve: &PrincipalCurve, point: &[f64; 3], mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.6180339887498949;
    let f = |s: f64| dist2(&curve.eval(s), point);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if f1 > f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    // Prefer the upper end on a flat valley (sup rule).
    let s = if f2 <= f1 { x2 } else { x1 };
    (s, f(s))
}

fn project_all(curve: &PrincipalCurve, points: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let m = points.nrows();
    let results = map_indices(m, |i| {
        let p = row3(points, i);
        project_to_curve(curve, &p)
    });
    let mut s = Vec::with_capacity(m);
    let mut ss = 0.0;
    for (si, di) in results {
        s.push(si);
        ss += di * di;
    }
    (s, ss / m as f64)
}

/// Projection used inside the fitting loop: like [`project_to_curve`] but the
/// curve is extended by its end tangents, so points past an endpoint get
/// distinct (out-of-range) `s` values instead of piling up at 0 or 1. This
/// lets the smoothing step grow the curve into regions it has not reached yet.
fn project_extended(curve: &PrincipalCurve, point: &[f64; 3]) -> (f64, f64) {
    let (mut s, mut d) = project_to_curve(curve, point);
    let total = curve.total_length().max(1e-300);
    let n = curve.points.len();
    for (end, next, sign) in [(0usize, 1usize, -1.0f64), (n - 1, n - 2, 1.0)] {
        let e = curve.points[end];
        let inner = curve.points[next];
        let mut dir = [e[0] - inner[0], e[1] - inner[1], e[2] - inner[2]];
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        if norm <= 0.0 {
            continue;
        }
        for v in &mut dir {
            *v /= norm;
        }
        let rel = [point[0] - e[0], point[1] - e[1], point[2] - e[2]];
        let t = (rel[0] * dir[0] + rel[1] * dir[1] + rel[2] * dir[2]).max(0.0);
        let dd = ((rel[0] - t * dir[0]).powi(2)
            + (rel[1] - t * dir[1]).powi(2)
            + (rel[2] - t * dir[2]).powi(2))
        .sqrt();
        if dd < d {
            d = dd;
            s = if sign < 0.0 { -t / total } else { 1.0 + t / total };
        }
    }
    (s, d)
}

fn project_all_extended(curve: &PrincipalCurve, points: &DMatrix<f64>) -> (Vec<f64>, f64) {
    let m = points.nrows();
    let results = map_indices(m, |i| {
        let p = row3(points, i);
        project_extended(curve, &p)
    });
    let mut s = Vec::with_capacity(m);
    let mut ss = 0.0;
    for (si, di) in results {
        s.push(si);
        ss += di * di;
    }
    (s, ss / m as f64)
}

fn curve_from_spline_fit(
    s: &[f64],
    points: &DMatrix<f64>,
    knots: usize,
    samples: usize,
) -> Result<PrincipalCurve> {
    let coords: Vec<Vec<f64>> = (0..3)
        .map(|j| points.column(j).iter().copied().collect())
        .collect();
    let splines: Vec<SmoothingSpline> = coords
        .iter()
        .map(|y| SmoothingSpline::fit(s, y, knots))
        .collect::<Result<_>>()?;
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let dense = 4 * samples;
    let raw: Vec<[f64; 3]> = (0..dense)
        .map(|k| {
            let t = lo + (hi - lo) * k as f64 / (dense - 1) as f64;
            [splines[0].eval(t), splines[1].eval(t), splines[2].eval(t)]
        })
        .collect();
    let (pts, arc) = reparametrize(&raw, samples);
    Ok(PrincipalCurve {
        points: pts,
        arc_length: arc,
        fit_residual: f64::NAN,
        converged: false,
        low_explained_variance: false,
        iterations: 0,
    })
}

/// Fit a principal curve through an M x 3 point cloud.
pub fn fit_principal_curve(points: &DMatrix<f64>, config: &CurveConfig) -> Result<PrincipalCurve> {
    let m = points.nrows();
    if points.ncols() != 3 {
        return Err(Error::ShapeMismatch(format!("{} columns, expected 3", points.ncols())));
    }
    if m < 20 {
        return Err(Error::InsufficientData { need: 20, got: m });
    }
    let mut curve = fit_from_seed(points, config, initial_s(points))?;
    curve.low_explained_variance = !beats_null_model(points, config, curve.fit_residual);
    Ok(curve)
}

/// Null-model calibration for the low-explained-variance diagnostic: refit on
/// Gaussian clouds with the data's mean and covariance (which destroy any
/// latent 1-D ordering) and check that the real fit explains the data
/// substantially better than the fitter explains pure noise.
fn beats_null_model(points: &DMatrix<f64>, config: &CurveConfig, residual: f64) -> bool {
    use rand::prelude::*;
    let m = points.nrows();
    let mean = Vector3::new(
        points.column(0).mean(),
        points.column(1).mean(),
        points.column(2).mean(),
    );
    let mut cov = Matrix3::zeros();
    for i in 0..m {
        let d = Vector3::new(points[(i, 0)], points[(i, 1)], points[(i, 2)]) - mean;
        cov += d * d.transpose();
    }
    cov /= (m - 1).max(1) as f64;
    let chol = match nalgebra::Cholesky::new(cov) {
        Some(c) => c.l(),
        // Degenerate covariance: the cloud is (near) flat, a curve can
        // legitimately explain it.
        None => return true,
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6e75_6c6c);
    let mut null_residuals = Vec::new();
    for _ in 0..3 {
        let null = DMatrix::from_fn(m, 3, |_, _| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            z
        });
        let mut cloud = DMatrix::zeros(m, 3);
        for i in 0..m {
            let v = mean + chol * Vector3::new(null[(i, 0)], null[(i, 1)], null[(i, 2)]);
            for j in 0..3 {
                cloud[(i, j)] = v[j];
            }
        }
        if let Ok(fit) = fit_from_seed(&cloud, config, initial_s(&cloud)) {
            null_residuals.push(fit.fit_residual);
        }
    }
    if null_residuals.is_empty() {
        return true;
    }
    let null_mean = null_residuals.iter().sum::<f64>() / null_residuals.len() as f64;
    residual < 0.5 * null_mean
}

fn fit_from_seed(
    points: &DMatrix<f64>,
    config: &CurveConfig,
    seed: Vec<f64>,
) -> Result<PrincipalCurve> {
    let m = points.nrows();
    let knots = config.knots.unwrap_or_else(|| (m / 10).clamp(4, 25));

    let mut s = seed;
    let mut best: Option<PrincipalCurve> = None;
    let mut prev_residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..config.max_iter {
        iterations = iter + 1;
        let mut curve = curve_from_spline_fit(&s, points, knots, config.samples)?;
        let (new_s, residual) = project_all_extended(&curve, points);
        curve.fit_residual = residual;

        if residual > prev_residual + 1e-12 {
            break; // keep the best iterate
        }
        let improved = prev_residual.is_infinite()
            || (prev_residual - residual).abs() / prev_residual.max(1e-300) >= config.tol;
        best = Some(curve);
        s = new_s;
        if !improved {
            converged = true;
            break;
        }
        prev_residual = residual;
    }

    let mut curve = best.ok_or_else(|| Error::Numeric("principal curve produced no iterate".into()))?;
    curve.converged = converged;
    curve.iterations = iterations;
    // Report the residual against the curve proper, without the end-tangent
    // extension used during fitting.
    let (_, final_residual) = project_all(&curve, points);
    curve.fit_residual = final_residual;

    // Canonical orientation: s = 0 at the endpoint with the smaller centered
    // plane angle, so orderings are reproducible.
    let s_init = initial_s(points);
    let (s_now, _) = project_all(&curve, points);
    let corr = crate::stats::spearman(&s_init, &s_now).unwrap_or(0.0);
    if corr < 0.0 {
        curve = curve.reversed();
    }
    Ok(curve)
}

/// Projection index per point plus the sorting permutation.
pub fn order_dataset(curve: &PrincipalCurve, points: &DMatrix<f64>) -> OrderedDataset {
    let (s, _) = project_all(curve, points);
    let mut permutation: Vec<usize> = (0..s.len()).collect();
    permutation.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap().then(a.cmp(&b)));
    OrderedDataset { s, permutation }
}

/// Assign half-open bins over `s`; the final bin is closed at 1.0.
pub fn bin_clusters(ordered: &OrderedDataset, boundaries: &[f64]) -> Result<ClusterBins> {
    for w in boundaries.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter("bin boundaries must be strictly increasing".into()));
        }
    }
    if boundaries.iter().any(|&b| b <= 0.0 || b >= 1.0) {
        return Err(Error::InvalidParameter("bin boundaries must lie inside (0, 1)".into()));
    }
    let labels: Vec<usize> = ordered
        .s
        .iter()
        .map(|&si| boundaries.iter().filter(|&&b| b <= si).count())
        .collect();
    let n_bins = boundaries.len() + 1;
    let empty_bins: Vec<usize> =
        (0..n_bins).filter(|b| !labels.contains(b)).collect();
    Ok(ClusterBins { boundaries: boundaries.to_vec(), labels, empty_bins })
}

/// Ward-linkage agglomerative clustering cut at `k` clusters. Deterministic
/// given input order.
pub fn ward_clustering(points: &DMatrix<f64>, k: usize) -> Result<Vec<usize>> {
    let m = points.nrows();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("k = {k} not in 1..={m}")));
    }
    let mut condensed = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            condensed.push(dist2(&row3(points, i), &row3(points, j)).sqrt());
        }
    }
    let dendrogram = kodama::linkage(&mut condensed, m, kodama::Method::Ward);

    // Cut: apply the first m - k merges with a union-find over 2m - 1 nodes.
    let mut parent: Vec<usize> = (0..2 * m - 1).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (step, merge) in dendrogram.steps().iter().enumerate() {
        if step >= m - k {
            break;
        }
        let node = m + step;
        let a = find(&mut parent, merge.cluster1);
        let b = find(&mut parent, merge.cluster2);
        parent[a] = node;
        parent[b] = node;
    }
    let mut labels = vec![usize::MAX; m];
    let mut next = 0usize;
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        let label = match seen.iter().find(|(r, _)| *r == root) {
            Some(&(_, l)) => l,
            None => {
                seen.push((root, next));
                next += 1;
                next - 1
            }
        };
        labels[i] = label;
    }
    Ok(labels)
}
