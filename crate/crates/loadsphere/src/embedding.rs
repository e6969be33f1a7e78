//! PCA on the column-centered covariance of the normalized profiles, the
//! rank-one elementary-matrix expansion, CEV, and the Gram-matrix (PCoA)
//! pathway that produces the same low-dimensional coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::NormalizedMatrix;

/// Fitted PCA model: column means, descending eigenvalues, and orthonormal
/// eigenvectors (eigenprofiles) of the column-centered covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub column_means: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// Row-major D x D; column k is eigenprofile k.
    pub eigenvectors: Vec<f64>,
    pub retained: usize,
    /// Each eigenvector's largest-magnitude entry is made positive.
    pub sign_convention: String,
}

/// Projection of a dataset onto the leading eigenprofiles.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub coords: DMatrix<f64>,
    pub meter_ids: Vec<String>,
}

/// PCoA coordinates from the double-centered Gram matrix.
#[derive(Debug, Clone)]
pub struct GramEmbedding {
    pub coords: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.column_means.len()
    }

    pub fn eigenvector_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.eigenvectors)
    }

    pub fn means_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.column_means)
    }
}

fn sign_fix_columns(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Fit the PCA model to a normalized matrix. Centers columns internally and
/// stores the means; eigenvalues are clamped at 0 and sorted descending.
pub fn fit_pca(x: &NormalizedMatrix) -> Result<EmbeddingModel> {
    let values = x.values();
    let m = values.nrows();
    let d = values.ncols();
    if m < 3 {
        return Err(Error::InsufficientData { need: 3, got: m });
    }
    let means = values.row_mean();
    let mut centered = values.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let cov = centered.transpose() * &centered / (m as f64 - 1.0);
    let (mut eigenvalues, mut eigenvectors) = sorted_symmetric_eigen(cov);
    for v in &mut eigenvalues {
        if *v < 0.0 {
            if *v < -1e-9 {
                return Err(Error::Numeric(format!("covariance eigenvalue {v} below -1e-9")));
            }
            *v = 0.0;
        }
    }
    sign_fix_columns(&mut eigenvectors);
    let ortho = (&eigenvectors.transpose() * &eigenvectors - DMatrix::identity(d, d))
        .abs()
        .max();
    if ortho > 1e-8 {
        return Err(Error::Numeric(format!("eigenvector matrix not orthonormal ({ortho:.2e})")));
    }
    Ok(EmbeddingModel {
        column_means: means.iter().copied().collect(),
        eigenvalues,
        eigenvectors: eigenvectors.transpose().as_slice().to_vec(),
        retained: 3.min(d),
        sign_convention: "largest-abs-positive".into(),
    })
}

/// Project onto the first `n` eigenprofiles: `(X - means) V_n`.
pub fn project(model: &EmbeddingModel, x: &NormalizedMatrix, n: usize) -> Result<Embedding> {
    let d = model.dim();
    if n == 0 || n > d {
        return Err(Error::InvalidParameter(format!("n = {n} not in 1..={d}")));
    }
    if x.values().ncols() != d {
        return Err(Error::ShapeMismatch(format!(
            "data has {} columns, model expects {d}",
            x.values().ncols()
        )));
    }
    let v = model.eigenvector_matrix();
    let vn = v.columns(0, n).clone_owned();
    let means = DMatrix::from_fn(x.values().nrows(), d, |_, j| model.column_means[j]);
    let coords = (x.values() - means) * vn;
    Ok(Embedding { coords, meter_ids: x.meter_ids().to_vec() })
}

/// Invert the projection: `Z V_n^T + means`.
pub fn reconstruct(model: &EmbeddingModel, emb: &Embedding) -> Result<DMatrix<f64>> {
    let d = model.dim();
    let n = emb.coords.ncols();
    if n > d {
        return Err(Error::ShapeMismatch(format!("{n} embedding columns for model dim {d}")));
    }
    let v = model.eigenvector_matrix();
    let vn = v.columns(0, n).clone_owned();
    let mut out = &emb.coords * vn.transpose();
    for mut row in out.row_iter_mut() {
        for (j, x) in row.iter_mut().enumerate() {
            *x += model.column_means[j];
        }
    }
    Ok(out)
}

/// Rank-one elementary matrix `z_k v_k^T` (1-based `k`).
pub fn elementary_matrix(model: &EmbeddingModel, emb: &Embedding, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > emb.coords.ncols() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} not in 1..={}",
            emb.coords.ncols()
        )));
    }
    let v = model.eigenvector_matrix();
    let zk = emb.coords.column(k - 1);
    let vk = v.column(k - 1);
    Ok(zk * vk.transpose())
}

/// Cumulative explained variance ratio of the first `n` eigenvalues.
pub fn cev(model: &EmbeddingModel, n: usize) -> Result<f64> {
    let d = model.dim();
    if n == 0 || n > d {
        return Err(Error::InvalidParameter(format!("n = {n} not in 1..={d}")));
    }
    let total: f64 = model.eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numeric("all-zero eigenvalue spectrum".into()));
    }
    Ok(model.eigenvalues[..n].iter().sum::<f64>() / total)
}

/// Gram (similarity) matrix `X X^T` of the unit-norm rows; entries are
/// cosines of the angles between profiles.
pub fn gram_matrix(x: &NormalizedMatrix) -> DMatrix<f64> {
    x.values() * x.values().transpose()
}

/// Classical MDS: eigendecompose the double-centered Gram matrix and return
/// the top-`n` coordinates `W = xi_n Lambda_n^{1/2}`.
pub fn pcoa(x: &NormalizedMatrix, n: usize) -> Result<GramEmbedding> {
    let m = x.values().nrows();
    if m < 3 {
        return Err(Error::InsufficientData { need: 3, got: m });
    }
    if n == 0 || n > m {
        return Err(Error::InvalidParameter(format!("n = {n} not in 1..={m}")));
    }
    let s = gram_matrix(x);
    // Double centering: G = C_M S C_M.
    let row_means = s.column_mean();
    let grand = row_means.mean();
    let mut g = s;
    for i in 0..m {
        for j in 0..m {
            g[(i, j)] -= row_means[i] + row_means[j] - grand;
        }
    }
    let (eigenvalues, mut eigenvectors) = sorted_symmetric_eigen(g);
    if eigenvalues.iter().take(n).any(|&v| v < -1e-6) {
        return Err(Error::Numeric("leading PCoA eigenvalue below -1e-6".into()));
    }
    sign_fix_columns(&mut eigenvectors);
    let mut coords = DMatrix::zeros(m, n);
    for k in 0..n {
        let scale = eigenvalues[k].max(0.0).sqrt();
        for i in 0..m {
            coords[(i, k)] = eigenvectors[(i, k)] * scale;
        }
    }
    Ok(GramEmbedding { coords, eigenvalues: eigenvalues[..n].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{normalize, standardize, ProfileMatrix};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_normalized(m: usize, d: usize, seed: u64) -> NormalizedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(m, d, |_, _| rng.gen::<f64>());
        let ids = (0..m).map(|i| format!("m{i}")).collect();
        let p = ProfileMatrix::from_values(values, ids).unwrap();
        normalize(&standardize(&p).unwrap())
    }

    #[test]
    fn planar_data_has_rank_two_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // Rows in a 2-D plane inside D=5, then unit-normalized.
        let a = [0.5, -0.5, 0.3, -0.3, 0.0];
        let b = [0.1, 0.2, -0.4, 0.3, -0.2];
        let mut values = DMatrix::zeros(40, 5);
        for i in 0..40 {
            let (s, t): (f64, f64) = (rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let row: Vec<f64> = (0..5).map(|j| s * a[j] + t * b[j]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..5 {
                values[(i, j)] = row[j] / norm;
            }
        }
        let x = NormalizedMatrix::from_unit_rows(values, (0..40).map(|i| i.to_string()).collect())
            .unwrap();
        let model = fit_pca(&x).unwrap();
        // Centering can add at most one dimension on top of the 2-D plane.
        assert!(model.eigenvalues[3] < 1e-9);
        assert!(model.eigenvalues[4] < 1e-9);
    }

    #[test]
    fn isotropic_sample_has_flat_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values = DMatrix::from_fn(10_000, 4, |_, _| {
            let v: f64 = rng.sample(rand_distr::StandardNormal);
            v
        });
        let mut unit = values.clone();
        for mut row in unit.row_iter_mut() {
            let n = row.norm();
            row /= n;
        }
        let x =
            NormalizedMatrix::from_unit_rows(unit, (0..10_000).map(|i| i.to_string()).collect())
                .unwrap();
        let model = fit_pca(&x).unwrap();
        let max = model.eigenvalues[0];
        let min = model.eigenvalues[3];
        assert!((max - min) / max < 0.10, "spectrum spread {max} vs {min}");
    }

    #[test]
    fn covariance_reconstruction_identity() {
        let x = random_normalized(50, 8, 3);
        let model = fit_pca(&x).unwrap();
        let v = model.eigenvector_matrix();
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&model.eigenvalues));
        let rebuilt = &v * lambda * v.transpose();
        let means = model.means_vector().transpose();
        let mut centered = x.values().clone();
        for mut row in centered.row_iter_mut() {
            row -= &means;
        }
        let cov = centered.transpose() * &centered / 49.0;
        assert!((rebuilt - cov).abs().max() < 1e-8);
    }

    #[test]
    fn full_projection_round_trip() {
        let x = random_normalized(30, 10, 5);
        let model = fit_pca(&x).unwrap();
        let emb = project(&model, &x, 10).unwrap();
        let back = reconstruct(&model, &emb).unwrap();
        assert!((back - x.values()).abs().max() < 1e-9);
    }

    #[test]
    fn row_at_column_means_projects_to_zero() {
        let x = random_normalized(30, 6, 9);
        let model = fit_pca(&x).unwrap();
        let mut values = DMatrix::zeros(1, 6);
        for j in 0..6 {
            values[(0, j)] = model.column_means[j];
        }
        let v = model.eigenvector_matrix();
        let means = DMatrix::from_fn(1, 6, |_, j| model.column_means[j]);
        let coords = (values - means) * v.columns(0, 3).clone_owned();
        assert!(coords.abs().max() < 1e-12);
    }

    #[test]
    fn elementary_matrices_sum_to_data() {
        let x = random_normalized(25, 8, 13);
        let model = fit_pca(&x).unwrap();
        let emb = project(&model, &x, 8).unwrap();
        let mut sum = DMatrix::zeros(25, 8);
        for k in 1..=8 {
            sum += elementary_matrix(&model, &emb, k).unwrap();
        }
        for mut row in sum.row_iter_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v += model.column_means[j];
            }
        }
        assert!((sum - x.values()).abs().max() < 1e-9);
    }

    #[test]
    fn elementary_matrix_energy_matches_eigenvalue() {
        let x = random_normalized(40, 6, 17);
        let model = fit_pca(&x).unwrap();
        let emb = project(&model, &x, 6).unwrap();
        for k in 1..=6 {
            let xk = elementary_matrix(&model, &emb, k).unwrap();
            // Brute-force Frobenius norm squared.
            let frob2: f64 = xk.iter().map(|v| v * v).sum();
            let expected = 39.0 * model.eigenvalues[k - 1];
            assert_abs_diff_eq!(frob2, expected, epsilon = 1e-6);
        }
    }

    #[test]
    fn cev_direct_ratio() {
        let model = EmbeddingModel {
            column_means: vec![0.0; 4],
            eigenvalues: vec![4.0, 3.0, 2.0, 1.0],
            eigenvectors: DMatrix::<f64>::identity(4, 4).transpose().as_slice().to_vec(),
            retained: 3,
            sign_convention: "largest-abs-positive".into(),
        };
        assert_abs_diff_eq!(cev(&model, 2).unwrap(), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(cev(&model, 4).unwrap(), 1.0, epsilon = 1e-15);
        let mut prev = 0.0;
        for n in 1..=4 {
            let c = cev(&model, n).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn gram_entries_are_cosines() {
        let x = random_normalized(20, 6, 21);
        let s = gram_matrix(&x);
        for i in 0..20 {
            assert_abs_diff_eq!(s[(i, i)], 1.0, epsilon = 1e-9);
            for j in 0..20 {
                assert!(s[(i, j)] <= 1.0 + 1e-12 && s[(i, j)] >= -1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn pcoa_matches_pca_up_to_sign() {
        for seed in 0..3 {
            let x = random_normalized(40, 12, 100 + seed);
            let model = fit_pca(&x).unwrap();
            let z = project(&model, &x, 3).unwrap().coords;
            let w = pcoa(&x, 3).unwrap().coords;
            for k in 0..3 {
                let direct = (z.column(k) - w.column(k)).abs().max();
                let flipped = (z.column(k) + w.column(k)).abs().max();
                assert!(direct.min(flipped) < 1e-6, "column {k}: {direct} / {flipped}");
            }
        }
    }

    #[test]
    fn training_projection_has_zero_column_means() {
        let x = random_normalized(60, 10, 31);
        let model = fit_pca(&x).unwrap();
        let emb = project(&model, &x, 3).unwrap();
        for k in 0..3 {
            assert!(emb.coords.column(k).mean().abs() < 1e-9);
        }
    }

    #[test]
    fn embedding_columns_are_uncorrelated() {
        let x = random_normalized(60, 10, 37);
        let model = fit_pca(&x).unwrap();
        let emb = project(&model, &x, 3).unwrap();
        for a in 0..3 {
            for b in (a + 1)..3 {
                let ca = emb.coords.column(a);
                let cb = emb.coords.column(b);
                let cov = ca.dot(&cb) / 59.0;
                assert!(cov.abs() < 1e-6);
            }
        }
    }
}
