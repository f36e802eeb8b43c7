//! Fréchet distance between Gaussian fits of two sample populations.
//!
//! Distances are computed in the model's own feature space (scaled PCA
//! scores, or reconstructed pixels), not in the embedding space of a
//! pretrained image network, so absolute values are not comparable to
//! Inception-based FID scores.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;

use crate::error::{shape_err, QiglError, Result};
use crate::features::PcaModel;
use crate::linalg::{self, Matrix};
use crate::qgenerator::GeneratorEnsemble;
use crate::Rng;

pub const DISCLAIMER: &str = "Frechet distance over the model's own feature space; \
not comparable to Inception-v3 FID values";

/// Added to both covariance diagonals before any square root.
pub const COVARIANCE_RIDGE: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOLERANCE * max(1, largest)` are rejected.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub sample_count: usize,
}

impl GaussianFit {
    /// Sample mean and unbiased (n - 1) covariance of the rows of `samples`.
    pub fn fit(samples: &Matrix) -> Result<Self> {
        let (n, k) = (samples.rows(), samples.cols());
        if n < 2 {
            return Err(QiglError::SampleSize(n));
        }
        // Shifting by the first row keeps identical samples exactly zero-variance.
        let shift = samples.row(0).to_vec();
        let mut offset = alloc::vec![0.0; k];
        for row in samples.row_iter() {
            for ((o, x), s) in offset.iter_mut().zip(row).zip(&shift) {
                *o += x - s;
            }
        }
        offset.iter_mut().for_each(|o| *o /= n as f64);
        let mut cov = Matrix::zeros(k, k);
        for row in samples.row_iter() {
            let d: Vec<f64> = row.iter().zip(&shift).zip(&offset).map(|((x, s), o)| (x - s) - o).collect();
            for i in 0..k {
                for j in i..k {
                    cov[(i, j)] += d[i] * d[j];
                }
            }
        }
        let mean: Vec<f64> = shift.iter().zip(&offset).map(|(s, o)| s + o).collect();
        for i in 0..k {
            for j in i..k {
                let v = cov[(i, j)] / (n - 1) as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(Self { mean, covariance: cov, sample_count: n })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Free-function form of [`GaussianFit::fit`].
pub fn fit_gaussian(samples: &Matrix) -> Result<GaussianFit> {
    GaussianFit::fit(samples)
}

/// Principal square root of a symmetric positive-semidefinite matrix, with
/// slightly negative eigenvalues clamped to zero.
pub fn matrix_sqrt_psd(a: &Matrix) -> Result<Matrix> {
    let eig = psd_eigen(a)?;
    Ok(eig.map_values(|l| libm::sqrt(l.max(0.0))))
}

fn psd_eigen(a: &Matrix) -> Result<linalg::SymmetricEigen> {
    if a.rows() != a.cols() {
        return Err(shape_err(format!("square root of a {}x{} matrix", a.rows(), a.cols())));
    }
    linalg::check_finite(a.as_slice(), "matrix")?;
    let scale = a.as_slice().iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if a.max_asymmetry() > PSD_TOLERANCE * scale {
        return Err(QiglError::NumericalDomain("matrix is not symmetric".into()));
    }
    let eig = linalg::symmetric_eigen(a)?;
    let largest = eig.values.first().copied().unwrap_or(0.0).max(1.0);
    if let Some(&low) = eig.values.last() {
        if low < -PSD_TOLERANCE * largest {
            return Err(QiglError::NumericalDomain(format!("matrix has eigenvalue {low:e}")));
        }
    }
    Ok(eig)
}

/// `|mu_r - mu_g|^2 + tr(S_r + S_g - 2 (S_r S_g)^(1/2))`.
///
/// The cross term is evaluated as `tr sqrt(sqrt(S_r) S_g sqrt(S_r))`, which
/// has the same eigenvalues as `S_r S_g` but stays symmetric.
pub fn frechet_distance(real: &GaussianFit, fake: &GaussianFit) -> Result<f64> {
    if real.dim() != fake.dim() {
        return Err(shape_err(format!("Gaussian fits of dimension {} and {}", real.dim(), fake.dim())));
    }
    let k = real.dim();
    let mean_term: f64 = real.mean.iter().zip(&fake.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let ridge = |c: &Matrix| {
        let mut c = c.clone();
        for i in 0..k {
            c[(i, i)] += COVARIANCE_RIDGE;
        }
        c
    };
    let (sr, sg) = (ridge(&real.covariance), ridge(&fake.covariance));
    let root_r = matrix_sqrt_psd(&sr)?;
    let mut inner = root_r.matmul(&sg)?.matmul(&root_r)?;
    inner.symmetrize();
    let cross: f64 = psd_eigen(&inner)?.values.iter().map(|&l| libm::sqrt(l.max(0.0))).sum();
    let d = mean_term + sr.trace() + sg.trace() - 2.0 * cross;
    if d < -1e-8 * (1.0 + sr.trace() + sg.trace()) {
        return Err(QiglError::NumericalDomain(format!("negative Frechet distance {d:e}")));
    }
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSpace {
    /// Scaled `[0, 1]` PCA scores.
    ScaledPca,
    /// Reconstructed pixels in `[0, 1]`.
    Pixel,
}

impl FeatureSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSpace::ScaledPca => "scaled_pca",
            FeatureSpace::Pixel => "pixel",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub frechet: f64,
    pub n_samples: usize,
    pub space: FeatureSpace,
    pub seed: u64,
    pub checkpoint_epoch: u64,
    pub note: String,
}

/// Generator expectations `m` in `[-1, 1]` mapped to `(m + 1) / 2`, the
/// range of scaled real scores.
pub fn expectations_to_scaled(m: &mut Matrix) {
    m.as_mut_slice().iter_mut().for_each(|x| *x = 0.5 * (*x + 1.0));
}

/// Draws `n_samples` generator outputs in scaled PCA space.
pub fn generate_scaled(ensemble: &GeneratorEnsemble, n_samples: usize, rng: &mut Rng) -> Result<Matrix> {
    let noise = ensemble.sample_noise(n_samples, rng);
    let mut out = ensemble.forward_batch(&noise)?;
    expectations_to_scaled(&mut out);
    Ok(out)
}

/// Scaled generator samples mapped back to clamped `[0, 1]` pixels.
pub fn scaled_to_pixels(pca: &PcaModel, scaled: &Matrix) -> Result<Matrix> {
    let scores = pca.unscale_scores(scaled)?;
    let mut pixels = pca.inverse_transform(&scores)?;
    pixels.as_mut_slice().iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    Ok(pixels)
}

/// Fréchet distance between `real_scaled` (scaled PCA scores of real images)
/// and `n_samples` generated vectors drawn with `seed`.
pub fn evaluate_model(
    ensemble: &GeneratorEnsemble,
    pca: &PcaModel,
    real_scaled: &Matrix,
    n_samples: usize,
    space: FeatureSpace,
    seed: u64,
    checkpoint_epoch: u64,
) -> Result<MetricsReport> {
    if n_samples < 2 {
        return Err(QiglError::SampleSize(n_samples));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let fake = generate_scaled(ensemble, n_samples, &mut rng)?;
    let frechet = match space {
        FeatureSpace::ScaledPca => frechet_between(real_scaled, &fake)?,
        FeatureSpace::Pixel => {
            let real_px = scaled_to_pixels(pca, real_scaled)?;
            let fake_px = scaled_to_pixels(pca, &fake)?;
            frechet_between(&real_px, &fake_px)?
        }
    };
    Ok(MetricsReport { frechet, n_samples, space, seed, checkpoint_epoch, note: DISCLAIMER.into() })
}

pub fn frechet_between(a: &Matrix, b: &Matrix) -> Result<f64> {
    frechet_distance(&GaussianFit::fit(a)?, &GaussianFit::fit(b)?)
}

/// Fréchet distance between the first and second half of `samples`.
pub fn split_half_baseline(samples: &Matrix) -> Result<f64> {
    let n = samples.rows();
    let half = n / 2;
    let first: Vec<usize> = (0..half).collect();
    let second: Vec<usize> = (half..n).collect();
    frechet_between(&samples.select_rows(&first), &samples.select_rows(&second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_point_fit() {
        let s = Matrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let g = fit_gaussian(&s).unwrap();
        assert_eq!(g.mean, vec![1.0, 0.0]);
        assert_eq!(g.covariance.as_slice(), &[2.0, 0.0, 0.0, 0.0]);
        let same = Matrix::from_rows(&[[0.4, 1.0], [0.4, 1.0], [0.4, 1.0]]).unwrap();
        assert!(fit_gaussian(&same).unwrap().covariance.as_slice().iter().all(|&x| x == 0.0));
        assert_eq!(fit_gaussian(&Matrix::zeros(1, 2)), Err(QiglError::SampleSize(1)));
    }

    #[test]
    fn sqrt_examples() {
        let id = Matrix::identity(3);
        let r = matrix_sqrt_psd(&id).unwrap();
        for (a, b) in r.as_slice().iter().zip(id.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        let r = matrix_sqrt_psd(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14 && (r[(1, 1)] - 3.0).abs() < 1e-14);
        assert!(r[(0, 1)].abs() < 1e-14);
        let neg = Matrix::from_diag(&[1.0, -0.5]);
        assert!(matches!(matrix_sqrt_psd(&neg), Err(QiglError::NumericalDomain(_))));
    }

    fn fit1(mu: f64, var: f64) -> GaussianFit {
        GaussianFit { mean: vec![mu], covariance: Matrix::from_diag(&[var]), sample_count: 10 }
    }

    #[test]
    fn one_dimensional_closed_form() {
        assert!((frechet_distance(&fit1(0.0, 1.0), &fit1(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-9);
        assert!((frechet_distance(&fit1(0.0, 4.0), &fit1(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-9);
        let a = fit1(0.3, 2.0);
        assert!(frechet_distance(&a, &a).unwrap() <= 1e-10);
    }

    #[test]
    fn dimension_mismatch() {
        let b = GaussianFit { mean: vec![0.0; 2], covariance: Matrix::identity(2), sample_count: 3 };
        assert!(matches!(frechet_distance(&fit1(0.0, 1.0), &b), Err(QiglError::Shape(_))));
    }
}
