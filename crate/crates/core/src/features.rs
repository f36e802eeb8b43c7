//! PCA over flattened images, global min-max score scaling, and the mapping of
//! principal components onto sub-generator qubits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{shape_err, QiglError, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Per-pixel mean of the training rows.
    pub mean: Vec<f64>,
    /// k x d, orthonormal rows.
    pub axes: Matrix,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Global minimum over the training score matrix.
    pub pca_min: f64,
    /// Global maximum over the training score matrix.
    pub pca_max: f64,
}

impl PcaModel {
    /// Fits the top `k` principal axes of `data` (n x d).
    pub fn fit(data: &Matrix, k: usize) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        if n < 2 {
            return Err(QiglError::SampleSize(n));
        }
        if k == 0 || k > (n - 1).min(d) {
            return Err(QiglError::Rank(format!(
                "cannot extract {k} components from {n} samples of dimension {d} (max {})",
                (n - 1).min(d)
            )));
        }
        linalg::check_finite(data.as_slice(), "PCA input")?;

        let mut mean = vec![0.0; d];
        for row in data.row_iter() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let mut centered = data.clone();
        for i in 0..n {
            for (x, m) in centered.row_mut(i).iter_mut().zip(&mean) {
                *x -= m;
            }
        }
        let total: f64 = centered.as_slice().iter().map(|x| x * x).sum();
        if total == 0.0 {
            return Err(QiglError::DegenerateData("all rows are identical".into()));
        }

        let svd = linalg::right_svd(&centered);
        let top = svd.singular_values[0];
        if svd.singular_values[k - 1] <= 1e-12 * top {
            return Err(QiglError::Rank(format!(
                "data has fewer than {k} non-degenerate directions"
            )));
        }
        let singular_values = svd.singular_values[..k].to_vec();
        let explained_variance_ratio = singular_values.iter().map(|s| s * s / total).collect();
        let axes = svd.vt.select_rows(&(0..k).collect::<Vec<_>>());

        let mut model = Self {
            mean,
            axes,
            singular_values,
            explained_variance_ratio,
            pca_min: 0.0,
            pca_max: 0.0,
        };
        let scores = centered.matmul_transposed(&model.axes)?;
        let (lo, hi) = scores
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        model.pca_min = lo;
        model.pca_max = hi;
        Ok(model)
    }

    #[inline]
    pub fn n_components(&self) -> usize {
        self.axes.rows()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Projects rows of `data` onto the principal axes.
    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.dim() {
            return Err(shape_err(format!("data has {} columns, model expects {}", data.cols(), self.dim())));
        }
        let mut centered = data.clone();
        for i in 0..data.rows() {
            for (x, m) in centered.row_mut(i).iter_mut().zip(&self.mean) {
                *x -= m;
            }
        }
        centered.matmul_transposed(&self.axes)
    }

    /// `scores * axes + mean`, unclamped.
    pub fn inverse_transform(&self, scores: &Matrix) -> Result<Matrix> {
        if scores.cols() != self.n_components() {
            return Err(shape_err(format!(
                "scores have {} columns, model has {} components",
                scores.cols(),
                self.n_components()
            )));
        }
        let mut out = scores.matmul(&self.axes)?;
        for i in 0..out.rows() {
            for (x, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *x += m;
            }
        }
        Ok(out)
    }

    fn check_scale(&self) -> Result<f64> {
        let span = self.pca_max - self.pca_min;
        if span > 0.0 && span.is_finite() {
            Ok(span)
        } else {
            Err(QiglError::DegenerateScale { min: self.pca_min, max: self.pca_max })
        }
    }

    /// `(s - pca_min) / (pca_max - pca_min)`, element-wise.
    pub fn scale_scores(&self, scores: &Matrix) -> Result<Matrix> {
        let span = self.check_scale()?;
        let mut out = scores.clone();
        out.as_mut_slice().iter_mut().for_each(|s| *s = (*s - self.pca_min) / span);
        Ok(out)
    }

    /// Affine inverse of [`scale_scores`](Self::scale_scores); values outside
    /// `[0, 1]` extrapolate linearly.
    pub fn unscale_scores(&self, scaled: &Matrix) -> Result<Matrix> {
        let span = self.check_scale()?;
        let mut out = scaled.clone();
        out.as_mut_slice().iter_mut().for_each(|s| *s = *s * span + self.pca_min);
        Ok(out)
    }

    pub fn cumulative_explained_variance(&self) -> Vec<f64> {
        self.explained_variance_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }

    /// Smallest component count whose cumulative explained variance reaches
    /// `threshold`, if the fitted components get there at all.
    pub fn components_for_variance(&self, threshold: f64) -> Option<usize> {
        self.cumulative_explained_variance()
            .iter()
            .position(|&c| c >= threshold)
            .map(|i| i + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignmentMode {
    Conventional,
    Balanced,
}

impl AssignmentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignmentMode::Conventional => "conventional",
            AssignmentMode::Balanced => "balanced",
        }
    }
}

impl core::str::FromStr for AssignmentMode {
    type Err = QiglError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conventional" => Ok(Self::Conventional),
            "balanced" => Ok(Self::Balanced),
            other => Err(QiglError::Argument(format!("unknown assignment mode {other:?}"))),
        }
    }
}

/// Which PCA component each sub-generator qubit produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureAssignment {
    mode: AssignmentMode,
    n_qubits: usize,
    subsets: Vec<Vec<usize>>,
}

impl FeatureAssignment {
    pub fn new(mode: AssignmentMode, n_features: usize, n_subgens: usize, n_qubits: usize) -> Result<Self> {
        match mode {
            AssignmentMode::Conventional => conventional_assignment(n_features, n_subgens, n_qubits),
            AssignmentMode::Balanced => balanced_assignment(n_features, n_subgens, n_qubits),
        }
    }

    /// Validates an explicit assignment.
    pub fn from_subsets(mode: AssignmentMode, subsets: Vec<Vec<usize>>) -> Result<Self> {
        let n_qubits = subsets.first().map_or(0, Vec::len);
        if n_qubits == 0 {
            return Err(shape_err("assignment needs at least one non-empty subset"));
        }
        let total = n_qubits * subsets.len();
        let mut seen = vec![false; total];
        for (g, subset) in subsets.iter().enumerate() {
            if subset.len() != n_qubits {
                return Err(shape_err(format!("subset {g} has {} entries, expected {n_qubits}", subset.len())));
            }
            for &f in subset {
                if f >= total || core::mem::replace(&mut seen[f], true) {
                    return Err(QiglError::Argument(format!(
                        "feature {f} is out of range or assigned twice"
                    )));
                }
            }
        }
        Ok(Self { mode, n_qubits, subsets })
    }

    #[inline]
    pub fn mode(&self) -> AssignmentMode {
        self.mode
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    #[inline]
    pub fn n_subgens(&self) -> usize {
        self.subsets.len()
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_qubits * self.subsets.len()
    }

    /// PCA index produced by position `i` of the raw concatenated generator
    /// output (sub-generator `i / n_qubits`, qubit `i % n_qubits`).
    pub fn raw_to_pca(&self) -> Vec<usize> {
        self.subsets.iter().flatten().copied().collect()
    }

    /// Moves raw concatenated outputs into PCA component order.
    pub fn to_pca_order(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.n_features() {
            return Err(shape_err(format!("{} raw values for {} features", raw.len(), self.n_features())));
        }
        let mut out = vec![0.0; raw.len()];
        for (&f, &v) in self.subsets.iter().flatten().zip(raw) {
            out[f] = v;
        }
        Ok(out)
    }

    /// Inverse of [`to_pca_order`](Self::to_pca_order).
    pub fn to_raw_order(&self, pca: &[f64]) -> Result<Vec<f64>> {
        if pca.len() != self.n_features() {
            return Err(shape_err(format!("{} values for {} features", pca.len(), self.n_features())));
        }
        Ok(self.subsets.iter().flatten().map(|&f| pca[f]).collect())
    }
}

fn check_sizes(n_features: usize, n_subgens: usize, n_qubits: usize) -> Result<()> {
    if n_subgens == 0 || n_qubits == 0 || n_features != n_subgens * n_qubits {
        return Err(shape_err(format!(
            "{n_features} features cannot be split across {n_subgens} sub-generators of {n_qubits} qubits"
        )));
    }
    Ok(())
}

/// Sub-generator `i` gets components `[i*n_qubits, (i+1)*n_qubits)`.
pub fn conventional_assignment(n_features: usize, n_subgens: usize, n_qubits: usize) -> Result<FeatureAssignment> {
    check_sizes(n_features, n_subgens, n_qubits)?;
    let subsets = (0..n_subgens)
        .map(|i| (i * n_qubits..(i + 1) * n_qubits).collect())
        .collect();
    FeatureAssignment::from_subsets(AssignmentMode::Conventional, subsets)
}

/// Sub-generator `i` first takes component `i`; the remaining components are
/// then dealt from the tail in blocks of `n_qubits - 1`, so for 8 x 5 the
/// subsets are `[i, 39-4i, 38-4i, 37-4i, 36-4i]`.
pub fn balanced_assignment(n_features: usize, n_subgens: usize, n_qubits: usize) -> Result<FeatureAssignment> {
    check_sizes(n_features, n_subgens, n_qubits)?;
    let block = n_qubits - 1;
    let subsets = (0..n_subgens)
        .map(|i| {
            let top = n_features - 1 - block * i;
            core::iter::once(i).chain((0..block).map(|j| top - j)).collect()
        })
        .collect();
    FeatureAssignment::from_subsets(AssignmentMode::Balanced, subsets)
}
