use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reduced graph-embedding width.
pub const DEFAULT_EMBED_DIM: usize = 32;
/// Node capacity that latent matrices are padded to before flattening.
pub const DEFAULT_NODE_CAP: usize = 512;

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `d` orthonormal rows of length `D`.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

fn to_matrix(data: &Tensor) -> Result<DMatrix<f64>> {
    let (m, d) = data.dims2()?;
    Ok(DMatrix::from_row_slice(m, d, data.data()))
}

/// Orders eigenpairs by decreasing eigenvalue (ties by index).
fn sorted_eigen(eig: SymmetricEigen<f64, nalgebra::Dyn>) -> Vec<(f64, DVector<f64>)> {
    let mut pairs: Vec<(usize, f64)> = eig.eigenvalues.iter().copied().enumerate().collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    pairs
        .into_iter()
        .map(|(i, v)| (v.max(0.0), eig.eigenvectors.column(i).into_owned()))
        .collect()
}

/// Makes the largest-magnitude entry positive so signs are reproducible.
fn fix_sign(v: &mut DVector<f64>) {
    let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.neg_mut();
    }
}

/// Top-`d` principal axes of `data` `[M, D]`. Uses the `M x M` Gram matrix
/// when there are fewer samples than dimensions; directions beyond the data
/// rank are completed to an orthonormal set.
pub fn pca_fit(data: &Tensor, d: usize) -> Result<Pca> {
    let (m, dim) = data.dims2()?;
    if m < 2 {
        return Err(Error::Argument(format!("PCA needs at least 2 samples, got {m}")));
    }
    if d == 0 || d > m.min(dim) {
        return Err(Error::Argument(format!("PCA width {d} outside 1..={}", m.min(dim))));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite { op: "pca_fit" });
    }
    let x = to_matrix(data)?;
    let mean = x.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &mean;
    }
    let denom = (m - 1) as f64;
    let total_variance = xc.iter().map(|v| v * v).sum::<f64>() / denom;

    let mut axes: Vec<(f64, DVector<f64>)> = Vec::with_capacity(d);
    if m < dim {
        let gram = &xc * xc.transpose();
        let eig = sorted_eigen(SymmetricEigen::new(gram));
        let top = eig.first().map_or(0.0, |p| p.0);
        for (lambda, u) in eig.into_iter().take(d) {
            if lambda <= RANK_TOL * top.max(f64::MIN_POSITIVE) {
                break;
            }
            let v = xc.transpose() * u / lambda.sqrt();
            axes.push((lambda / denom, v));
        }
    } else {
        let cov = xc.transpose() * &xc;
        for (lambda, v) in sorted_eigen(SymmetricEigen::new(cov)).into_iter().take(d) {
            axes.push((lambda / denom, v));
        }
    }
    // Complete rank-deficient bases with Gram-Schmidt on the standard basis.
    let mut basis_index = 0;
    while axes.len() < d && basis_index < dim {
        let mut v = DVector::zeros(dim);
        v[basis_index] = 1.0;
        basis_index += 1;
        for (_, a) in &axes {
            let proj = a.dot(&v);
            v -= a * proj;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            axes.push((0.0, v / norm));
        }
    }
    let mut components = Vec::with_capacity(d);
    let mut explained_variance = Vec::with_capacity(d);
    for (var, mut v) in axes {
        v.normalize_mut();
        fix_sign(&mut v);
        components.push(v.iter().copied().collect());
        explained_variance.push(var);
    }
    Ok(Pca {
        mean: mean.iter().copied().collect(),
        components,
        explained_variance,
        total_variance,
    })
}

impl Pca {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.input_dim() {
            return Err(Error::Shape {
                op: "pca_project",
                lhs: vec![self.input_dim()],
                rhs: vec![row.len()],
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(row.iter().zip(&self.mean)).map(|(a, (x, m))| a * (x - m)).sum())
            .collect())
    }

    /// Projects every row of `[M, D]` to `[M, d]`.
    pub fn transform(&self, data: &Tensor) -> Result<Tensor> {
        let (m, _) = data.dims2()?;
        let mut out = Vec::with_capacity(m * self.output_dim());
        for r in 0..m {
            out.extend(self.project(data.row(r))?);
        }
        Tensor::matrix(m, self.output_dim(), out)
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &w) in self.components.iter().zip(coords) {
            for (o, a) in out.iter_mut().zip(c) {
                *o += w * a;
            }
        }
        out
    }
}

/// Row-major flattening of `[N, F]` after zero-padding to `n_cap` rows.
pub fn flatten_padded(mu: &Tensor, n_cap: usize) -> Result<Vec<f64>> {
    let (n, f) = mu.dims2()?;
    if n > n_cap {
        return Err(Error::Capacity { count: n, cap: n_cap });
    }
    let mut out = mu.data().to_vec();
    out.resize(n_cap * f, 0.0);
    Ok(out)
}

/// Graph-level embedding: padded, flattened posterior means projected by `pca`.
pub fn graph_embedding(mu: &Tensor, pca: &Pca, n_cap: usize) -> Result<Vec<f64>> {
    pca.project(&flatten_padded(mu, n_cap)?)
}
