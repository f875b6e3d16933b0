use nalgebra::{DMatrix, SymmetricEigen};

use super::kmeans::{canonicalize, kmeans_raw, KMeansOptions};
use super::{AffinityMatrix, ClusterError};

/// Cluster labels for `p` sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Canonical labels: cluster 0 holds sensor 0, and clusters are numbered
    /// by ascending smallest member index.
    pub labels: Vec<usize>,
    /// Centroids in the row-normalized spectral embedding.
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares in the embedding.
    pub inertia: f64,
    /// How many times an empty cluster was re-seeded.
    pub repaired_empty: usize,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Rows of the top-`k` eigenvectors of `D^-1/2 W D^-1/2`, each scaled to unit
/// length.
pub fn spectral_embedding(w: &AffinityMatrix, k: usize) -> Result<Vec<Vec<f64>>, ClusterError> {
    let p = w.dim();
    if k < 1 || k > p {
        return Err(ClusterError::InvalidClusterCount { k, p });
    }
    let inv_sqrt_deg: Vec<f64> = w
        .weights
        .row_iter()
        .map(|r| {
            let d: f64 = r.iter().sum();
            1.0 / d.sqrt()
        })
        .collect();
    let l_sym = DMatrix::from_fn(p, p, |i, j| inv_sqrt_deg[i] * w.weights[(i, j)] * inv_sqrt_deg[j]);
    // Exact symmetry keeps the eigensolver deterministic with respect to
    // rounding in the product above.
    let l_sym = (&l_sym + l_sym.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(l_sym, f64::EPSILON, 10_000).ok_or(ClusterError::EmbeddingFailure)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut rows = vec![vec![0.0; k]; p];
    for (c, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        // Fix the sign so the embedding does not depend on solver conventions.
        let pivot = v.iter().copied().fold(0.0_f64, |a, x| if x.abs() > a.abs() { x } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            rows[i][c] = sign * v[i];
        }
    }
    for row in rows.iter_mut() {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ClusterError::EmbeddingFailure);
    }
    Ok(rows)
}

/// Normalized spectral clustering of an affinity into `k` groups.
pub fn spectral_cluster(w: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusterAssignment, ClusterError> {
    let p = w.dim();
    if k < 2 || k > p {
        return Err(ClusterError::InvalidClusterCount { k, p });
    }
    let embedding = spectral_embedding(w, k)?;
    let r = kmeans_raw(&embedding, k, seed, &KMeansOptions::default());
    let (labels, centroids) = canonicalize(&r.labels, r.centroids);
    Ok(ClusterAssignment {
        labels,
        centroids,
        inertia: r.inertia,
        repaired_empty: r.repaired_empty,
    })
}
