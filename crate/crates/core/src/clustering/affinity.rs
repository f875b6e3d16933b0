use nalgebra::DMatrix;

use super::NormalizedModeMatrix;

/// Symmetric `p x p` Gaussian-kernel affinity between sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub weights: DMatrix<f64>,
    pub sigma: f64,
}

impl AffinityMatrix {
    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Pairwise symmetrized KL divergence between the sensor rows.
///
/// Uses `(KL(p, q) + KL(q, p)) / 2 = sum (p - q)(ln p - ln q) / 2`, so each
/// row is logged once. Rows of a [`NormalizedModeMatrix`] are strictly
/// positive whenever the smoothing constant is.
pub fn symmetric_divergence_matrix(m: &NormalizedModeMatrix) -> DMatrix<f64> {
    let rows = m.to_rows();
    let logs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v.ln()).collect()).collect();
    let p = rows.len();
    let mut d = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let sum: f64 = (0..rows[i].len())
                .map(|c| (rows[i][c] - rows[j][c]) * (logs[i][c] - logs[j][c]))
                .sum();
            let v = 0.5 * sum;
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// `W_ij = exp(-d_ij^2 / (2 sigma^2))` with `sigma` the median off-diagonal
/// divergence (1 when that median is zero).
pub fn build_affinity(m: &NormalizedModeMatrix) -> AffinityMatrix {
    affinity_from_divergences(&symmetric_divergence_matrix(m))
}

pub(crate) fn affinity_from_divergences(d: &DMatrix<f64>) -> AffinityMatrix {
    let p = d.nrows();
    let mut off: Vec<f64> = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in (i + 1)..p {
            off.push(d[(i, j)]);
        }
    }
    let median = median(&mut off);
    let sigma = if median > 0.0 && median.is_finite() { median } else { 1.0 };
    let denom = 2.0 * sigma * sigma;
    let weights = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            (-d[(i, j)] * d[(i, j)] / denom).exp().max(f64::MIN_POSITIVE)
        }
    });
    AffinityMatrix { weights, sigma }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
