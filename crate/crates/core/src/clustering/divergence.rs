use super::ClusterError;

/// `sum_m P(m) ln(P(m) / Q(m))`, natural log. Both inputs must be strictly
/// positive; smoothing upstream guarantees it.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, ClusterError> {
    if p.len() != q.len() {
        return Err(ClusterError::LengthMismatch(p.len(), q.len()));
    }
    for (index, (&a, &b)) in p.iter().zip(q).enumerate() {
        if !(a > 0.0 && b > 0.0) {
            return Err(ClusterError::NonPositiveEntry { index });
        }
    }
    Ok(kl_unchecked(p, q))
}

/// Arithmetic mean of the two directed divergences.
pub fn symmetric_kl(p: &[f64], q: &[f64]) -> Result<f64, ClusterError> {
    Ok(0.5 * (kl_divergence(p, q)? + kl_divergence(q, p)?))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let sum: f64 = p.iter().zip(q).map(|(&a, &b)| a * (a / b).ln()).sum();
    // Rounding can push the sum of two nearly identical pmfs a hair below 0.
    sum.max(0.0)
}
