//! Lloyd's k-means with k-means++ seeding on small dense point sets.

use rand::Rng;

use crate::rng::{stream_rng, streams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub repaired_empty: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn update_centroids(points: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// Re-home empty clusters on the point farthest from its own centroid,
/// taken from clusters that can spare a member. Returns the number of repairs.
fn repair_empty(points: &[Vec<f64>], labels: &mut [usize], centroids: &mut [Vec<f64>]) -> usize {
    let k = centroids.len();
    let mut repairs = 0;
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return repairs;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, p) in points.iter().enumerate() {
            let l = labels[i];
            if counts[l] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[l]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let Some(i) = far else {
            return repairs;
        };
        labels[i] = empty;
        centroids[empty] = points[i].clone();
        repairs += 1;
    }
}

/// Seeded k-means. Requires `1 <= k <= points.len()` and equal point lengths.
pub(crate) fn kmeans_raw(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> KMeansResult {
    let mut rng = stream_rng(seed, streams::KMEANS);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![0usize; points.len()];
    let mut repaired_empty = 0;
    for _ in 0..opts.max_iter.max(1) {
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest(p, &centroids).0;
        }
        repaired_empty += repair_empty(points, &mut labels, &mut centroids);
        let next = update_centroids(points, &labels, k);
        let moved = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0_f64, f64::max);
        centroids = next;
        if moved < opts.tolerance {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l]))
        .sum();
    KMeansResult {
        labels,
        centroids,
        inertia,
        repaired_empty,
    }
}

/// Public entry point: k-means on arbitrary points with canonical labels
/// (clusters numbered by their smallest member index).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> (Vec<usize>, Vec<Vec<f64>>, f64) {
    let r = kmeans_raw(points, k, seed, opts);
    let (labels, centroids) = canonicalize(&r.labels, r.centroids);
    (labels, centroids, r.inertia)
}

pub(crate) fn canonicalize(labels: &[usize], centroids: Vec<Vec<f64>>) -> (Vec<usize>, Vec<Vec<f64>>) {
    let k = centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    // Unused clusters (only possible when repair was impossible) go last.
    for m in map.iter_mut() {
        if *m == usize::MAX {
            *m = next;
            next += 1;
        }
    }
    let mut ordered = vec![Vec::new(); k];
    for (old, c) in centroids.into_iter().enumerate() {
        ordered[map[old]] = c;
    }
    (labels.iter().map(|&l| map[l]).collect(), ordered)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_blobs() {
        let mut pts = Vec::new();
        for i in 0..5 {
            pts.push(vec![0.0 + 0.01 * i as f64, 0.0]);
        }
        for i in 0..4 {
            pts.push(vec![10.0, 10.0 + 0.01 * i as f64]);
        }
        for seed in 0..20 {
            let (labels, centroids, _) = kmeans(&pts, 2, seed, &KMeansOptions::default());
            assert_eq!(labels, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);
            assert!(centroids[1][0] > 9.0);
        }
    }

    #[test]
    fn identical_points_still_use_every_label() {
        let pts = vec![vec![1.0, 1.0]; 4];
        let r = kmeans_raw(&pts, 3, 5, &KMeansOptions::default());
        let mut used = r.labels.clone();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 3);
        assert!(r.repaired_empty > 0);
    }

    #[test]
    fn canonical_order_follows_first_member() {
        let (labels, centroids) = canonicalize(&[2, 0, 2, 1], vec![vec![0.0], vec![1.0], vec![2.0]]);
        assert_eq!(labels, vec![0, 1, 0, 2]);
        assert_eq!(centroids, vec![vec![2.0], vec![0.0], vec![1.0]]);
    }
}
