//! Lloyd's k-means on 2D points.

use crate::error::{validation, Result};
use crate::rng::SeededRng;

pub const DEFAULT_ITERS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<[f64; 2]>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: &[f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Sum of squared distances from each point to its nearest centroid.
pub fn sse(points: &[[f64; 2]], centroids: &[[f64; 2]]) -> f64 {
    points
        .iter()
        .map(|p| dist2(p, &centroids[nearest(p, centroids)]))
        .sum()
}

/// Seeds from `k` distinct sample indices, then alternates assignment and
/// mean updates until the assignment stops changing or `iters` rounds pass.
/// An empty cluster is re-seeded at the point farthest from its centroid.
pub fn kmeans(points: &[[f64; 2]], k: usize, iters: usize, rng: &mut SeededRng) -> Result<KMeansFit> {
    if k == 0 {
        return Err(validation("kmeans needs k >= 1"));
    }
    if points.len() < k {
        return Err(validation(format!(
            "kmeans needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    let mut centroids: Vec<[f64; 2]> = rng
        .sample_indices(points.len(), k)
        .into_iter()
        .map(|i| points[i])
        .collect();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut iterations = 0;
    for _ in 0..iters {
        iterations += 1;
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        let mut taken = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| {
                        let da = dist2(&points[a], &centroids[assignments[a]]);
                        let db = dist2(&points[b], &centroids[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("points.len() >= k");
                taken.push(far);
                centroids[c] = points[far];
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        iterations,
    })
}
