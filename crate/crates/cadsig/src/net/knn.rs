//! Brute-force k-nearest-neighbor indices on point coordinates.

use rayon::prelude::*;

/// Flattened `N x k` neighbor indices (self included; ties broken by index).
///
/// Computed once per cloud from coordinates only and shared by every
/// aggregation layer — point positions never change inside the network.
pub fn knn_indices(points: &[[f64; 3]], k: usize) -> Vec<usize> {
    let n = points.len();
    assert!(n > k, "need more than k = {k} points, got {n}");
    let mut out = vec![0usize; n * k];
    out.par_chunks_mut(k).enumerate().for_each(|(i, slot)| {
        let p = points[i];
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (j, q) in points.iter().enumerate() {
            let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            let cand = (d, j);
            if best.len() < k {
                best.push(cand);
                best.sort_by(cmp);
            } else if cmp(&cand, best.last().unwrap()) == std::cmp::Ordering::Less {
                *best.last_mut().unwrap() = cand;
                best.sort_by(cmp);
            }
        }
        for (s, (_, j)) in slot.iter_mut().zip(best) {
            *s = j;
        }
    });
    out
}

fn cmp(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.1.cmp(&b.1))
}
