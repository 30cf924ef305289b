//! One-dimensional K-means over a window, and the shortcuts that avoid it.
//!
//! Initial centers are the first K distinct values of the window. Lloyd
//! iterations assign each value to its nearest centroid; an exact distance tie
//! goes to the centroid with the lower value, then the lower index, so the
//! partition depends only on the window's multiset and the *set* of initial
//! centers. Centroid sums are accumulated in ascending value order for the
//! same reason. Both properties are what make IN/OUT reuse exact.

pub mod inout;
pub mod sweep;

use ordered_float::OrderedFloat;

pub use inout::{in_out_check, reuse_clusters};
pub use sweep::{sorted_sweep_kmeans, sweep_assign, SortedMultiset};

/// Which path produced a window's clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trigger {
    Full,
    InOut,
    K1,
    LowK,
    Sorted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub centroids: Vec<f64>,
    /// Cluster index per window position.
    pub assignments: Vec<u32>,
    pub reused: bool,
    pub trigger: Trigger,
}

/// First `min(k, distinct)` distinct values in order of first appearance.
pub fn initial_centers(values: &[f64], k: usize) -> Vec<f64> {
    let mut centers: Vec<f64> = Vec::with_capacity(k);
    for &v in values {
        if centers.len() == k {
            break;
        }
        if !centers.contains(&v) {
            centers.push(v);
        }
    }
    centers
}

/// Index of the centroid nearest to `x`.
#[inline]
pub fn nearest(x: f64, centroids: &[f64]) -> u32 {
    let mut best = 0;
    let mut best_d = (x - centroids[0]).abs();
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (x - c).abs();
        if d < best_d || (d == best_d && c < centroids[best]) {
            best = j;
            best_d = d;
        }
    }
    best as u32
}

/// One assignment step of the baseline: every value to its nearest centroid.
pub fn assign_nearest(values: &[f64], centroids: &[f64], out: &mut Vec<u32>) {
    out.clear();
    out.extend(values.iter().map(|&v| nearest(v, centroids)));
}

/// Recomputes centroids as means of their members, visiting values in `order`.
/// Empty clusters keep their centroid.
fn update_centroids(values: &[f64], order: &[usize], assignments: &[u32], centroids: &mut [f64]) {
    let mut sums = vec![0.0f64; centroids.len()];
    let mut sizes = vec![0u32; centroids.len()];
    for &i in order {
        let c = assignments[i] as usize;
        sums[c] += values[i];
        sizes[c] += 1;
    }
    for (c, centroid) in centroids.iter_mut().enumerate() {
        if sizes[c] > 0 {
            *centroid = sums[c] / f64::from(sizes[c]);
        }
    }
}

/// Baseline Lloyd K-means with first-K-distinct initialization.
///
/// Stops when an iteration leaves every assignment unchanged, or after
/// `max_iter` centroid updates.
pub fn kmeans_full(values: &[f64], k: usize, max_iter: usize) -> ClusteringResult {
    assert!(!values.is_empty() && k >= 1);
    let mut centroids = initial_centers(values, k);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut assignments = Vec::with_capacity(values.len());
    let mut next = Vec::with_capacity(values.len());
    assign_nearest(values, &centroids, &mut assignments);
    let mut converged = false;
    for _ in 0..max_iter {
        update_centroids(values, &order, &assignments, &mut centroids);
        assign_nearest(values, &centroids, &mut next);
        if next == assignments {
            converged = true;
            break;
        }
        std::mem::swap(&mut assignments, &mut next);
    }
    if !converged {
        update_centroids(values, &order, &assignments, &mut centroids);
    }
    ClusteringResult {
        centroids,
        assignments,
        reused: false,
        trigger: Trigger::Full,
    }
}

/// True when the window necessarily forms a single cluster.
pub fn check_k1(values: &[f64], k: usize) -> bool {
    k == 1 || values.windows(2).all(|p| p[0] == p[1])
}

/// When the window has `1 < D < k` distinct values, each becomes its own
/// cluster. That is a fixed point of the Lloyd iteration.
pub fn apply_lowk(values: &[f64], k: usize) -> Option<ClusteringResult> {
    let mut distinct: Vec<OrderedFloat<f64>> = Vec::with_capacity(k);
    let mut assignments = Vec::with_capacity(values.len());
    for &v in values {
        let key = OrderedFloat(v);
        let idx = match distinct.iter().position(|&d| d == key) {
            Some(i) => i,
            None => {
                if distinct.len() + 1 >= k {
                    return None;
                }
                distinct.push(key);
                distinct.len() - 1
            }
        };
        assignments.push(idx as u32);
    }
    if distinct.len() < 2 {
        return None;
    }
    Some(ClusteringResult {
        centroids: distinct.into_iter().map(|d| d.0).collect(),
        assignments,
        reused: false,
        trigger: Trigger::LowK,
    })
}

/// Canonical labelling of a partition: clusters renumbered by first appearance.
pub fn canonical_partition(assignments: &[u32]) -> Vec<u32> {
    let mut map: Vec<(u32, u32)> = Vec::new();
    assignments
        .iter()
        .map(|&a| match map.iter().find(|(from, _)| *from == a) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len() as u32;
                map.push((a, to));
                to
            }
        })
        .collect()
}
