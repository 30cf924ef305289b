//! Sorted-sweep K-means.
//!
//! With the window kept as an ordered multiset and the centroids sorted, one
//! Lloyd iteration is a single merge-like pass: values walk upward while the
//! cluster pointer advances whenever the next centroid is strictly closer.
//! Centroid sums for the next iteration accumulate in the same pass, giving
//! O(K + W) per iteration instead of O(K * W).

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;

use super::{initial_centers, ClusteringResult, Trigger};

/// Ordered multiset of window values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SortedMultiset {
    counts: BTreeMap<OrderedFloat<f64>, u32>,
    len: usize,
}

impl SortedMultiset {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut s = Self::default();
        for v in values {
            s.insert(v);
        }
        s
    }

    pub fn insert(&mut self, value: f64) {
        *self.counts.entry(OrderedFloat(value)).or_insert(0) += 1;
        self.len += 1;
    }

    /// Removes one occurrence; returns false when the value is absent.
    pub fn remove(&mut self, value: f64) -> bool {
        let key = OrderedFloat(value);
        match self.counts.get_mut(&key) {
            Some(n) => {
                *n -= 1;
                if *n == 0 {
                    self.counts.remove(&key);
                }
                self.len -= 1;
                true
            }
            None => false,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Distinct values ascending, with multiplicities.
    pub fn iter(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.counts.iter().map(|(k, &n)| (k.0, n))
    }

    /// Every value ascending, repeats included.
    pub fn iter_expanded(&self) -> impl Iterator<Item = f64> + '_ {
        self.iter()
            .flat_map(|(v, n)| std::iter::repeat_n(v, n as usize))
    }
}

/// Result of one sweep pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPass {
    /// Cluster per distinct value, in ascending value order.
    pub assignments: Vec<u32>,
    pub sums: Vec<f64>,
    pub sizes: Vec<u32>,
}

/// Assigns every distinct value of `sorted` to its nearest centroid in one
/// ascending pass, accumulating per-cluster sums as it goes.
///
/// Tie rule matches the baseline: equal distance keeps the lower centroid
/// value, then the lower index.
pub fn sweep_assign(sorted: &[(f64, u32)], centroids: &[f64]) -> SweepPass {
    // Ascending distinct centroid values, each represented by its lowest index.
    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]).then(a.cmp(&b)));
    order.dedup_by(|b, a| centroids[*a] == centroids[*b]);
    let mut sums = vec![0.0; centroids.len()];
    let mut sizes = vec![0u32; centroids.len()];
    let mut assignments = Vec::with_capacity(sorted.len());
    let mut j = 0;
    for &(x, n) in sorted {
        // Rounded distances are only weakly unimodal over ascending centroids,
        // so ties can appear away from the true minimum: walk to the right end
        // of the lowest plateau, then back to its left end.
        let d = |i: usize| (x - centroids[order[i]]).abs();
        while j + 1 < order.len() && d(j + 1) <= d(j) {
            j += 1;
        }
        while j > 0 && d(j - 1) <= d(j) {
            j -= 1;
        }
        let c = order[j];
        for _ in 0..n {
            sums[c] += x;
        }
        sizes[c] += n;
        assignments.push(c as u32);
    }
    SweepPass {
        assignments,
        sums,
        sizes,
    }
}

fn refresh(centroids: &mut [f64], pass: &SweepPass) {
    for (c, centroid) in centroids.iter_mut().enumerate() {
        if pass.sizes[c] > 0 {
            *centroid = pass.sums[c] / f64::from(pass.sizes[c]);
        }
    }
}

/// K-means over `values` (window order) using the ordered view `sorted` of
/// the same multiset. Same initialization, tie rule and stopping rule as
/// [`super::kmeans_full`].
pub fn sorted_sweep_kmeans(
    values: &[f64],
    sorted: &SortedMultiset,
    k: usize,
    max_iter: usize,
) -> ClusteringResult {
    assert!(!values.is_empty() && k >= 1);
    debug_assert_eq!(values.len(), sorted.len());
    let distinct: Vec<(f64, u32)> = sorted.iter().collect();
    let mut centroids = initial_centers(values, k);

    let mut pass = sweep_assign(&distinct, &centroids);
    let mut converged = false;
    for _ in 0..max_iter {
        refresh(&mut centroids, &pass);
        let next = sweep_assign(&distinct, &centroids);
        if next.assignments == pass.assignments {
            converged = true;
            break;
        }
        pass = next;
    }
    if !converged {
        refresh(&mut centroids, &pass);
    }

    let assignments = values
        .iter()
        .map(|&v| {
            let at = distinct
                .binary_search_by(|(d, _)| OrderedFloat(*d).cmp(&OrderedFloat(v)))
                .expect("window value present in the sorted view");
            pass.assignments[at]
        })
        .collect();
    ClusteringResult {
        centroids,
        assignments,
        reused: false,
        trigger: Trigger::Sorted,
    }
}
