//! IN/OUT: detect that a slide left the clustering unchanged.
//!
//! After a slide the window lost `prev_first` at the front. If the inserted
//! value equals it and the set of the first K distinct values is the same, the
//! new window holds the same multiset with the same initial centers, so its
//! clustering is the previous one with the sequence rotated by one.

use ordered_float::OrderedFloat;

use super::{ClusteringResult, Trigger};
use crate::window::SensorWindow;

/// Updates the prefix state for the current slide and reports whether the
/// previous clustering can be reused.
///
/// Requires a primed window that has slid at least once since priming.
pub fn in_out_check(w: &mut SensorWindow) -> bool {
    let prev = w.prev_first.expect("in_out_check before any eviction");
    let k = w.clusters();
    let len = w.values.len();
    let prev_key = OrderedFloat(prev);
    // `position` now is the one-past end of the counted prefix in this window.
    let mut position = w.position;

    let remaining = {
        let count = w
            .frequencies
            .get_mut(&prev_key)
            .expect("evicted value missing from the prefix counts");
        *count -= 1;
        *count
    };

    let mut result = false;
    let end;
    if remaining == 0 {
        w.frequencies.remove(&prev_key);
        while position < len
            && w.frequencies.len() < k
            && w.frequencies.contains_key(&OrderedFloat(w.values[position]))
        {
            *w.frequencies.get_mut(&OrderedFloat(w.values[position])).unwrap() += 1;
            position += 1;
        }
        if position < len {
            let found = w.values[position];
            w.frequencies.insert(OrderedFloat(found), 1);
            if found == prev {
                result = true;
            }
            end = extend_frontier(w, position + 1);
        } else {
            end = len;
        }
    } else {
        result = true;
        end = extend_frontier(w, position);
    }
    w.position = end - 1;
    result && w.values.back().copied() == Some(prev)
}

/// While fewer than K distinct values are tracked, keeps counting from `from`
/// to the end of the window or to the first occurrence of the K-th distinct
/// value. Returns the new one-past end of the prefix.
fn extend_frontier(w: &mut SensorWindow, from: usize) -> usize {
    let k = w.clusters();
    let mut position = from;
    while w.frequencies.len() < k && position < w.values.len() {
        *w.frequencies
            .entry(OrderedFloat(w.values[position]))
            .or_insert(0) += 1;
        position += 1;
    }
    position
}

/// Previous clustering carried over to the slid window.
///
/// Call only after [`in_out_check`] returned true for this slide.
pub fn reuse_clusters(w: &mut SensorWindow) -> ClusteringResult {
    w.rotate_sequence();
    ClusteringResult {
        centroids: w.centroids.clone(),
        assignments: w.cluster_sequence.iter().copied().collect(),
        reused: true,
        trigger: Trigger::InOut,
    }
}
