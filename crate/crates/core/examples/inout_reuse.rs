// IN/OUT: when a slide evicts and inserts the same value and the first K
// distinct values stay the same set, the previous clustering carries over.

use skipstage::clustering::{canonical_partition, in_out_check, kmeans_full, reuse_clusters};
use skipstage::window::SensorWindow;

fn main() {
    let (w, k) = (6, 2);
    let stream = [3.0, 7.0, 3.0, 3.0, 7.0, 7.0, 3.0, 7.0, 3.0, 9.0, 3.0];
    let mut window = SensorWindow::new(w, k);
    for (i, &v) in stream.iter().enumerate() {
        window.slide(v);
        if !window.is_full() {
            continue;
        }
        let values: Vec<f64> = window.values().collect();
        let fresh = kmeans_full(&values, k, 50);
        let trigger = if !window.is_primed() {
            window.prime();
            window.install(fresh.centroids.clone(), &fresh.assignments);
            "first"
        } else if in_out_check(&mut window) {
            let kept = reuse_clusters(&mut window);
            assert_eq!(canonical_partition(&kept.assignments), canonical_partition(&fresh.assignments));
            "IN/OUT"
        } else {
            window.install(fresh.centroids.clone(), &fresh.assignments);
            "FULL"
        };
        println!("slide {i:>2} {values:?} -> {trigger}");
    }
}
