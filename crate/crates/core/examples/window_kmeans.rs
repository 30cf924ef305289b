// One-dimensional K-means over a window, plus the two shortcuts that skip
// it: K1 (a single cluster is forced) and LowK (fewer distinct values than K).

use skipstage::clustering::{apply_lowk, check_k1, initial_centers, kmeans_full};

fn main() {
    let window = [1.0, 8.0, 15.0, 0.9, 8.4, 1.2, 1.1, 8.1, 14.6, 1.0];
    let k = 3;
    println!("initial centers {:?}", initial_centers(&window, k));
    let r = kmeans_full(&window, k, 50);
    println!("centroids {:?}", r.centroids);
    println!("sequence  {:?}", r.assignments);

    let flat = [4.0; 6];
    println!("K1 on a flat window: {}", check_k1(&flat, k));

    let two = [2.0, 5.0, 2.0, 2.0, 5.0];
    let lowk = apply_lowk(&two, k).expect("2 distinct values < K");
    println!("LowK centroids {:?}, sequence {:?}", lowk.centroids, lowk.assignments);
    assert_eq!(lowk.assignments, kmeans_full(&two, k, 50).assignments);
}
