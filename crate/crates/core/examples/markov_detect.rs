// Transition counts of a cluster sequence, the O(1) shift when the sequence
// rotates, and the composed probability of the last N transitions.

use skipstage::modeling::{composed_probability, count_transitions, detect, shift_counts};

fn main() {
    let seq = [0, 0, 0, 1, 0, 0, 1, 1, 0, 2];
    let counts = count_transitions(&seq);
    for ((from, to), n) in counts.pairs() {
        println!("{from}->{to}: {n}/{}", counts.from_total(from));
    }
    let (p, divisions) = composed_probability(&seq, &counts, 5).expect("defined sources");
    println!("last 5 transitions: p = {p} ({divisions} divisions)");
    println!("flagged at 0.01: {:?}", detect(&seq, &counts, 5, 0.01).expect("defined sources"));

    // rotate left by one: drop the head pair, add the wrap-around pair
    let mut shifted = counts.clone();
    let last = seq.len() - 1;
    shift_counts(&mut shifted, (seq[0], seq[1]), (seq[last], seq[0])).expect("present pair");
    let mut rotated = seq[1..].to_vec();
    rotated.push(seq[0]);
    assert_eq!(shifted, count_transitions(&rotated));
    println!("shifted counts equal a recount of {rotated:?}");
}
