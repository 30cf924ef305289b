//! Lazy Markov model over a window's cluster sequence.
//!
//! Only the integer counts are kept per window; probabilities are divided out
//! on demand for the last N transitions when detecting.

use std::collections::HashMap;

use thiserror::Error;

pub type Pair = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("transition {0:?} is not present in the counts")]
    MissingPair(Pair),
    #[error("cluster {0} has no outgoing transitions")]
    UndefinedSource(u32),
}

/// Pairwise transition counts and per-source totals of one cluster sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionCounts {
    pair_counts: HashMap<Pair, u32>,
    from_totals: HashMap<u32, u32>,
}

impl TransitionCounts {
    pub fn from_sequence<I: IntoIterator<Item = u32>>(seq: I) -> Self {
        let mut counts = Self::default();
        let mut iter = seq.into_iter();
        if let Some(mut prev) = iter.next() {
            for next in iter {
                counts.add((prev, next));
                prev = next;
            }
        }
        counts
    }

    /// Counts for a sequence of `len` identical cluster labels.
    pub fn constant(label: u32, len: usize) -> Self {
        let mut counts = Self::default();
        if len > 1 {
            counts.pair_counts.insert((label, label), (len - 1) as u32);
            counts.from_totals.insert(label, (len - 1) as u32);
        }
        counts
    }

    pub fn pair_count(&self, pair: Pair) -> u32 {
        self.pair_counts.get(&pair).copied().unwrap_or(0)
    }

    pub fn from_total(&self, from: u32) -> u32 {
        self.from_totals.get(&from).copied().unwrap_or(0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Pair, u32)> + '_ {
        self.pair_counts.iter().map(|(p, c)| (*p, *c))
    }

    /// Sum of all per-source totals, i.e. the number of transitions counted.
    pub fn total(&self) -> u64 {
        self.from_totals.values().map(|&c| u64::from(c)).sum()
    }

    fn add(&mut self, pair: Pair) {
        *self.pair_counts.entry(pair).or_insert(0) += 1;
        *self.from_totals.entry(pair.0).or_insert(0) += 1;
    }

    fn remove(&mut self, pair: Pair) -> Result<(), ModelError> {
        let count = self
            .pair_counts
            .get_mut(&pair)
            .ok_or(ModelError::MissingPair(pair))?;
        *count -= 1;
        if *count == 0 {
            self.pair_counts.remove(&pair);
        }
        let total = self
            .from_totals
            .get_mut(&pair.0)
            .ok_or(ModelError::MissingPair(pair))?;
        *total -= 1;
        if *total == 0 {
            self.from_totals.remove(&pair.0);
        }
        Ok(())
    }

    /// Drops the window's leading transition and adds the new trailing one.
    pub fn shift(&mut self, dropped: Pair, added: Pair) -> Result<(), ModelError> {
        self.remove(dropped)?;
        self.add(added);
        Ok(())
    }

    pub fn probability(&self, from: u32, to: u32) -> Result<f64, ModelError> {
        match self.from_totals.get(&from) {
            Some(&total) => Ok(f64::from(self.pair_count((from, to))) / f64::from(total)),
            None => Err(ModelError::UndefinedSource(from)),
        }
    }
}

pub fn count_transitions(seq: &[u32]) -> TransitionCounts {
    TransitionCounts::from_sequence(seq.iter().copied())
}

pub fn shift_counts(
    counts: &mut TransitionCounts,
    dropped: Pair,
    added: Pair,
) -> Result<(), ModelError> {
    counts.shift(dropped, added)
}

pub fn transition_probability(counts: &TransitionCounts, from: u32, to: u32) -> Result<f64, ModelError> {
    counts.probability(from, to)
}

/// Product of the last `min(n, len - 1)` transition probabilities of `seq`,
/// oldest first, plus the number of divisions performed.
///
/// Each distinct pair is divided once; repeats reuse the quotient.
pub fn composed_probability(
    seq: &[u32],
    counts: &TransitionCounts,
    n: usize,
) -> Result<(f64, usize), ModelError> {
    if seq.len() < 2 {
        return Ok((1.0, 0));
    }
    let steps = n.min(seq.len() - 1);
    let tail = &seq[seq.len() - 1 - steps..];
    let mut quotients: Vec<(Pair, f64)> = Vec::with_capacity(steps);
    let mut product = 1.0;
    for w in tail.windows(2) {
        let pair = (w[0], w[1]);
        let p = match quotients.iter().find(|(q, _)| *q == pair) {
            Some(&(_, p)) => p,
            None => {
                let p = counts.probability(pair.0, pair.1)?;
                quotients.push((pair, p));
                p
            }
        };
        product *= p;
    }
    Ok((product, quotients.len()))
}

/// Composed probability when it falls strictly below `threshold`.
pub fn detect(
    seq: &[u32],
    counts: &TransitionCounts,
    n: usize,
    threshold: f64,
) -> Result<Option<f64>, ModelError> {
    let (p, _) = composed_probability(seq, counts, n)?;
    Ok((p < threshold).then_some(p))
}
