//! Label agreement up to relabelling.

use crate::error::{Error, Result};
use crate::model::HardAssignment;

/// Largest `K` scored by trying every permutation.
pub const EXHAUSTIVE_MAX_K: usize = 8;

/// Fraction of points whose predicted label, after the best relabelling,
/// equals the true one. Discarded points count as wrong. Up to
/// [`EXHAUSTIVE_MAX_K`] labels every permutation is tried; beyond that a
/// greedy matching on the confusion matrix is used.
pub fn success_rate(predicted: &HardAssignment, truth: &[usize], k: usize) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch { expected: truth.len(), found: predicted.len() });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = predicted.labels().iter().flatten().chain(truth).map(|&l| l + 1).max().unwrap_or(1).max(k);
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, &t) in predicted.labels().iter().zip(truth) {
        if let Some(p) = *p {
            confusion[p][t] += 1;
        }
    }
    let matched = if k <= EXHAUSTIVE_MAX_K {
        best_permutation(&confusion)
    } else {
        log::warn!("{k} labels: using greedy matching instead of all permutations");
        greedy_matching(confusion)
    };
    Ok(matched as f64 / truth.len() as f64)
}

fn best_permutation(confusion: &[Vec<usize>]) -> usize {
    fn go(row: usize, used: &mut [bool], confusion: &[Vec<usize>]) -> usize {
        if row == confusion.len() {
            return 0;
        }
        let mut best = 0;
        for col in 0..confusion.len() {
            if !used[col] {
                used[col] = true;
                best = best.max(confusion[row][col] + go(row + 1, used, confusion));
                used[col] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; confusion.len()], confusion)
}

fn greedy_matching(mut confusion: Vec<Vec<usize>>) -> usize {
    let k = confusion.len();
    let mut total = 0;
    for _ in 0..k {
        let (mut bi, mut bj, mut best) = (0, 0, 0);
        for (i, row) in confusion.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best {
                    (bi, bj, best) = (i, j, v);
                }
            }
        }
        if best == 0 {
            break;
        }
        total += best;
        for v in &mut confusion[bi] {
            *v = 0;
        }
        for row in &mut confusion {
            row[bj] = 0;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hard(v: &[usize]) -> HardAssignment {
        HardAssignment::from_labels(v.to_vec())
    }

    #[test]
    fn examples() {
        let truth = [0, 0, 1, 1, 1, 0];
        assert_eq!(success_rate(&hard(&truth), &truth, 2).unwrap(), 1.0);
        let flipped: Vec<usize> = truth.iter().map(|l| 1 - l).collect();
        assert_eq!(success_rate(&hard(&flipped), &truth, 2).unwrap(), 1.0);
        // Truth 0,0,1,1 against 0,1,0,1: every relabelling matches two points.
        assert_eq!(success_rate(&hard(&[0, 1, 0, 1]), &[0, 0, 1, 1], 2).unwrap(), 0.5);
        assert!(success_rate(&hard(&[0, 1]), &[0], 2).is_err());
    }

    #[test]
    fn discards_count_as_wrong() {
        let p = HardAssignment::new(vec![Some(0), None, Some(1), None]);
        assert_eq!(success_rate(&p, &[0, 0, 1, 1], 2).unwrap(), 0.5);
    }

    #[test]
    fn greedy_handles_many_labels() {
        let truth: Vec<usize> = (0..40).map(|i| i % 10).collect();
        let pred: Vec<usize> = truth.iter().map(|l| (l + 3) % 10).collect();
        assert_eq!(success_rate(&hard(&pred), &truth, 10).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn dominates_identity(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let (pred, truth): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let identity = pred.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64;
            let rate = success_rate(&hard(&pred), &truth, 4).unwrap();
            prop_assert!(rate >= identity);
            prop_assert!((0.0..=1.0).contains(&rate));
        }
    }
}
