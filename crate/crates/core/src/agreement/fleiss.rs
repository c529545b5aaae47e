//! Fleiss's multi-π over nominal labels with a variable number of coders per item.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::AgreementError;

/// Chance-corrected agreement summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Mean over items of the fraction of agreeing coder pairs.
    pub observed: f64,
    /// Σ p_k² over pooled category proportions.
    pub expected: f64,
    /// `(observed − expected) / (1 − expected)`; `None` when `expected == 1`.
    pub multi_pi: Option<f64>,
    /// Pooled proportion per category label, ascending by label.
    pub proportions: Vec<(u32, f64)>,
    pub items: usize,
}

/// Computes multi-π for `items[i][c]` = label given by coder `c` to item `i`.
///
/// Items may have different numbers of coders; each needs at least two.
pub fn fleiss_multi_pi<T: AsRef<[u32]>>(items: &[T]) -> Result<AgreementReport, AgreementError> {
    if items.is_empty() {
        return Err(AgreementError::Empty);
    }
    let mut observed_sum = 0.0;
    let mut pooled: BTreeMap<u32, usize> = BTreeMap::new();
    let mut total_labels = 0usize;
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for (idx, item) in items.iter().enumerate() {
        let labels = item.as_ref();
        let n = labels.len();
        if n < 2 {
            return Err(AgreementError::TooFewCoders { item: idx, coders: n });
        }
        counts.clear();
        for &l in labels {
            *counts.entry(l).or_insert(0) += 1;
            *pooled.entry(l).or_insert(0) += 1;
        }
        total_labels += n;
        let agreeing: usize = counts.values().map(|&c| c * (c - 1)).sum();
        observed_sum += agreeing as f64 / (n * (n - 1)) as f64;
    }
    let observed = observed_sum / items.len() as f64;
    let proportions: Vec<(u32, f64)> =
        pooled.iter().map(|(&k, &c)| (k, c as f64 / total_labels as f64)).collect();
    let expected: f64 = proportions.iter().map(|(_, p)| p * p).sum();
    let multi_pi = if pooled.len() <= 1 { None } else { Some((observed - expected) / (1.0 - expected)) };
    Ok(AgreementReport { observed, expected, multi_pi, proportions, items: items.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    /// Enumerates every unordered coder pair and every label directly.
    fn brute_force(items: &[Vec<u32>]) -> (f64, f64) {
        let mut ao = 0.0;
        for item in items {
            let mut agree = 0usize;
            let mut pairs = 0usize;
            for a in 0..item.len() {
                for b in a + 1..item.len() {
                    pairs += 1;
                    if item[a] == item[b] {
                        agree += 1;
                    }
                }
            }
            ao += agree as f64 / pairs as f64;
        }
        ao /= items.len() as f64;
        let all: Vec<u32> = items.iter().flatten().copied().collect();
        let mut ae = 0.0;
        for k in 0..4u32 {
            let p = all.iter().filter(|&&l| l == k).count() as f64 / all.len() as f64;
            ae += p * p;
        }
        (ao, ae)
    }

    #[test]
    fn worked_example() {
        let r = fleiss_multi_pi(&[vec![1, 1, 0], vec![0, 0, 0]]).unwrap();
        assert!((r.observed - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.expected - 5.0 / 9.0).abs() < 1e-15);
        assert!((r.multi_pi.unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn perfect_agreement_mixed_categories() {
        let r = fleiss_multi_pi(&[vec![1, 1, 1], vec![0, 0, 0], vec![2, 2]]).unwrap();
        assert_eq!(r.observed, 1.0);
        assert!((r.multi_pi.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_single_category() {
        let r = fleiss_multi_pi(&[vec![0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(r.observed, 1.0);
        assert_eq!(r.expected, 1.0);
        assert_eq!(r.multi_pi, None);
    }

    #[test]
    fn needs_two_coders() {
        assert_eq!(fleiss_multi_pi(&[vec![0, 1], vec![1]]), Err(AgreementError::TooFewCoders { item: 1, coders: 1 }));
        assert_eq!(fleiss_multi_pi::<Vec<u32>>(&[]), Err(AgreementError::Empty));
    }

    fn table() -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0u32..3, 2..=5), 1..=10)
    }

    proptest! {
        #[test]
        fn matches_brute_force(items in table()) {
            let r = fleiss_multi_pi(&items).unwrap();
            let (ao, ae) = brute_force(&items);
            prop_assert!((r.observed - ao).abs() < 1e-12);
            prop_assert!((r.expected - ae).abs() < 1e-12);
            if let Some(pi) = r.multi_pi {
                prop_assert!((pi - (ao - ae) / (1.0 - ae)).abs() < 1e-12);
                prop_assert!(pi <= r.observed + 1e-12);
                let unanimous = items.iter().all(|it| it.iter().all(|&l| l == it[0]));
                prop_assert_eq!(unanimous, (pi - 1.0).abs() < 1e-12);
            }
        }
    }
}
