use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// How rare classes are compensated during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BalancingStrategy {
    #[default]
    None,
    /// Duplicate minority-class points (sampling with replacement) up to the
    /// majority count.
    Oversample { seed: u64 },
    /// Scale each class's dual box by `total / (classes · count)`.
    InverseWeights,
}

fn class_members(labels: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        members.entry(l.as_str()).or_default().push(i);
    }
    members
}

/// Indices of the balanced sample: every original index once, followed by
/// the duplicates drawn for each minority class in class order.
pub fn oversample_indices(labels: &[String], seed: u64) -> Vec<usize> {
    let members = class_members(labels);
    let target = members.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    for idx in members.values() {
        for _ in idx.len()..target {
            out.push(idx[rng.gen_range(0..idx.len())]);
        }
    }
    out
}

pub fn oversample(
    points: &[Vec<f64>],
    labels: &[String],
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<String>) {
    oversample_indices(labels, seed)
        .into_iter()
        .map(|i| (points[i].clone(), labels[i].clone()))
        .unzip()
}

/// `total / (num_classes · count_c)` per class.
pub fn inverse_weights(labels: &[String]) -> BTreeMap<String, f64> {
    let members = class_members(labels);
    let total = labels.len() as f64;
    let k = members.len() as f64;
    members
        .into_iter()
        .map(|(c, idx)| (c.to_string(), total / (k * idx.len() as f64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(counts: &[(&str, usize)]) -> Vec<String> {
        counts
            .iter()
            .flat_map(|(l, n)| std::iter::repeat_n(l.to_string(), *n))
            .collect()
    }

    fn counts(ls: &[String]) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for l in ls {
            *m.entry(l.clone()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn oversample_equalizes() {
        let ls = labels(&[("a", 4), ("b", 2)]);
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let (p, l) = oversample(&pts, &ls, 11);
        assert_eq!(counts(&l).values().copied().collect::<Vec<_>>(), vec![4, 4]);
        assert_eq!(&p[..6], &pts[..]);
        assert!(p[6..].iter().all(|x| x[0] >= 4.0));
        assert_eq!(oversample(&pts, &ls, 11), (p, l));
    }

    #[test]
    fn balanced_input_unchanged() {
        let ls = labels(&[("a", 3), ("b", 3)]);
        assert_eq!(oversample_indices(&ls, 5), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn inverse_weight_examples() {
        let w = inverse_weights(&labels(&[("a", 4), ("b", 4)]));
        assert_eq!(w["a"], 1.0);
        assert_eq!(w["b"], 1.0);

        let w = inverse_weights(&labels(&[("a", 6), ("b", 2)]));
        assert!((w["a"] - 8.0 / 12.0).abs() < 1e-15);
        assert!((w["b"] - 2.0).abs() < 1e-15);
        assert!((w["a"] * 6.0 + w["b"] * 2.0 - 8.0).abs() < 1e-12);

        assert_eq!(inverse_weights(&labels(&[("solo", 3)]))["solo"], 1.0);
    }
}
