//! Deterministic stratified splitting.

use crate::error::{DataError, Result};
use cqd_tensor::rng::{derive_seed, seeded_rng};
use rand::seq::SliceRandom;

#[derive(Clone, Debug, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits sample indices per class with largest-remainder apportionment, so
/// every class contributes to each nonzero fraction as exactly as integers
/// allow. Classes with fewer than 3 samples cannot be stratified and are an
/// error. Shuffling is per class from `derive_seed(seed, class)`.
pub fn stratified_split(labels: &[u32], fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (ft, fv, fs) = fractions;
    if ft < 0.0 || fv < 0.0 || fs < 0.0 || (ft + fv + fs - 1.0).abs() > 1e-6 {
        return Err(DataError::Contract(format!(
            "split fractions {fractions:?} must be non-negative and sum to 1"
        )));
    }
    if labels.is_empty() {
        return Err(DataError::Contract("no samples to split".into()));
    }
    let num_classes = *labels.iter().max().unwrap() as usize + 1;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }

    let mut split = Split::default();
    for (class, mut idxs) in by_class.into_iter().enumerate() {
        if idxs.is_empty() {
            continue;
        }
        if idxs.len() < 3 {
            return Err(DataError::Contract(format!(
                "class {class} has only {} samples; at least 3 are needed to stratify",
                idxs.len()
            )));
        }
        let mut rng = seeded_rng(derive_seed(seed, class as u64));
        idxs.shuffle(&mut rng);

        let n = idxs.len();
        let exact = [ft * n as f64, fv * n as f64, fs * n as f64];
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut leftover = n - counts.iter().sum::<usize>();
        // hand out remainders by largest fractional part, earlier split wins ties
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &part in order.iter().cycle() {
            if leftover == 0 {
                break;
            }
            counts[part] += 1;
            leftover -= 1;
        }

        let mut it = idxs.into_iter();
        split.train.extend(it.by_ref().take(counts[0]));
        split.val.extend(it.by_ref().take(counts[1]));
        split.test.extend(it.by_ref().take(counts[2]));
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(per_class: &[usize]) -> Vec<u32> {
        let mut out = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            out.extend(std::iter::repeat_n(c as u32, n));
        }
        out
    }

    #[test]
    fn covers_everything_disjointly() {
        let l = labels(&[10, 13, 7]);
        let s = stratified_split(&l, (0.6, 0.2, 0.2), 3).unwrap();
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
    }

    #[test]
    fn per_class_counts_follow_largest_remainder() {
        let l = labels(&[10]);
        let s = stratified_split(&l, (0.8, 0.0, 0.2), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 0, 2));

        // 7 samples at 60/20/20: floors (4,1,1); val and test tie on the
        // 0.4 remainder and the earlier split wins the single leftover
        let l = labels(&[7]);
        let s = stratified_split(&l, (0.6, 0.2, 0.2), 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (4, 2, 1));
    }

    #[test]
    fn stratification_is_exact_per_class() {
        let l = labels(&[20, 20, 20, 20]);
        let s = stratified_split(&l, (0.8, 0.0, 0.2), 9).unwrap();
        for c in 0..4u32 {
            let in_train = s.train.iter().filter(|&&i| l[i] == c).count();
            let in_test = s.test.iter().filter(|&&i| l[i] == c).count();
            assert_eq!((in_train, in_test), (16, 4));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let l = labels(&[30, 30]);
        let a = stratified_split(&l, (0.5, 0.25, 0.25), 7).unwrap();
        let b = stratified_split(&l, (0.5, 0.25, 0.25), 7).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = stratified_split(&l, (0.5, 0.25, 0.25), 8).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn rejects_tiny_classes_and_bad_fractions() {
        let l = labels(&[10, 2]);
        assert!(stratified_split(&l, (0.8, 0.0, 0.2), 0).is_err());
        let l = labels(&[10]);
        assert!(stratified_split(&l, (0.5, 0.2, 0.2), 0).is_err());
        assert!(stratified_split(&l, (1.2, -0.2, 0.0), 0).is_err());
        assert!(stratified_split(&[], (0.8, 0.0, 0.2), 0).is_err());
    }
}
