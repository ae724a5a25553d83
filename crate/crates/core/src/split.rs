//! Multilabel-stratified k-fold assignment.
//!
//! Greedy iterative stratification: repeatedly take the label with the
//! fewest unassigned reports and deal its reports (in seeded random order)
//! to the fold whose demand for that label is largest. Ties go to the fold
//! with more room left, then to a seeded coin. Fold sizes are capped so they
//! never differ by more than one.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DimensionDataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// Report id to fold index.
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    /// Per-item fold indices for `view`, in view order.
    pub fn folds_for(&self, view: &DimensionDataset) -> Result<Vec<usize>> {
        view.items
            .iter()
            .map(|it| self.fold_of(&it.id).ok_or_else(|| Error::MissingAssignment(it.id.clone())))
            .collect()
    }

    /// Indices of `view` items in `fold` (test) and in every other fold
    /// (train).
    pub fn partition(&self, view: &DimensionDataset, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let folds = self.folds_for(view)?;
        let (test, train): (Vec<usize>, Vec<usize>) = (0..folds.len()).partition(|&i| folds[i] == fold);
        Ok((train, test))
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignment.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn stratified_kfold(view: &DimensionDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("fold count {k} < 2")));
    }
    let n = view.len();
    if n < k {
        return Err(Error::TooFewReports { reports: n, folds: k });
    }
    let n_classes = view.n_classes();
    let mut rng = seed::rng(seed);

    // Demands are scaled by k so that fractional targets (count / k) stay
    // integral: demand = target * k - assigned * k.
    let mut label_demand = vec![vec![0i64; n_classes]; k];
    let mut remaining_per_label = vec![0usize; n_classes];
    for item in &view.items {
        for &c in &item.labels {
            remaining_per_label[c] += 1;
        }
    }
    for f in label_demand.iter_mut() {
        for (c, d) in f.iter_mut().enumerate() {
            *d = remaining_per_label[c] as i64;
        }
    }
    let base = n / k;
    let n_large = n % k;
    let mut sizes = vec![0usize; k];
    let mut n_full_large = 0usize;
    let mut fold_of = vec![usize::MAX; n];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let open = |sizes: &[usize], n_full_large: usize, f: usize| {
        sizes[f] < base || (sizes[f] == base && n_full_large < n_large)
    };

    let mut unassigned = n;
    while unassigned > 0 {
        let label = (0..n_classes)
            .filter(|&c| remaining_per_label[c] > 0)
            .min_by_key(|&c| (remaining_per_label[c], c));
        let batch: Vec<usize> = match label {
            Some(c) => order
                .iter()
                .copied()
                .filter(|&i| fold_of[i] == usize::MAX && view.items[i].labels.contains(&c))
                .collect(),
            None => order.iter().copied().filter(|&i| fold_of[i] == usize::MAX).collect(),
        };
        for i in batch {
            let candidates: Vec<usize> = (0..k).filter(|&f| open(&sizes, n_full_large, f)).collect();
            let key = |f: usize| {
                let ld = label.map_or(0, |c| label_demand[f][c]);
                (ld, -(sizes[f] as i64))
            };
            let best = candidates.iter().map(|&f| key(f)).max().expect("an open fold exists");
            let tied: Vec<usize> = candidates.into_iter().filter(|&f| key(f) == best).collect();
            let f = if tied.len() == 1 { tied[0] } else { tied[rng.random_range(0..tied.len())] };

            fold_of[i] = f;
            sizes[f] += 1;
            if sizes[f] == base + 1 {
                n_full_large += 1;
            }
            for &c in &view.items[i].labels {
                label_demand[f][c] -= k as i64;
                remaining_per_label[c] -= 1;
            }
            unassigned -= 1;
        }
    }

    rebalance(view, k, &order, &mut fold_of);

    let assignment = view
        .items
        .iter()
        .zip(fold_of)
        .map(|(it, f)| (it.id.clone(), f))
        .collect();
    Ok(FoldAssignment { k, assignment })
}

/// Pairwise swaps between folds that strictly lower the summed squared
/// deviation of per-class fold counts from their targets. The greedy pass
/// handles the most frequent label last, when fold capacities may force its
/// remaining reports into one fold; swapping keeps fold sizes fixed.
fn rebalance(view: &DimensionDataset, k: usize, order: &[usize], fold_of: &mut [usize]) {
    let n_classes = view.n_classes();
    let mut counts = vec![vec![0i64; k]; n_classes];
    let mut totals = vec![0i64; n_classes];
    for (item, &f) in view.items.iter().zip(fold_of.iter()) {
        for &c in &item.labels {
            counts[c][f] += 1;
            totals[c] += 1;
        }
    }
    // Reports grouped by (fold, label set), in shuffled order.
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for &i in order {
        let labels = &view.items[i].labels;
        let s = match sets.iter().position(|x| x == labels) {
            Some(s) => s,
            None => {
                sets.push(labels.clone());
                sets.len() - 1
            }
        };
        groups.entry((fold_of[i], s)).or_default().push(i);
    }
    let dev = |count: i64, total: i64| (k as i64 * count - total).pow(2);
    loop {
        let mut best: Option<(i64, usize, usize, usize, usize)> = None;
        for a in 0..k {
            for b in a + 1..k {
                for sa in 0..sets.len() {
                    if groups.get(&(a, sa)).is_none_or(Vec::is_empty) {
                        continue;
                    }
                    for sb in 0..sets.len() {
                        if sa == sb || groups.get(&(b, sb)).is_none_or(Vec::is_empty) {
                            continue;
                        }
                        let mut gain = 0i64;
                        for c in 0..n_classes {
                            let d = sets[sb].contains(&c) as i64 - sets[sa].contains(&c) as i64;
                            if d != 0 {
                                let (ca, cb, t) = (counts[c][a], counts[c][b], totals[c]);
                                gain += dev(ca, t) + dev(cb, t) - dev(ca + d, t) - dev(cb - d, t);
                            }
                        }
                        if gain > 0 && best.is_none_or(|g| gain > g.0) {
                            best = Some((gain, a, sa, b, sb));
                        }
                    }
                }
            }
        }
        let Some((_, a, sa, b, sb)) = best else { break };
        let i = groups.get_mut(&(a, sa)).and_then(Vec::pop).expect("non-empty group");
        let j = groups.get_mut(&(b, sb)).and_then(Vec::pop).expect("non-empty group");
        for &c in &sets[sa] {
            counts[c][a] -= 1;
            counts[c][b] += 1;
        }
        for &c in &sets[sb] {
            counts[c][b] -= 1;
            counts[c][a] += 1;
        }
        fold_of[i] = b;
        fold_of[j] = a;
        groups.entry((b, sa)).or_default().push(i);
        groups.entry((a, sb)).or_default().push(j);
    }
}

/// Per-class fold counts and their spread.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratificationReport {
    pub fold_sizes: Vec<usize>,
    /// `counts[class][fold]`.
    pub counts: Vec<Vec<usize>>,
    /// Max minus min fold count, per class.
    pub deltas: Vec<usize>,
    pub max_delta: usize,
}

pub fn verify_stratification(view: &DimensionDataset, fa: &FoldAssignment) -> Result<StratificationReport> {
    let folds = fa.folds_for(view)?;
    let mut counts = vec![vec![0usize; fa.k]; view.n_classes()];
    let mut fold_sizes = vec![0usize; fa.k];
    for (item, &f) in view.items.iter().zip(&folds) {
        if f >= fa.k {
            return Err(Error::OutOfRange { index: f, len: fa.k });
        }
        fold_sizes[f] += 1;
        for &c in &item.labels {
            counts[c][f] += 1;
        }
    }
    let deltas: Vec<usize> = counts
        .iter()
        .map(|row| row.iter().max().unwrap_or(&0) - row.iter().min().unwrap_or(&0))
        .collect();
    let max_delta = deltas.iter().copied().max().unwrap_or(0);
    if max_delta > 1 {
        log::warn!("{}: stratification delta {max_delta} exceeds 1", view.dimension);
    }
    Ok(StratificationReport {
        fold_sizes,
        counts,
        deltas,
        max_delta,
    })
}

/// Restrict an assignment to the ids present in `view` (e.g. a split of the
/// full corpus reused for one dimension).
pub fn restrict(fa: &FoldAssignment, view: &DimensionDataset) -> Result<FoldAssignment> {
    let ids: HashMap<&str, ()> = view.items.iter().map(|i| (i.id.as_str(), ())).collect();
    let assignment: BTreeMap<String, usize> = fa
        .assignment
        .iter()
        .filter(|(id, _)| ids.contains_key(id.as_str()))
        .map(|(id, &f)| (id.clone(), f))
        .collect();
    if assignment.len() != view.len() {
        let missing = view
            .items
            .iter()
            .find(|i| !fa.assignment.contains_key(&i.id))
            .map(|i| i.id.clone())
            .unwrap_or_default();
        return Err(Error::MissingAssignment(missing));
    }
    Ok(FoldAssignment { k: fa.k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dimension, ViewItem};
    use proptest::prelude::*;

    fn view_from(labels: Vec<Vec<usize>>, n_classes: usize) -> DimensionDataset {
        DimensionDataset {
            dimension: Dimension::Subject,
            classes: (0..n_classes).map(|c| format!("c{c}")).collect(),
            items: labels
                .into_iter()
                .enumerate()
                .map(|(i, labels)| ViewItem {
                    id: format!("r{i}"),
                    text: String::new(),
                    labels,
                })
                .collect(),
        }
    }

    #[test]
    fn single_class_even_split() {
        let v = view_from(vec![vec![0]; 10], 1);
        let fa = stratified_kfold(&v, 2, 0).unwrap();
        assert_eq!(fa.fold_sizes(), vec![5, 5]);
    }

    #[test]
    fn rare_class_splits_ten_eleven() {
        let mut labels = vec![vec![1]; 21];
        labels.extend(vec![vec![0]; 300]);
        labels.extend(vec![vec![0, 2]; 40]);
        let v = view_from(labels, 3);
        let fa = stratified_kfold(&v, 2, 5).unwrap();
        let rep = verify_stratification(&v, &fa).unwrap();
        let mut c = rep.counts[1].clone();
        c.sort();
        assert_eq!(c, vec![10, 11]);
    }

    #[test]
    fn odd_class_delta_one() {
        let v = view_from(vec![vec![0]; 3], 1);
        let fa = stratified_kfold(&v, 2, 1).unwrap();
        assert_eq!(verify_stratification(&v, &fa).unwrap().max_delta, 1);
    }

    #[test]
    fn balanced_assignment_has_zero_delta() {
        let v = view_from(vec![vec![0], vec![0], vec![1], vec![1]], 2);
        let fa = FoldAssignment {
            k: 2,
            assignment: [("r0", 0), ("r1", 1), ("r2", 0), ("r3", 1)]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b))
                .collect(),
        };
        assert_eq!(verify_stratification(&v, &fa).unwrap().max_delta, 0);
    }

    #[test]
    fn errors() {
        let v = view_from(vec![vec![0]], 1);
        assert!(matches!(stratified_kfold(&v, 2, 0), Err(Error::TooFewReports { .. })));
        assert!(stratified_kfold(&v, 1, 0).is_err());
        let v2 = view_from(vec![vec![0], vec![0]], 1);
        let fa = FoldAssignment {
            k: 2,
            assignment: [("r0".to_string(), 0)].into_iter().collect(),
        };
        assert!(matches!(verify_stratification(&v2, &fa), Err(Error::MissingAssignment(_))));
    }

    #[test]
    fn seeded_determinism() {
        let labels = (0..200).map(|i| vec![i % 5, (i * 7) % 5]).collect();
        let v = view_from(labels, 5);
        assert_eq!(stratified_kfold(&v, 2, 3).unwrap(), stratified_kfold(&v, 2, 3).unwrap());
    }

    proptest! {
        #[test]
        fn partition_and_balance(
            labels in proptest::collection::vec(proptest::collection::btree_set(0usize..6, 1..3), 2..120),
            k in 2usize..5,
            seed in any::<u64>(),
        ) {
            prop_assume!(labels.len() >= k);
            let v = view_from(labels.into_iter().map(|s| s.into_iter().collect()).collect(), 6);
            let fa = stratified_kfold(&v, k, seed).unwrap();
            prop_assert_eq!(fa.assignment.len(), v.len());
            let sizes = fa.fold_sizes();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn single_label_delta_at_most_one(
            labels in proptest::collection::vec(0usize..5, 2..150),
            seed in any::<u64>(),
        ) {
            let v = view_from(labels.into_iter().map(|c| vec![c]).collect(), 5);
            let fa = stratified_kfold(&v, 2, seed).unwrap();
            prop_assert!(verify_stratification(&v, &fa).unwrap().max_delta <= 1);
        }
    }
}
