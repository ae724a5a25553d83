use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// One threshold of a precision-recall sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint<S> {
    /// Items with score >= threshold are predicted positive.
    pub threshold: S,
    pub recall: S,
    pub precision: S,
}

/// Points at every distinct score, highest threshold first. Recall is
/// non-decreasing along the list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve<S> {
    pub points: Vec<PrPoint<S>>,
}

/// (threshold, true positives, predicted positives), cumulative.
type Group<S> = (S, usize, usize);

/// One [`Group`] per distinct score in descending order, plus the positive
/// count.
fn sweep<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<(Vec<Group<S>>, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut groups = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // Equal scores form one group and enter at the same threshold.
        while i < order.len() && scores[order[i]] == s {
            tp += labels[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        groups.push((s, tp, seen));
    }
    Ok((groups, n_pos))
}

pub fn pr_curve<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<PrCurve<S>> {
    let (groups, n_pos) = sweep(scores, labels)?;
    let n_pos = S::from_count(n_pos);
    Ok(PrCurve {
        points: groups
            .into_iter()
            .map(|(threshold, tp, seen)| PrPoint {
                threshold,
                recall: S::from_count(tp) / n_pos,
                precision: S::from_count(tp) / S::from_count(seen),
            })
            .collect(),
    })
}

/// Step-integrated area under the PR curve: the mean, over positives, of the
/// precision at the threshold where each positive enters. Tied items share
/// a threshold, so their order never matters.
pub fn average_precision<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<S> {
    let (groups, n_pos) = sweep(scores, labels)?;
    let mut prev_tp = 0usize;
    let mut sum = S::zero();
    for (_, tp, seen) in groups {
        let new_pos = tp - prev_tp;
        if new_pos > 0 {
            sum = sum + S::from_count(new_pos) * S::from_count(tp) / S::from_count(seen);
        }
        prev_tp = tp;
    }
    Ok(sum / S::from_count(n_pos))
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f_score<S: Scalar>(precision: S, recall: S) -> S {
    let denom = precision + recall;
    if denom == S::zero() {
        return S::zero();
    }
    S::from_count(2) * precision * recall / denom
}

/// Threshold (among the distinct scores) maximizing F, ties to the lowest
/// threshold.
pub fn best_f_over_thresholds<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<(S, S)> {
    let curve = pr_curve(scores, labels)?;
    let mut best: Option<(S, S)> = None;
    for p in curve.points {
        let f = f_score(p.precision, p.recall);
        // Points run high to low threshold, so >= prefers the lower one.
        if best.is_none_or(|(_, bf)| f >= bf) {
            best = Some((p.threshold, f));
        }
    }
    Ok(best.expect("curve has at least one point"))
}

/// Mean and sample standard deviation (n - 1 denominator).
pub fn aggregate_folds<T: Real>(values: &[T]) -> Result<(T, T)> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            required: 2,
            actual: values.len(),
        });
    }
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    if let [a, b] = values {
        // Two folds: the deviation reduces to |a - b| / sqrt(2).
        return Ok((mean, (*a - *b).abs() / T::from_count(2).sqrt()));
    }
    let ss = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>();
    Ok((mean, (ss / (n - T::one())).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    const S4: [f64; 4] = [0.9, 0.8, 0.7, 0.6];
    const L4: [bool; 4] = [true, false, true, false];

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn curve_examples() {
        let c = pr_curve(&[0.9, 0.1], &[true, false]).unwrap();
        assert!(c.points.iter().any(|p| p.recall == 1.0 && p.precision == 1.0));
        let c = pr_curve(&[0.1, 0.9], &[true, false]).unwrap();
        let last = c.points.last().unwrap();
        assert_eq!((last.recall, last.precision), (1.0, 0.5));

        let scores: Vec<Rational> = [9, 8, 7, 6].iter().map(|&s| r(s, 10)).collect();
        let c = pr_curve(&scores, &L4).unwrap();
        let pts: Vec<_> = c.points.iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(
            pts,
            vec![(r(1, 2), r(1, 1)), (r(1, 2), r(1, 2)), (r(1, 1), r(2, 3)), (r(1, 1), r(1, 2))]
        );
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.9, 0.1], &[false, true]).unwrap(), 0.5);
        assert_eq!(average_precision(&[0.9, 0.8, 0.7, 0.1], &[false, false, false, true]).unwrap(), 0.25);
        let scores: Vec<Rational> = [9, 8, 7, 6].iter().map(|&s| r(s, 10)).collect();
        assert_eq!(average_precision(&scores, &L4).unwrap(), r(5, 6));
        assert!((average_precision(&S4, &L4).unwrap() - 0.833333).abs() < 1e-6);
    }

    #[test]
    fn constant_scores_give_prevalence() {
        let labels = [true, false, false, true, false];
        assert_eq!(average_precision(&[Rational::from_integer(1); 5], &labels).unwrap(), r(2, 5));
    }

    #[test]
    fn errors() {
        assert!(matches!(average_precision(&[0.1, 0.2], &[false, false]), Err(Error::NoPositives)));
        assert!(pr_curve(&[0.1], &[true, false]).is_err());
        assert!(best_f_over_thresholds(&[0.1], &[false]).is_err());
        assert!(aggregate_folds(&[0.4]).is_err());
    }

    #[test]
    fn f_examples() {
        assert_eq!(f_score(1.0, 1.0), 1.0);
        assert_eq!(f_score(r(1, 2), r(1, 1)), r(2, 3));
        assert_eq!(f_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn best_f_examples() {
        let (t, f) = best_f_over_thresholds(&S4, &L4).unwrap();
        assert_eq!(t, 0.7);
        assert!((f - 0.8).abs() < 1e-12);
        let (_, f) = best_f_over_thresholds(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(f, 1.0);
        let (t, f) = best_f_over_thresholds(&[0.3, 0.2, 0.9], &[true, true, true]).unwrap();
        assert_eq!((t, f), (0.2, 1.0));
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_folds(&[0.4, 0.4]).unwrap(), (0.4, 0.0));
        let (m, s): (f64, f64) = aggregate_folds(&[0.3, 0.5]).unwrap();
        assert!((m - 0.4).abs() < 1e-15);
        assert!((s - 0.141421).abs() < 1e-6);
        let (m, s) = aggregate_folds(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m, s), (2.0, 1.0));
    }

    proptest! {
        #[test]
        fn ap_invariant_under_monotone_map(
            data in proptest::collection::vec((0u8..20, any::<bool>()), 1..30)
        ) {
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&y| y));
            let s: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let t: Vec<f64> = s.iter().map(|v| (v * 0.3).exp() * 2.0 + 1.0).collect();
            prop_assert_eq!(average_precision(&s, &labels).unwrap(), average_precision(&t, &labels).unwrap());
        }

        #[test]
        fn best_f_dominates_fixed_thresholds(
            data in proptest::collection::vec((0u8..10, any::<bool>()), 1..30),
            thr in 0u8..11,
        ) {
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&y| y));
            let s: Vec<Rational> = data.iter().map(|d| Rational::from_integer(d.0 as i64)).collect();
            let thr = Rational::from_integer(thr as i64);
            let tp = s.iter().zip(&labels).filter(|(v, &y)| **v >= thr && y).count();
            let pp = s.iter().filter(|v| **v >= thr).count();
            let npos = labels.iter().filter(|&&y| y).count();
            let fixed = if pp == 0 { Rational::from_integer(0) } else {
                f_score(Rational::new(tp as i64, pp as i64), Rational::new(tp as i64, npos as i64))
            };
            prop_assert!(best_f_over_thresholds(&s, &labels).unwrap().1 >= fixed);
        }

        #[test]
        fn aggregate_mean_permutation_invariant(mut v in proptest::collection::vec(0.0f64..1.0, 2..8)) {
            let (m1, _) = aggregate_folds(&v).unwrap();
            v.reverse();
            let (m2, _) = aggregate_folds(&v).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-12);
        }
    }
}
