//! Classification metrics: confusion matrix, per-class and aggregate
//! precision/recall/F1, and one-vs-rest ROC AUC via the rank statistic.

use serde::Serialize;

use super::MetricsError;
use crate::backends::ClassDistribution;
use crate::dataset::LabelSet;

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub labels: LabelSet,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Ground-truth sample count for one class.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

pub fn confusion_matrix(
    truth: &[usize],
    pred: &[usize],
    labels: &LabelSet,
) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    let n = labels.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (&t, &p) in truth.iter().zip(pred) {
        if t >= n {
            return Err(MetricsError::UnknownLabel(t));
        }
        if p >= n {
            return Err(MetricsError::UnknownLabel(p));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { labels: labels.clone(), counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// True when a zero denominator forced a value to 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub labels: Vec<String>,
    pub per_class: Vec<PerClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Support-weighted one-vs-rest ROC AUC; present only when scores were supplied.
    pub roc_auc_weighted: Option<f64>,
    pub roc_auc_macro: Option<f64>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Per-class and aggregate P/R/F1 from a confusion matrix, with ROC AUC when
/// per-sample score distributions are supplied alongside their truth labels.
pub fn classification_report(
    cm: &ConfusionMatrix,
    scores: Option<(&[ClassDistribution], &[usize])>,
) -> Result<ClassificationReport, MetricsError> {
    let n = cm.labels.len();
    let mut per_class = Vec::with_capacity(n);
    for c in 0..n {
        let tp = cm.get(c, c);
        let fp: u64 = (0..n).filter(|&t| t != c).map(|t| cm.get(t, c)).sum();
        let fn_: u64 = (0..n).filter(|&p| p != c).map(|p| cm.get(c, p)).sum();
        let (precision, p_undef) = ratio(tp, tp + fp);
        let (recall, r_undef) = ratio(tp, tp + fn_);
        let (f1, f_undef) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        per_class.push(PerClassMetrics {
            precision,
            recall,
            f1,
            support: cm.support(c),
            undefined: p_undef || r_undef || f_undef,
        });
    }

    let total = cm.total() as f64;
    let macro_mean = |f: fn(&PerClassMetrics) -> f64, pc: &[PerClassMetrics]| {
        pc.iter().map(f).sum::<f64>() / n as f64
    };
    let weighted_mean = |f: fn(&PerClassMetrics) -> f64, pc: &[PerClassMetrics]| {
        pc.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total
    };

    let (roc_auc_weighted, roc_auc_macro) = match scores {
        Some((dists, truth)) => {
            for d in dists {
                let sum: f64 = d.probs.iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(MetricsError::InvalidDistribution(sum));
                }
            }
            (
                Some(roc_auc_ovr(dists, truth, AucWeighting::Weighted)?),
                Some(roc_auc_ovr(dists, truth, AucWeighting::Macro)?),
            )
        }
        None => (None, None),
    };

    Ok(ClassificationReport {
        labels: cm.labels.names().to_vec(),
        accuracy: cm.accuracy(),
        macro_precision: macro_mean(|m| m.precision, &per_class),
        macro_recall: macro_mean(|m| m.recall, &per_class),
        macro_f1: macro_mean(|m| m.f1, &per_class),
        weighted_precision: weighted_mean(|m| m.precision, &per_class),
        weighted_recall: weighted_mean(|m| m.recall, &per_class),
        weighted_f1: weighted_mean(|m| m.f1, &per_class),
        per_class,
        roc_auc_weighted,
        roc_auc_macro,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AucWeighting {
    Macro,
    /// Per-class AUC weighted by class support.
    Weighted,
}

/// One-vs-rest ROC AUC via the rank statistic: the probability that a random
/// positive outscores a random negative, ties counting one half. Classes with
/// zero positives or zero negatives are excluded from the aggregate.
pub fn roc_auc_ovr(
    scores: &[ClassDistribution],
    truth: &[usize],
    weighting: AucWeighting,
) -> Result<f64, MetricsError> {
    if scores.len() != truth.len() || scores.is_empty() {
        return Err(MetricsError::LengthMismatch { truth: truth.len(), pred: scores.len() });
    }
    let n_classes = scores[0].labels.len();
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for c in 0..n_classes {
        let support = truth.iter().filter(|&&t| t == c).count();
        if support == 0 || support == truth.len() {
            continue; // degenerate class, no ranking defined
        }
        let auc = binary_auc(
            scores.iter().map(|d| d.probs[c]),
            truth.iter().map(|&t| t == c),
        );
        let w = match weighting {
            AucWeighting::Macro => 1.0,
            AucWeighting::Weighted => support as f64,
        };
        total += auc * w;
        weight_sum += w;
    }
    if weight_sum == 0.0 {
        return Err(MetricsError::DegenerateClass(0));
    }
    Ok(total / weight_sum)
}

/// AUC from the rank-sum of positive scores: sort ascending, average tied
/// ranks, then `(rank_sum_pos - n_pos(n_pos+1)/2) / (n_pos * n_neg)`.
fn binary_auc(scores: impl Iterator<Item = f64>, positive: impl Iterator<Item = bool>) -> f64 {
    let mut samples: Vec<(f64, bool)> = scores.zip(positive).collect();
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let n = samples.len();
    let n_pos = samples.iter().filter(|(_, p)| *p).count();
    let n_neg = n - n_pos;

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && samples[j].0 == samples[i].0 {
            j += 1;
        }
        // ranks are 1-based; tied block shares the average rank
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for s in &samples[i..j] {
            if s.1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let np = n_pos as f64;
    (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::species_labels;

    fn abc_labels() -> LabelSet {
        LabelSet::new(vec!["A".into(), "B".into(), "C".into()])
    }

    fn dist(labels: &LabelSet, probs: Vec<f64>) -> ClassDistribution {
        ClassDistribution { labels: labels.clone(), probs }
    }

    #[test]
    fn perfect_prediction_gives_diagonal() {
        let labels = abc_labels();
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], &labels).unwrap();
        for t in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.get(t, p), u64::from(t == p));
            }
        }
        assert_eq!(cm.accuracy(), 1.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let labels = abc_labels();
        let err = confusion_matrix(&[0], &[0, 1], &labels);
        assert_eq!(err.unwrap_err(), MetricsError::LengthMismatch { truth: 1, pred: 2 });
    }

    #[test]
    fn unknown_label_is_rejected() {
        let labels = abc_labels();
        assert_eq!(
            confusion_matrix(&[0, 5], &[0, 1], &labels).unwrap_err(),
            MetricsError::UnknownLabel(5)
        );
    }

    /// The published confusion-matrix scenario: Blood Orange, Navel and
    /// Bergamot all correct, 2 Tangelo->Tangerine and 1 Tangerine->Tangelo.
    #[test]
    fn species_misclassification_scenario() {
        let labels = species_labels();
        let tangerine = labels.index_of("Tangerine").unwrap();
        let tangelo = labels.index_of("Tangelo").unwrap();
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for c in 0..labels.len() {
            for _ in 0..10 {
                truth.push(c);
                pred.push(c);
            }
        }
        truth.extend([tangelo, tangelo, tangerine]);
        pred.extend([tangerine, tangerine, tangelo]);

        let cm = confusion_matrix(&truth, &pred, &labels).unwrap();
        for t in 0..labels.len() {
            for p in 0..labels.len() {
                if t == p {
                    continue;
                }
                let expected = match (t, p) {
                    _ if (t, p) == (tangelo, tangerine) => 2,
                    _ if (t, p) == (tangerine, tangelo) => 1,
                    _ => 0,
                };
                assert_eq!(cm.get(t, p), expected, "cell ({t},{p})");
            }
        }
    }

    #[test]
    fn report_on_perfect_matrix_is_all_ones() {
        let labels = abc_labels();
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], &labels).unwrap();
        let report = classification_report(&cm, None).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.weighted_f1, 1.0);
        assert!(report.per_class.iter().all(|m| m.precision == 1.0 && m.recall == 1.0));
    }

    /// Two-class matrix [[3,1],[2,4]] checked against direct TP/FP/FN counts.
    #[test]
    fn two_class_report_matches_count_oracle() {
        let labels = LabelSet::new(vec!["neg".into(), "pos".into()]);
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (t, p, count) in [(0, 0, 3), (0, 1, 1), (1, 0, 2), (1, 1, 4)] {
            for _ in 0..count {
                truth.push(t);
                pred.push(p);
            }
        }
        let cm = confusion_matrix(&truth, &pred, &labels).unwrap();
        let report = classification_report(&cm, None).unwrap();
        let c0 = report.per_class[0];
        let c1 = report.per_class[1];
        assert!((c0.precision - 3.0 / 5.0).abs() < 1e-12);
        assert!((c0.recall - 3.0 / 4.0).abs() < 1e-12);
        assert!((c1.precision - 4.0 / 5.0).abs() < 1e-12);
        assert!((c1.recall - 4.0 / 6.0).abs() < 1e-12);
        assert!((report.accuracy - 7.0 / 10.0).abs() < 1e-12);
        let macro_p = (c0.precision + c1.precision) / 2.0;
        assert!((report.macro_precision - macro_p).abs() < 1e-12);
        let weighted_r = (c0.recall * 4.0 + c1.recall * 6.0) / 10.0;
        assert!((report.weighted_recall - weighted_r).abs() < 1e-12);
    }

    #[test]
    fn zero_support_class_is_flagged() {
        let labels = abc_labels();
        // class 2 never appears in truth or predictions
        let cm = confusion_matrix(&[0, 1], &[0, 1], &labels).unwrap();
        let report = classification_report(&cm, None).unwrap();
        assert_eq!(report.per_class[2].recall, 0.0);
        assert!(report.per_class[2].undefined);
    }

    #[test]
    fn auc_perfectly_separated_is_one() {
        let labels = LabelSet::new(vec!["a".into(), "b".into()]);
        let scores = vec![
            dist(&labels, vec![0.9, 0.1]),
            dist(&labels, vec![0.8, 0.2]),
            dist(&labels, vec![0.2, 0.8]),
            dist(&labels, vec![0.1, 0.9]),
        ];
        let truth = [0, 0, 1, 1];
        assert_eq!(roc_auc_ovr(&scores, &truth, AucWeighting::Macro).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let labels = LabelSet::new(vec!["a".into(), "b".into()]);
        let scores = vec![dist(&labels, vec![0.5, 0.5]); 6];
        let truth = [0, 1, 0, 1, 0, 1];
        assert_eq!(roc_auc_ovr(&scores, &truth, AucWeighting::Weighted).unwrap(), 0.5);
    }

    /// Mann-Whitney pair-counting oracle: enumerate every positive/negative
    /// pair, count wins plus half-ties.
    pub(crate) fn auc_pair_oracle(scores: &[f64], positive: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, (&s_pos, &is_pos)) in scores.iter().zip(positive).enumerate() {
            if !is_pos {
                continue;
            }
            for (j, (&s_neg, &is_neg_pos)) in scores.iter().zip(positive).enumerate() {
                if i == j || is_neg_pos {
                    continue;
                }
                pairs += 1.0;
                if s_pos > s_neg {
                    wins += 1.0;
                } else if s_pos == s_neg {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_matches_pair_counting_oracle() {
        // deterministic pseudo-random 3-class instance, 12 samples
        let labels = abc_labels();
        let mut state = 0x1234_5678_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f64 / (1u64 << 31) as f64
        };
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for i in 0..12 {
            let raw: Vec<f64> = (0..3).map(|_| next() + 0.05).collect();
            let sum: f64 = raw.iter().sum();
            scores.push(dist(&labels, raw.iter().map(|r| r / sum).collect()));
            truth.push(i % 3);
        }
        for c in 0..3 {
            let per_class: Vec<f64> = scores.iter().map(|d| d.probs[c]).collect();
            let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let expected = auc_pair_oracle(&per_class, &positive);
            let got = binary_auc(per_class.into_iter(), positive.into_iter());
            assert!((got - expected).abs() < 1e-12, "class {c}: {got} vs {expected}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.65, 0.2];
        let positive = [false, true, false, true, true, false];
        let base = binary_auc(scores.iter().copied(), positive.iter().copied());
        let squashed = binary_auc(scores.iter().map(|s| (s * 3.0).tanh()), positive.iter().copied());
        assert!((base - squashed).abs() < 1e-12);
    }
}
