//! Multi-label evaluation metrics and the per-label gain/drop study.
//!
//! Thresholded metrics use 0.5 by default. Labels with no positive (or no
//! negative) targets are excluded from mA and mAP averages and reported.

use serde::{Deserialize, Serialize};

use crate::augment::OperatorId;
use crate::error::{Error, Result};

/// Scores and binary targets for N examples over L labels, plus the decision
/// threshold for the thresholded metrics.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    scores: Vec<f64>,
    targets: Vec<u8>,
    n: usize,
    l: usize,
    pub threshold: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

impl PredictionSet {
    pub fn new(scores: Vec<f64>, targets: Vec<u8>, n: usize, l: usize) -> Result<PredictionSet> {
        if scores.len() != n * l || targets.len() != n * l {
            return Err(Error::ShapeMismatch { expected: vec![n, l], got: vec![scores.len()] });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("prediction scores".into()));
        }
        if targets.iter().any(|t| *t > 1) {
            return Err(Error::invalid("targets must be 0/1"));
        }
        Ok(PredictionSet { scores, targets, n, l, threshold: DEFAULT_THRESHOLD })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_labels(&self) -> usize {
        self.l
    }

    fn score(&self, i: usize, lab: usize) -> f64 {
        self.scores[i * self.l + lab]
    }

    fn target(&self, i: usize, lab: usize) -> bool {
        self.targets[i * self.l + lab] == 1
    }

    fn predicted(&self, i: usize, lab: usize) -> bool {
        self.score(i, lab) >= self.threshold
    }
}

/// Per-label balanced accuracy `(TPR + TNR)/2` at the threshold.
///
/// Returns the mean over non-degenerate labels and the per-label values
/// (`None` for labels lacking a positive or a negative target).
pub fn mean_accuracy(preds: &PredictionSet) -> Result<(f64, Vec<Option<f64>>)> {
    let mut per_label = Vec::with_capacity(preds.l);
    let mut sum = 0.0;
    let mut included = 0usize;
    for lab in 0..preds.l {
        let (mut tp, mut fn_, mut tn, mut fp) = (0u32, 0u32, 0u32, 0u32);
        for i in 0..preds.n {
            match (preds.target(i, lab), preds.predicted(i, lab)) {
                (true, true) => tp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
                (false, true) => fp += 1,
            }
        }
        if tp + fn_ == 0 || tn + fp == 0 {
            per_label.push(None);
            continue;
        }
        let tpr = tp as f64 / (tp + fn_) as f64;
        let tnr = tn as f64 / (tn + fp) as f64;
        let ma = 0.5 * (tpr + tnr);
        per_label.push(Some(ma));
        sum += ma;
        included += 1;
    }
    if included == 0 {
        return Err(Error::invalid("all labels degenerate; mean accuracy undefined"));
    }
    Ok((sum / included as f64, per_label))
}

/// Example-based accuracy (Jaccard) and F1, both defined as 1 when an
/// example's true and predicted label sets are both empty.
pub fn example_accu_f1(preds: &PredictionSet) -> (f64, f64) {
    let mut accu = 0.0;
    let mut f1 = 0.0;
    for i in 0..preds.n {
        let (mut inter, mut true_n, mut pred_n) = (0usize, 0usize, 0usize);
        for lab in 0..preds.l {
            let t = preds.target(i, lab);
            let p = preds.predicted(i, lab);
            true_n += t as usize;
            pred_n += p as usize;
            inter += (t && p) as usize;
        }
        let union = true_n + pred_n - inter;
        accu += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
        f1 += if true_n + pred_n == 0 { 1.0 } else { 2.0 * inter as f64 / (true_n + pred_n) as f64 };
    }
    (accu / preds.n as f64, f1 / preds.n as f64)
}

/// mAP (uninterpolated AP averaged over labels with positives), macro F1 over
/// labels (CF1) and micro F1 from pooled counts (OF1).
pub fn map_cf1_of1(preds: &PredictionSet) -> Result<(f64, f64, f64, Vec<Option<f64>>)> {
    let mut ap_per_label = Vec::with_capacity(preds.l);
    let mut ap_sum = 0.0;
    let mut ap_count = 0usize;
    let (mut pooled_tp, mut pooled_fp, mut pooled_fn) = (0u64, 0u64, 0u64);
    let mut cf1_sum = 0.0;

    for lab in 0..preds.l {
        let positives = (0..preds.n).filter(|&i| preds.target(i, lab)).count();
        if positives == 0 {
            ap_per_label.push(None);
        } else {
            // Stable sort by descending score keeps ties in canonical index order.
            let mut order: Vec<usize> = (0..preds.n).collect();
            order.sort_by(|&a, &b| {
                preds.score(b, lab).partial_cmp(&preds.score(a, lab)).expect("finite scores")
            });
            let mut hits = 0usize;
            let mut ap = 0.0;
            for (rank0, &i) in order.iter().enumerate() {
                if preds.target(i, lab) {
                    hits += 1;
                    ap += hits as f64 / (rank0 + 1) as f64;
                }
            }
            let ap = ap / positives as f64;
            ap_per_label.push(Some(ap));
            ap_sum += ap;
            ap_count += 1;
        }

        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for i in 0..preds.n {
            match (preds.target(i, lab), preds.predicted(i, lab)) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        pooled_tp += tp;
        pooled_fp += fp;
        pooled_fn += fn_;
        let denom = 2 * tp + fp + fn_;
        cf1_sum += if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 };
    }

    if ap_count == 0 {
        return Err(Error::invalid("no label has a positive target; mAP undefined"));
    }
    let map = ap_sum / ap_count as f64;
    let cf1 = cf1_sum / preds.l as f64;
    let denom = 2 * pooled_tp + pooled_fp + pooled_fn;
    let of1 = if denom == 0 { 1.0 } else { 2.0 * pooled_tp as f64 / denom as f64 };
    Ok((map, cf1, of1, ap_per_label))
}

/// Full metric block emitted in run reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "mA")]
    pub ma: f64,
    #[serde(rename = "Accu")]
    pub accu: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "CF1")]
    pub cf1: f64,
    #[serde(rename = "OF1")]
    pub of1: f64,
    pub per_label: Vec<PerLabelMetrics>,
    pub excluded_labels: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerLabelMetrics {
    pub name: String,
    #[serde(rename = "mA")]
    pub ma: Option<f64>,
    pub ap: Option<f64>,
}

pub fn compute_all(preds: &PredictionSet, label_names: &[String]) -> Result<MetricReport> {
    if label_names.len() != preds.l {
        return Err(Error::invalid("label name count does not match predictions"));
    }
    let (ma, ma_per) = mean_accuracy(preds)?;
    let (accu, f1) = example_accu_f1(preds);
    let (map, cf1, of1, ap_per) = map_cf1_of1(preds)?;
    let per_label: Vec<PerLabelMetrics> = label_names
        .iter()
        .zip(ma_per.iter().zip(&ap_per))
        .map(|(name, (ma, ap))| PerLabelMetrics { name: name.clone(), ma: *ma, ap: *ap })
        .collect();
    let excluded_labels = per_label
        .iter()
        .filter(|p| p.ma.is_none() || p.ap.is_none())
        .map(|p| p.name.clone())
        .collect();
    Ok(MetricReport { ma, accu, f1, map, cf1, of1, per_label, excluded_labels })
}

/// Study verdict per the gain/drop threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyVerdict {
    #[serde(rename = "P")]
    Positive,
    #[serde(rename = "N")]
    Negative,
    #[serde(rename = "-")]
    Neutral,
}

impl std::fmt::Display for StudyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StudyVerdict::Positive => "P",
            StudyVerdict::Negative => "N",
            StudyVerdict::Neutral => "-",
        };
        write!(f, "{s}")
    }
}

/// Default gain/drop threshold: 0.5 mA points.
pub const DEFAULT_STUDY_DELTA: f64 = 0.005;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyRow {
    pub operator: OperatorId,
    pub label: String,
    pub delta: f64,
    pub verdict: StudyVerdict,
}

/// Per-(operator, label) mA deltas against a shared baseline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelStudyTable {
    pub delta_threshold: f64,
    pub rows: Vec<StudyRow>,
}

impl LabelStudyTable {
    pub fn verdict_of(&self, op: OperatorId, label: &str) -> Option<StudyVerdict> {
        self.rows.iter().find(|r| r.operator == op && r.label == label).map(|r| r.verdict)
    }
}

/// Builds the study table from a baseline prediction set and one prediction
/// set per operator, all on the same test set.
pub fn label_study(
    base: &PredictionSet,
    per_op: &[(OperatorId, PredictionSet)],
    delta_threshold: f64,
    label_names: &[String],
) -> Result<LabelStudyTable> {
    let (_, base_ma) = mean_accuracy(base)?;
    let mut rows = Vec::new();
    for (op, preds) in per_op {
        if preds.n != base.n || preds.l != base.l {
            return Err(Error::invalid("study prediction sets are on different test sets"));
        }
        if preds.targets != base.targets {
            return Err(Error::invalid("study prediction sets disagree on targets"));
        }
        let (_, op_ma) = mean_accuracy(preds)?;
        for (lab, name) in label_names.iter().enumerate() {
            let (Some(b), Some(o)) = (base_ma[lab], op_ma[lab]) else {
                continue;
            };
            let delta = o - b;
            let verdict = if delta > delta_threshold {
                StudyVerdict::Positive
            } else if delta < -delta_threshold {
                StudyVerdict::Negative
            } else {
                StudyVerdict::Neutral
            };
            rows.push(StudyRow { operator: *op, label: name.clone(), delta, verdict });
        }
    }
    Ok(LabelStudyTable { delta_threshold, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preds(scores: Vec<f64>, targets: Vec<u8>, n: usize, l: usize) -> PredictionSet {
        PredictionSet::new(scores, targets, n, l).unwrap()
    }

    #[test]
    fn perfect_predictions_give_ma_one() {
        let p = preds(vec![0.9, 0.1, 0.1, 0.9], vec![1, 0, 0, 1], 2, 2);
        let (ma, _) = mean_accuracy(&p).unwrap();
        assert_eq!(ma, 1.0);
    }

    #[test]
    fn balanced_confusion_gives_half() {
        // One label: TP=1, FN=1, TN=1, FP=1 -> mA = 0.5
        let p = preds(vec![0.9, 0.1, 0.9, 0.1], vec![1, 1, 0, 0], 4, 1);
        let (ma, per) = mean_accuracy(&p).unwrap();
        assert_eq!(ma, 0.5);
        assert_eq!(per, vec![Some(0.5)]);
    }

    #[test]
    fn degenerate_labels_excluded_and_all_degenerate_errors() {
        let p = preds(vec![0.9, 0.2, 0.8, 0.3], vec![1, 0, 1, 0], 2, 2);
        // label 0 has no negative, label 1 has no positive: both excluded.
        assert!(mean_accuracy(&p).is_err());
        let p2 = preds(
            vec![0.9, 0.2, 0.1, 0.3, 0.2, 0.8],
            vec![1, 0, 0, 0, 1, 1],
            3,
            2,
        );
        let (_, per) = mean_accuracy(&p2).unwrap();
        assert!(per[0].is_some());
        assert!(per[1].is_some());
    }

    #[test]
    fn random_scores_on_balanced_targets_stay_near_half() {
        use rand::Rng;
        let n = 10_000;
        let mut rng = crate::seeds::stream(1234, &[]);
        let mut scores = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for i in 0..n {
            scores.push(rng.gen::<f64>());
            targets.push((i % 2) as u8);
        }
        let p = preds(scores, targets, n, 1);
        let (ma, _) = mean_accuracy(&p).unwrap();
        assert!((ma - 0.5).abs() < 0.02, "mA {ma}");
    }

    #[test]
    fn example_based_fixtures() {
        // Exact match.
        let p = preds(vec![0.9, 0.1, 0.1, 0.9], vec![1, 0, 0, 1], 2, 2);
        let (accu, f1) = example_accu_f1(&p);
        assert_eq!((accu, f1), (1.0, 1.0));

        // Y={a,b}, Yhat={b,c}: accu 1/3, F1 1/2.
        let p = preds(vec![0.9, 0.9, 0.1], vec![0, 1, 1], 1, 3);
        // predicted {a,b}, true {b,c}
        let (accu, f1) = example_accu_f1(&p);
        assert!((accu - 1.0 / 3.0).abs() < 1e-12);
        assert!((f1 - 0.5).abs() < 1e-12);

        // Disjoint sets: both zero.
        let p = preds(vec![0.9, 0.1], vec![0, 1], 1, 2);
        let (accu, f1) = example_accu_f1(&p);
        assert_eq!((accu, f1), (0.0, 0.0));

        // Both empty: both one.
        let p = preds(vec![0.1, 0.1], vec![0, 0], 1, 2);
        let (accu, f1) = example_accu_f1(&p);
        assert_eq!((accu, f1), (1.0, 1.0));
    }

    #[test]
    fn ap_fixture_five_sixths() {
        // scores [0.9, 0.8, 0.7], targets [1, 0, 1]: AP = (1/1 + 2/3)/2 = 5/6.
        let p = preds(vec![0.9, 0.8, 0.7], vec![1, 0, 1], 3, 1);
        let (map, _, _, _) = map_cf1_of1(&p).unwrap();
        assert!((map - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_ranking_gives_map_one() {
        let p = preds(vec![0.9, 0.8, 0.2, 0.1], vec![1, 1, 0, 0], 4, 1);
        let (map, _, _, _) = map_cf1_of1(&p).unwrap();
        assert_eq!(map, 1.0);
    }

    #[test]
    fn cf1_equals_of1_under_identical_confusions() {
        // Two labels with identical counts: macro == micro.
        let p = preds(
            vec![0.9, 0.9, 0.1, 0.1, 0.9, 0.9, 0.1, 0.1],
            vec![1, 1, 1, 1, 0, 0, 0, 0],
            4,
            2,
        );
        let (_, cf1, of1, _) = map_cf1_of1(&p).unwrap();
        assert!((cf1 - of1).abs() < 1e-12);
    }

    #[test]
    fn map_invariant_under_monotone_transform_and_permutation() {
        let scores = vec![0.9, 0.8, 0.7, 0.3, 0.5, 0.1];
        let targets = vec![1u8, 0, 1, 0, 1, 0];
        let p = preds(scores.clone(), targets.clone(), 6, 1);
        let (map1, _, _, _) = map_cf1_of1(&p).unwrap();

        let warped: Vec<f64> = scores.iter().map(|s| (s * 3.0).tanh()).collect();
        let p2 = preds(warped, targets.clone(), 6, 1);
        let (map2, _, _, _) = map_cf1_of1(&p2).unwrap();
        assert!((map1 - map2).abs() < 1e-12);

        let perm = [3usize, 0, 5, 1, 4, 2];
        let p3 = preds(
            perm.iter().map(|&i| scores[i]).collect(),
            perm.iter().map(|&i| targets[i]).collect(),
            6,
            1,
        );
        let (map3, _, _, _) = map_cf1_of1(&p3).unwrap();
        assert!((map1 - map3).abs() < 1e-12);
    }

    #[test]
    fn study_verdicts() {
        let names = vec!["a".to_string()];
        let base = preds(vec![0.9, 0.1, 0.9, 0.1], vec![1, 1, 0, 0], 4, 1);
        let same = base.clone();
        let better = preds(vec![0.9, 0.9, 0.1, 0.1], vec![1, 1, 0, 0], 4, 1);
        let worse = preds(vec![0.1, 0.1, 0.9, 0.9], vec![1, 1, 0, 0], 4, 1);
        let table = label_study(
            &base,
            &[
                (OperatorId::Rotate, same),
                (OperatorId::Invert, better),
                (OperatorId::Solarize, worse),
            ],
            DEFAULT_STUDY_DELTA,
            &names,
        )
        .unwrap();
        assert_eq!(table.verdict_of(OperatorId::Rotate, "a"), Some(StudyVerdict::Neutral));
        assert_eq!(table.verdict_of(OperatorId::Invert, "a"), Some(StudyVerdict::Positive));
        assert_eq!(table.verdict_of(OperatorId::Solarize, "a"), Some(StudyVerdict::Negative));
    }

    #[test]
    fn study_rejects_mismatched_sets() {
        let names = vec!["a".to_string()];
        let base = preds(vec![0.9, 0.1], vec![1, 0], 2, 1);
        let other = preds(vec![0.9, 0.1], vec![0, 1], 2, 1);
        assert!(label_study(&base, &[(OperatorId::Rotate, other)], 0.005, &names).is_err());
    }
}
