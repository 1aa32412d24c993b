use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Area under the ROC curve as the Mann-Whitney statistic with average
/// ranks for ties: `(Σ ranks⁺ − n⁺(n⁺+1)/2) / (n⁺·n⁻)`.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auroc", &[scores.len()], &[labels.len()]));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite { op: "auroc" });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(format!(
            "AUROC needs both classes, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Ranks are 1-based; a tie group spanning positions lo..hi shares (lo+hi+1)/2 + 1/2.
    let mut rank_sum = 0.0;
    let mut lo = 0;
    while lo < order.len() {
        let mut hi = lo + 1;
        while hi < order.len() && scores[order[hi]] == scores[order[lo]] {
            hi += 1;
        }
        let avg_rank = (lo + 1 + hi) as f64 / 2.0;
        let positives = order[lo..hi].iter().filter(|&&k| labels[k]).count();
        rank_sum += avg_rank * positives as f64;
        lo = hi;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when only one class is present.
    pub auroc: Option<f64>,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Metrics {
    /// `name<TAB>value` lines, names prefixed with `prefix`.
    pub fn to_text(&self, prefix: &str) -> String {
        let auroc = self.auroc.map_or("NA".to_string(), |a| format!("{a:.6}"));
        format!(
            "{prefix}precision\t{:.6}\n{prefix}recall\t{:.6}\n{prefix}f1\t{:.6}\n{prefix}auroc\t{auroc}\n\
             {prefix}threshold\t{}\n{prefix}tp\t{}\n{prefix}fp\t{}\n{prefix}tn\t{}\n{prefix}fn\t{}\n",
            self.precision, self.recall, self.f1, self.threshold, self.tp, self.fp, self.tn, self.fn_
        )
    }
}

/// Confusion counts at `threshold` (a pair is predicted positive when its
/// score exceeds the threshold) plus AUROC.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    if scores.len() != labels.len() {
        return Err(Error::shape("evaluate", &[scores.len()], &[labels.len()]));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Parameter(format!("score {bad} outside [0, 1]")));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let auroc = match auroc(scores, labels) {
        Ok(a) => Some(a),
        Err(Error::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        auroc,
        threshold,
        tp,
        fp,
        tn,
        fn_,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn auroc_examples() {
        assert_eq!(
            auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(),
            1.0
        );
        assert_eq!(
            auroc(&[0.5; 6], &[true, false, true, false, false, true]).unwrap(),
            0.5
        );
        assert_eq!(auroc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
        assert!(matches!(
            auroc(&[0.3, 0.4], &[true, true]),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn confusion_closed_form() {
        // TP=2, FP=1, FN=1, TN=1.
        let scores = [0.9, 0.8, 0.7, 0.2, 0.1];
        let labels = [true, true, false, true, false];
        let m = evaluate(&scores, &labels, 0.5).unwrap();
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 1, 1));
        assert_abs_diff_eq!(m.precision, 2.0 / 3.0);
        assert_abs_diff_eq!(m.recall, 2.0 / 3.0);
        assert_abs_diff_eq!(m.f1, 2.0 / 3.0);
    }

    #[test]
    fn perfect_separation() {
        let m = evaluate(&[0.9, 0.95, 0.2, 0.1], &[true, true, false, false], 0.5).unwrap();
        assert_eq!(
            (m.precision, m.recall, m.f1, m.auroc),
            (1.0, 1.0, 1.0, Some(1.0))
        );
    }

    #[test]
    fn degenerate_cases() {
        let m = evaluate(&[0.1, 0.2], &[true, true], 0.5).unwrap();
        assert_eq!(
            (m.precision, m.recall, m.f1, m.auroc),
            (0.0, 0.0, 0.0, None)
        );
        assert!(evaluate(&[1.5], &[true], 0.5).is_err());
        assert!(evaluate(&[0.5], &[true, false], 0.5).is_err());
        // Scores at the threshold count as negative.
        assert_eq!(evaluate(&[0.5, 0.5], &[true, false], 0.5).unwrap().tn, 1);
    }
}
