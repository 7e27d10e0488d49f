//! One-vs-rest classification metrics: per-class accuracy, precision,
//! sensitivity, specificity, and rank-based AUC, with macro averages over
//! the classes for which the metric is defined.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ClassMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub acc: f64,
    pub pre: f64,
    pub sen: f64,
    pub spe: f64,
    pub auc: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_acc: f64,
    pub macro_pre: f64,
    pub macro_sen: f64,
    pub macro_spe: f64,
    pub macro_auc: f64,
    pub warnings: Vec<String>,
}

impl MetricsReport {
    /// Rows (metric name, per-class values, macro value) in display order.
    pub fn rows(&self) -> Vec<(&'static str, Vec<f64>, f64)> {
        let col = |f: fn(&ClassMetrics) -> f64| self.per_class.iter().map(f).collect::<Vec<_>>();
        vec![
            ("ACC", col(|c| c.acc), self.macro_acc),
            ("PRE", col(|c| c.pre), self.macro_pre),
            ("SEN", col(|c| c.sen), self.macro_sen),
            ("SPE", col(|c| c.spe), self.macro_spe),
            ("AUC", col(|c| c.auc), self.macro_auc),
        ]
    }
}

/// Mean over the defined (non-NaN) entries; NaN when none are.
pub fn nan_mean(values: &[f64]) -> f64 {
    let defined: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if defined.is_empty() {
        f64::NAN
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

/// AUC of `scores` for the positive indicator `positive`, by the rank-sum
/// (Mann-Whitney) formulation; tied scores contribute half. NaN when either
/// group is empty.
pub fn auc_rank(scores: &[f64], positive: &[bool]) -> f64 {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // Midranks over tie groups.
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = positive
        .iter()
        .zip(&ranks)
        .filter(|(&p, _)| p)
        .map(|(_, &r)| r)
        .sum();
    (rank_sum - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// Compute the full report from per-sample class scores.
///
/// Hard metrics come from argmax predictions (ties to the lowest class
/// index); AUC from the per-class score column. A class absent from the
/// labels has undefined SEN and AUC, reported as NaN, excluded from the
/// macro averages, and flagged in `warnings`; an empty denominator does the
/// same for PRE.
pub fn metrics_from_scores(
    labels: &[usize],
    scores: &[Vec<f64>],
    class_names: &[String],
) -> Result<MetricsReport> {
    let c = class_names.len();
    if labels.len() != scores.len() || labels.is_empty() {
        return Err(Error::InvalidConfig(
            "labels and score rows must align and be non-empty".into(),
        ));
    }
    for &l in labels {
        if l >= c {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: c,
            });
        }
    }
    let predictions: Vec<usize> = scores
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    let n = labels.len();
    let mut per_class = Vec::with_capacity(c);
    let mut warnings = Vec::new();
    for class in 0..c {
        let mut tp = 0;
        let mut fp = 0;
        let mut tn = 0;
        let mut fn_ = 0;
        for (&y, &p) in labels.iter().zip(&predictions) {
            match (y == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (false, false) => tn += 1,
                (true, false) => fn_ += 1,
            }
        }
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                f64::NAN
            } else {
                num as f64 / den as f64
            }
        };
        let col: Vec<f64> = scores.iter().map(|row| row[class]).collect();
        let positive: Vec<bool> = labels.iter().map(|&y| y == class).collect();
        let metrics = ClassMetrics {
            tp,
            fp,
            tn,
            fn_,
            acc: (tp + tn) as f64 / n as f64,
            pre: ratio(tp, tp + fp),
            sen: ratio(tp, tp + fn_),
            spe: ratio(tn, tn + fp),
            auc: auc_rank(&col, &positive),
        };
        if tp + fn_ == 0 {
            warnings.push(format!(
                "class {:?} absent from the evaluation set; SEN and AUC undefined",
                class_names[class]
            ));
        }
        per_class.push(metrics);
    }
    Ok(MetricsReport {
        class_names: class_names.to_vec(),
        macro_acc: nan_mean(&per_class.iter().map(|m| m.acc).collect::<Vec<_>>()),
        macro_pre: nan_mean(&per_class.iter().map(|m| m.pre).collect::<Vec<_>>()),
        macro_sen: nan_mean(&per_class.iter().map(|m| m.sen).collect::<Vec<_>>()),
        macro_spe: nan_mean(&per_class.iter().map(|m| m.spe).collect::<Vec<_>>()),
        macro_auc: nan_mean(&per_class.iter().map(|m| m.auc).collect::<Vec<_>>()),
        per_class,
        warnings,
    })
}
