//! Confusion matrices, one-vs-all F1/MCC, overall MCC, PR curves with step
//! average precision, and micro-averaged scores.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// rows = true class, columns = predicted class
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// One-vs-all (TP, FP, FN, TN) for class `c`.
    pub fn one_vs_all(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[c][c];
        let row: u64 = self.counts[c].iter().sum();
        let col: u64 = self.counts.iter().map(|r| r[c]).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }
}

pub fn confusion(
    y_true: &[usize],
    y_pred: &[usize],
    class_names: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { expected: y_true.len(), found: y_pred.len() });
    }
    let n = class_names.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n || p >= n {
            return Err(EvalError::UnknownLabel(t.max(p)));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts, class_names: class_names.to_vec() })
}

/// A metric value; `degenerate` marks a zero-denominator case reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ok(value: f64) -> Self {
        Score { value, degenerate: false }
    }

    fn degenerate() -> Self {
        Score { value: 0.0, degenerate: true }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn per_class_precision_recall(cm: &ConfusionMatrix) -> Vec<(f64, f64)> {
    (0..cm.n_classes())
        .map(|c| {
            let (tp, fp, fn_, _) = cm.one_vs_all(c);
            (ratio(tp as f64, (tp + fp) as f64), ratio(tp as f64, (tp + fn_) as f64))
        })
        .collect()
}

pub fn per_class_f1(cm: &ConfusionMatrix) -> Vec<Score> {
    (0..cm.n_classes())
        .map(|c| {
            let (tp, fp, fn_, _) = cm.one_vs_all(c);
            let den = 2 * tp + fp + fn_;
            if den == 0 {
                Score::degenerate()
            } else {
                Score::ok(2.0 * tp as f64 / den as f64)
            }
        })
        .collect()
}

fn binary_mcc(tp: u64, fp: u64, fn_: u64, tn: u64) -> Score {
    let (tp, fp, fn_, tn) = (tp as f64, fp as f64, fn_ as f64, tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return Score::degenerate();
    }
    Score::ok(((tp * tn - fp * fn_) / den.sqrt()).clamp(-1.0, 1.0))
}

pub fn per_class_mcc(cm: &ConfusionMatrix) -> Vec<Score> {
    (0..cm.n_classes())
        .map(|c| {
            let (tp, fp, fn_, tn) = cm.one_vs_all(c);
            binary_mcc(tp, fp, fn_, tn)
        })
        .collect()
}

/// Multiclass MCC from class totals: (c·s − Σ p_i t_i) / (√(s² − Σ p_i²) · √(s² − Σ t_i²)).
pub fn overall_mcc(cm: &ConfusionMatrix) -> Score {
    let n = cm.n_classes();
    let s = cm.total() as f64;
    let c = cm.trace() as f64;
    let t: Vec<f64> = (0..n).map(|i| cm.counts[i].iter().sum::<u64>() as f64).collect();
    let p: Vec<f64> = (0..n).map(|j| cm.counts.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let pt: f64 = p.iter().zip(&t).map(|(a, b)| a * b).sum();
    let pp: f64 = p.iter().map(|a| a * a).sum();
    let tt: f64 = t.iter().map(|a| a * a).sum();
    let (rp, rt) = (s * s - pp, s * s - tt);
    if rp <= 0.0 || rt <= 0.0 {
        return Score::degenerate();
    }
    Score::ok(((c * s - pt) / (rp.sqrt() * rt.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per distinct score, descending threshold.
    pub points: Vec<PrPoint>,
    pub positive_count: usize,
    pub total: usize,
}

impl PrCurve {
    pub fn prevalence(&self) -> f64 {
        self.positive_count as f64 / self.total as f64
    }
}

pub fn pr_curve(scores: &[f64], positive: &[bool]) -> Result<PrCurve, EvalError> {
    if scores.len() != positive.len() {
        return Err(EvalError::LengthMismatch { expected: scores.len(), found: positive.len() });
    }
    let positive_count = positive.iter().filter(|&&p| p).count();
    if positive_count == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut points = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if positive[order[k]] {
                tp += 1;
            }
            seen += 1;
            k += 1;
        }
        points.push(PrPoint {
            threshold,
            recall: tp as f64 / positive_count as f64,
            precision: tp as f64 / seen as f64,
        });
    }
    Ok(PrCurve { points, positive_count, total: scores.len() })
}

/// Step-interpolated average precision: Σ (R_n − R_{n−1}) · P_n.
pub fn average_precision(curve: &PrCurve) -> f64 {
    let mut prev = 0.0;
    let mut ap = 0.0;
    for p in &curve.points {
        ap += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    ap
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub micro_f1: f64,
    pub micro_aucpr: f64,
}

pub fn check_proba(prob: &[Vec<f64>], y_true: &[usize], n_classes: usize) -> Result<(), EvalError> {
    if prob.len() != y_true.len() {
        return Err(EvalError::LengthMismatch { expected: y_true.len(), found: prob.len() });
    }
    for row in prob {
        if row.len() != n_classes {
            return Err(EvalError::Shape { expected: n_classes, found: row.len() });
        }
    }
    if let Some(&bad) = y_true.iter().find(|&&y| y >= n_classes) {
        return Err(EvalError::UnknownLabel(bad));
    }
    Ok(())
}

/// Micro F1 from pooled one-vs-all decisions on argmax predictions, and AP of
/// the pooled (record, class) binary problem scored by class probability.
pub fn micro_metrics(prob: &[Vec<f64>], y_true: &[usize]) -> Result<MicroMetrics, EvalError> {
    let n_classes = prob.first().map_or(0, Vec::len);
    check_proba(prob, y_true, n_classes)?;
    if prob.is_empty() {
        return Err(EvalError::NoPositives);
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (row, &y) in prob.iter().zip(y_true) {
        let pred = argmax(row);
        if pred == y {
            tp += 1;
        } else {
            fp += 1;
            fn_ += 1;
        }
    }
    let micro_f1 = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;

    let scores: Vec<f64> = prob.iter().flatten().copied().collect();
    let positive: Vec<bool> = y_true
        .iter()
        .flat_map(|&y| (0..n_classes).map(move |c| c == y))
        .collect();
    let micro_aucpr = average_precision(&pr_curve(&scores, &positive)?);
    Ok(MicroMetrics { micro_f1, micro_aucpr })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: Score,
    pub mcc: Score,
    pub aucpr: Score,
    /// Chance AUCPR: the class prevalence among evaluated records.
    pub prevalence: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallMetrics {
    pub micro_f1: f64,
    pub micro_aucpr: f64,
    pub overall_mcc: f64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_records: usize,
    pub per_class: Vec<ClassMetrics>,
    pub overall: OverallMetrics,
    pub confusion: ConfusionMatrix,
    #[serde(skip)]
    pub pr_curves: Vec<Option<PrCurve>>,
}

/// Full report from a probability matrix and true class indices.
pub fn evaluate(
    prob: &[Vec<f64>],
    y_true: &[usize],
    class_names: &[String],
) -> Result<MetricsReport, EvalError> {
    let n = class_names.len();
    check_proba(prob, y_true, n)?;
    let y_pred: Vec<usize> = prob.iter().map(|r| argmax(r)).collect();
    let cm = confusion(y_true, &y_pred, class_names)?;
    let micro = micro_metrics(prob, y_true)?;
    let omcc = overall_mcc(&cm).value;
    let f1 = per_class_f1(&cm);
    let mcc = per_class_mcc(&cm);
    let pr = per_class_precision_recall(&cm);

    let mut per_class = Vec::with_capacity(n);
    let mut curves = Vec::with_capacity(n);
    for c in 0..n {
        let scores: Vec<f64> = prob.iter().map(|r| r[c]).collect();
        let positive: Vec<bool> = y_true.iter().map(|&y| y == c).collect();
        let support = positive.iter().filter(|&&p| p).count() as u64;
        let curve = pr_curve(&scores, &positive).ok();
        let aucpr = curve.as_ref().map_or(Score::degenerate(), |cv| Score::ok(average_precision(cv)));
        per_class.push(ClassMetrics {
            label: class_names[c].clone(),
            precision: pr[c].0,
            recall: pr[c].1,
            f1: f1[c],
            mcc: mcc[c],
            aucpr,
            prevalence: support as f64 / y_true.len() as f64,
            support,
        });
        curves.push(curve);
    }
    let overall = OverallMetrics {
        micro_f1: micro.micro_f1,
        micro_aucpr: micro.micro_aucpr,
        overall_mcc: omcc,
        mean_score: (micro.micro_aucpr + micro.micro_f1 + omcc) / 3.0,
    };
    Ok(MetricsReport { n_records: y_true.len(), per_class, overall, confusion: cm, pr_curves: curves })
}

/// CSV rows `class,recall,precision` for every curve in the report.
pub fn pr_curves_csv(report: &MetricsReport) -> String {
    let mut out = String::from("class,threshold,recall,precision\n");
    for (cls, curve) in report.per_class.iter().zip(&report.pr_curves) {
        if let Some(curve) = curve {
            for p in &curve.points {
                out.push_str(&format!("{},{},{},{}\n", cls.label, p.threshold, p.recall, p.precision));
            }
        }
    }
    out
}
