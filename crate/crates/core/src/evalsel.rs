//! Metrics, hyperparameter grid search and model selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::forest::{fit_forest, Dataset, FeaturesPerSplit, ForestModel, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` count as positive; `+inf` for the origin.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let p = labels.iter().filter(|l| **l).count();
    (p, labels.len() - p)
}

fn check_scored(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Config("NaN score".into()));
    }
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Err(Error::Degenerate("ROC needs both classes".into()));
    }
    Ok((p, n))
}

/// ROC swept over every distinct score, with trapezoidal AUC. Tied scores
/// form one diagonal step.
pub fn roc_and_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    let (p, n) = check_scored(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of 1/(p*n), kept integral.
    let mut area2: u128 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (tp0, fp0) = (tp, fp);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold: s,
        });
    }
    let auc = area2 as f64 / (2 * p * n) as f64;
    Ok((RocCurve { points }, auc))
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half, by direct enumeration of all pairs.
pub fn auc_pairwise(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (p, n) = check_scored(scores, labels)?;
    let mut twice = 0u64;
    for i in (0..scores.len()).filter(|&i| labels[i]) {
        for j in (0..scores.len()).filter(|&j| !labels[j]) {
            twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(twice as f64 / (2 * p * n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn add(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fn_ += o.fn_;
        self.fp += o.fp;
        self.tn += o.tn;
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Percentages with rows = true class: `[[TP, FN], [FP, TN]]`. A row
    /// with no members is all zeros.
    pub fn rates(&self) -> [[f64; 2]; 2] {
        let row = |a: usize, b: usize| {
            let n = (a + b) as f64;
            if n == 0.0 {
                [0.0, 0.0]
            } else {
                [100.0 * a as f64 / n, 100.0 * b as f64 / n]
            }
        };
        [row(self.tp, self.fn_), row(self.fp, self.tn)]
    }

    fn record(&mut self, label: bool, predicted: bool) {
        match (label, predicted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectConfusion {
    pub object_id: String,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub threshold: f64,
    pub counts: Counts,
    pub rates: [[f64; 2]; 2],
    /// Sorted by object id.
    pub per_object: Vec<ObjectConfusion>,
}

impl ConfusionReport {
    /// Two-row table, one decimal, rows = true class.
    pub fn table(&self) -> String {
        let r = &self.rates;
        format!(
            "{:<18}{:>20}{:>20}\n{:<18}{:>19.1}%{:>19.1}%\n{:<18}{:>19.1}%{:>19.1}%\n",
            "",
            "predicted success",
            "predicted failure",
            "successful grasp",
            r[0][0],
            r[0][1],
            "failed grasp",
            r[1][0],
            r[1][1]
        )
    }
}

/// Success predicted when `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], object_ids: &[String], threshold: f64) -> Result<ConfusionReport> {
    if scores.is_empty() {
        return Err(Error::Degenerate("confusion of an empty set".into()));
    }
    if scores.len() != labels.len() || scores.len() != object_ids.len() {
        return Err(Error::Config("scores, labels and object ids must align".into()));
    }
    let mut counts = Counts::default();
    let mut per: BTreeMap<&str, Counts> = BTreeMap::new();
    for i in 0..scores.len() {
        let predicted = scores[i] >= threshold;
        counts.record(labels[i], predicted);
        per.entry(&object_ids[i]).or_default().record(labels[i], predicted);
    }
    Ok(ConfusionReport {
        threshold,
        counts,
        rates: counts.rates(),
        per_object: per
            .into_iter()
            .map(|(id, c)| ObjectConfusion {
                object_id: id.to_string(),
                counts: c,
            })
            .collect(),
    })
}

/// Per-object bars normalised by predicted class: among grasps predicted
/// as success, the true- and false-positive rates; among those predicted as
/// failure, the true- and false-negative rates. `None` when nothing was
/// predicted in that class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectBars {
    pub object_id: String,
    pub counts: Counts,
    pub tp_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub tn_rate: Option<f64>,
    pub fn_rate: Option<f64>,
}

pub fn per_object_report(scores: &[f64], labels: &[bool], object_ids: &[String], threshold: f64) -> Result<Vec<ObjectBars>> {
    let report = confusion(scores, labels, object_ids, threshold)?;
    Ok(report.per_object.into_iter().map(|o| bars(o.object_id, o.counts)).collect())
}

fn bars(object_id: String, c: Counts) -> ObjectBars {
    let pct = |a: usize, b: usize| (a + b > 0).then(|| 100.0 * a as f64 / (a + b) as f64);
    ObjectBars {
        object_id,
        counts: c,
        tp_rate: pct(c.tp, c.fp),
        fp_rate: pct(c.fp, c.tp),
        tn_rate: pct(c.tn, c.fn_),
        fn_rate: pct(c.fn_, c.tn),
    }
}

/// A model scored on one labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub name: String,
    pub n: usize,
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub confusion: ConfusionReport,
    pub per_object: Vec<ObjectBars>,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
    #[serde(skip)]
    pub scores: Vec<f64>,
}

pub fn score_matrix(model: &ForestModel, m: &FeatureMatrix) -> Result<Vec<f64>> {
    if m.config != model.feature_config {
        return Err(Error::LayoutMismatch {
            expected: model.layout_hash.clone(),
            got: m.config.layout_hash(),
        });
    }
    Ok(m.rows.par_iter().map(|r| model.predict_proba_values(r)).collect())
}

pub fn evaluate(name: &str, model: &ForestModel, m: &FeatureMatrix, threshold: f64) -> Result<Evaluation> {
    let scores = score_matrix(model, m)?;
    let (roc, auc) = match roc_and_auc(&scores, &m.labels) {
        Ok((r, a)) => (Some(r), Some(a)),
        Err(Error::Degenerate(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let confusion = confusion(&scores, &m.labels, &m.object_ids, threshold)?;
    let per_object = confusion.per_object.iter().map(|o| bars(o.object_id.clone(), o.counts)).collect();
    Ok(Evaluation {
        name: name.to_string(),
        n: m.len(),
        auc,
        accuracy: confusion.counts.accuracy(),
        confusion,
        per_object,
        roc,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_trees: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub features_per_split: Vec<FeaturesPerSplit>,
    pub bootstrap: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_trees: vec![20, 60, 120],
            min_samples_split: vec![2, 5, 10],
            max_depth: vec![Some(8), Some(16), None],
            features_per_split: vec![FeaturesPerSplit::SqrtD],
            bootstrap: true,
        }
    }
}

impl GridSpec {
    /// Every combination, in nested order (trees outermost). All configs
    /// share `seed`.
    pub fn configs(&self, seed: u64) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &min_samples_split in &self.min_samples_split {
                for &max_depth in &self.max_depth {
                    for &features_per_split in &self.features_per_split {
                        out.push(Hyperparams {
                            n_trees,
                            min_samples_split,
                            max_depth,
                            features_per_split,
                            bootstrap: self.bootstrap,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub hyperparams: Hyperparams,
    pub validation_auc: f64,
    pub validation_accuracy: f64,
    /// Accuracy on the training fold itself.
    pub train_accuracy: f64,
    /// Accuracy on the held-out 20% of training-object trials, if given.
    pub seen_validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub rows: Vec<GridRow>,
    pub chosen: usize,
    pub threshold: f64,
    pub tie_break: String,
}

pub const TIE_BREAK: &str = "highest validation AUC, then fewer trees, then smaller max depth (unlimited last), then grid order";

/// True when `a` should be preferred over `b`.
fn preferred(a: &GridRow, b: &GridRow) -> bool {
    let depth = |r: &GridRow| r.hyperparams.max_depth.unwrap_or(usize::MAX);
    (b.validation_auc, a.hyperparams.n_trees, depth(a), a.index)
        .partial_cmp(&(a.validation_auc, b.hyperparams.n_trees, depth(b), b.index))
        == Some(std::cmp::Ordering::Less)
}

fn object_set(m: &FeatureMatrix) -> BTreeSet<&str> {
    m.object_ids.iter().map(String::as_str).collect()
}

pub fn check_disjoint(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<()> {
    let sa = object_set(a);
    let shared: Vec<&str> = object_set(b).into_iter().filter(|o| sa.contains(o)).collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::RosterOverlap(format!("objects in both sets: {}", shared.join(", "))))
    }
}

/// Train one forest per config and pick the best by unseen-validation AUC.
/// Returns the result table and the chosen model.
pub fn grid_search(
    configs: &[Hyperparams],
    train: &FeatureMatrix,
    validation: &FeatureMatrix,
    seen_validation: Option<&FeatureMatrix>,
    threshold: f64,
) -> Result<(GridSearchResult, ForestModel)> {
    if configs.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    check_disjoint(train, validation)?;
    let data = Dataset::from_rows(&train.rows, &train.labels)?;
    let fitted: Vec<(GridRow, ForestModel)> = configs
        .par_iter()
        .enumerate()
        .map(|(index, hp)| -> Result<(GridRow, ForestModel)> {
            let model = fit_forest(&data, hp, &train.config)?;
            let val = score_matrix(&model, validation)?;
            let (_, validation_auc) = roc_and_auc(&val, &validation.labels)?;
            let acc = |scores: &[f64], labels: &[bool]| {
                scores.iter().zip(labels).filter(|(s, l)| (**s >= threshold) == **l).count() as f64 / labels.len() as f64
            };
            let train_scores = score_matrix(&model, train)?;
            let seen_validation_accuracy = match seen_validation {
                Some(m) if !m.is_empty() => Some(acc(&score_matrix(&model, m)?, &m.labels)),
                _ => None,
            };
            Ok((
                GridRow {
                    index,
                    hyperparams: *hp,
                    validation_auc,
                    validation_accuracy: acc(&val, &validation.labels),
                    train_accuracy: acc(&train_scores, &train.labels),
                    seen_validation_accuracy,
                },
                model,
            ))
        })
        .collect::<Result<_>>()?;
    let mut chosen = 0;
    for i in 1..fitted.len() {
        if preferred(&fitted[i].0, &fitted[chosen].0) {
            chosen = i;
        }
    }
    let (rows, mut models): (Vec<GridRow>, Vec<ForestModel>) = fitted.into_iter().unzip();
    Ok((
        GridSearchResult {
            rows,
            chosen,
            threshold,
            tie_break: TIE_BREAK.to_string(),
        },
        models.swap_remove(chosen),
    ))
}

fn depth_label(d: Option<usize>) -> String {
    d.map_or_else(|| "none".to_string(), |d| d.to_string())
}

fn fps_label(f: FeaturesPerSplit) -> String {
    match f {
        FeaturesPerSplit::SqrtD => "sqrt_d".into(),
        FeaturesPerSplit::All => "all".into(),
        FeaturesPerSplit::Fraction(x) => format!("fraction:{x}"),
    }
}

/// Grid table sorted best-first.
pub fn write_grid_csv<W: Write>(mut w: W, r: &GridSearchResult) -> Result<()> {
    writeln!(w, "rank,index,n_trees,min_samples_split,max_depth,features_per_split,validation_auc,validation_accuracy,train_accuracy,seen_validation_accuracy,chosen")?;
    let mut order: Vec<&GridRow> = r.rows.iter().collect();
    order.sort_by(|a, b| {
        if preferred(a, b) {
            std::cmp::Ordering::Less
        } else if preferred(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    for (rank, row) in order.iter().enumerate() {
        let hp = &row.hyperparams;
        writeln!(
            w,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            rank + 1,
            row.index,
            hp.n_trees,
            hp.min_samples_split,
            depth_label(hp.max_depth),
            fps_label(hp.features_per_split),
            row.validation_auc,
            row.validation_accuracy,
            row.train_accuracy,
            row.seen_validation_accuracy.map_or(String::new(), |a| format!("{a:.6}")),
            row.index == r.chosen
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_confusion_csv<W: Write>(mut w: W, evals: &[Evaluation]) -> Result<()> {
    writeln!(w, "set,object_id,n,tp,fn,fp,tn,success_predicted_success_pct,success_predicted_failure_pct,failure_predicted_success_pct,failure_predicted_failure_pct,accuracy")?;
    for e in evals {
        let rows = std::iter::once(("all".to_string(), e.confusion.counts)).chain(e.confusion.per_object.iter().map(|o| (o.object_id.clone(), o.counts)));
        for (id, c) in rows {
            let r = c.rates();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{:.1},{:.1},{:.1},{:.1},{:.4}",
                e.name,
                id,
                c.total(),
                c.tp,
                c.fn_,
                c.fp,
                c.tn,
                r[0][0],
                r[0][1],
                r[1][0],
                r[1][1],
                c.accuracy()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_per_object_csv<W: Write>(mut w: W, evals: &[Evaluation]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.1}"));
    writeln!(w, "set,object_id,tp_rate_pct,fp_rate_pct,tn_rate_pct,fn_rate_pct")?;
    for e in evals {
        for b in &e.per_object {
            writeln!(w, "{},{},{},{},{},{}", e.name, b.object_id, opt(b.tp_rate), opt(b.fp_rate), opt(b.tn_rate), opt(b.fn_rate))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// ROC plot with one polyline per evaluation set.
pub fn roc_svg(curves: &[(&str, &RocCurve, f64)]) -> String {
    const SIZE: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];
    let x = |f: f64| PAD + f * SIZE;
    let y = |t: f64| PAD + (1.0 - t) * SIZE;
    let mut s = String::new();
    let total = SIZE + 2.0 * PAD;
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#, x(0.0), y(0.0), x(1.0), y(1.0));
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v:.1}</text>"#, x(v), y(0.0) + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#, x(0.0) - 6.0, y(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">false positive rate</text>"#, x(0.5), total - 8.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">true positive rate</text>"#, y(0.5), y(0.5));
    for (k, (name, curve, auc)) in curves.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = curve.points.iter().map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = y(0.0) - 20.0 - 18.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{name} (AUC {auc:.3})</text>"#, x(1.0) - 8.0);
    }
    s.push_str("</svg>\n");
    s
}
