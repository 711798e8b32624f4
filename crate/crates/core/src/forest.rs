//! CART decision trees and a bagged random forest with soft voting.
//!
//! Split search compares weighted Gini impurities exactly in integer
//! arithmetic, so training is bit-reproducible and independent of summation
//! order. Bootstrap resamples are represented as integer sample weights.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureVector};
use crate::io;
use crate::rng::{stream, Domain};

pub const MODEL_MAGIC: &[u8; 8] = b"TOFRFMDL";
pub const MODEL_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.6;
const LEAF: u32 = u32::MAX;

/// Gini impurity `1 - p^2 - (1-p)^2`.
pub fn gini(n_pos: u64, n_neg: u64) -> Result<f64> {
    let n = n_pos + n_neg;
    if n == 0 {
        return Err(Error::Degenerate("gini of an empty node".into()));
    }
    let p = n_pos as f64 / n as f64;
    Ok(1.0 - p * p - (1.0 - p) * (1.0 - p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum FeaturesPerSplit {
    SqrtD,
    Fraction(f64),
    All,
}

impl FeaturesPerSplit {
    pub fn count(&self, d: usize) -> usize {
        let k = match *self {
            FeaturesPerSplit::SqrtD => (d as f64).sqrt().floor() as usize,
            FeaturesPerSplit::Fraction(f) => (f * d as f64).ceil() as usize,
            FeaturesPerSplit::All => d,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 60,
            min_samples_split: 5,
            max_depth: Some(16),
            features_per_split: FeaturesPerSplit::SqrtD,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if let FeaturesPerSplit::Fraction(f) = self.features_per_split {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("feature fraction {f} outside (0, 1]")));
            }
        }
        Ok(())
    }

    fn depth_limit(&self) -> usize {
        self.max_depth.unwrap_or(usize::MAX)
    }
}

/// Flattened binary tree; node 0 is the root. Leaves have `feature == u32::MAX`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub feature: Vec<u32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    /// Weighted class counts reaching each node.
    pub n_pos: Vec<u32>,
    pub n_neg: Vec<u32>,
}

/// Structured view of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { n_pos: u32, n_neg: u32 },
}

impl Tree {
    pub fn len(&self) -> usize {
        self.feature.len()
    }

    pub fn is_empty(&self) -> bool {
        self.feature.is_empty()
    }

    pub fn node(&self, i: usize) -> TreeNode {
        if self.feature[i] == LEAF {
            TreeNode::Leaf {
                n_pos: self.n_pos[i],
                n_neg: self.n_neg[i],
            }
        } else {
            TreeNode::Split {
                feature: self.feature[i] as usize,
                threshold: self.threshold[i],
                left: self.left[i] as usize,
                right: self.right[i] as usize,
            }
        }
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        while self.feature[i] != LEAF {
            i = if x[self.feature[i] as usize] <= self.threshold[i] {
                self.left[i]
            } else {
                self.right[i]
            } as usize;
        }
        i
    }

    /// `n_pos / (n_pos + n_neg)` of the leaf `x` falls into.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let i = self.leaf_index(x);
        self.n_pos[i] as f64 / (self.n_pos[i] + self.n_neg[i]) as f64
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.node(i) {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }

    fn push(&mut self, pos: u32, neg: u32) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.n_pos.push(pos);
        self.n_neg.push(neg);
        self.feature.len() - 1
    }
}

/// Column-major training data.
#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Degenerate("no training rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Config(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("rows must share a non-zero length".into()));
        }
        if rows.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Config("NaN feature value".into()));
        }
        let columns = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(Self {
            columns,
            labels: labels.to_vec(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Split quality as the exact rational `num / den` of
/// `sum_c (pos_c^2 + neg_c^2) / n_c`; larger is purer.
#[derive(Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn node(pos: u64, neg: u64) -> Self {
        let (p, q) = (pos as u128, neg as u128);
        Self {
            num: p * p + q * q,
            den: p + q,
        }
    }

    fn split(lp: u64, ln: u64, rp: u64, rn: u64) -> Self {
        let l = Self::node(lp, ln);
        let r = Self::node(rp, rn);
        Self {
            num: l.num * r.den + r.num * l.den,
            den: l.den * r.den,
        }
    }

    fn gt(&self, other: &Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    purity: Purity,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

/// Best threshold on one feature, or `None` when the feature is constant in
/// the node. The lowest threshold wins ties.
fn best_threshold(col: &[f64], labels: &[bool], idx: &[(u32, u32)], pos: u64, neg: u64, scratch: &mut Vec<(f64, u32, bool)>) -> Option<(f64, Purity)> {
    scratch.clear();
    scratch.extend(idx.iter().map(|&(i, w)| (col[i as usize], w, labels[i as usize])));
    scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    if scratch[0].0 == scratch[scratch.len() - 1].0 {
        return None;
    }
    let (mut lp, mut ln) = (0u64, 0u64);
    let mut best: Option<(f64, Purity)> = None;
    for k in 0..scratch.len() - 1 {
        let (v, w, y) = scratch[k];
        if y {
            lp += w as u64;
        } else {
            ln += w as u64;
        }
        let next = scratch[k + 1].0;
        if next == v {
            continue;
        }
        let p = Purity::split(lp, ln, pos - lp, neg - ln);
        if best.as_ref().is_none_or(|(_, b)| p.gt(b)) {
            best = Some((midpoint(v, next), p));
        }
    }
    best
}

struct Builder<'a, R> {
    data: &'a Dataset,
    hp: &'a Hyperparams,
    rng: R,
    tree: Tree,
    order: Vec<usize>,
    scratch: Vec<(f64, u32, bool)>,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: &[(u32, u32)], depth: usize) -> usize {
        let (mut pos, mut neg) = (0u64, 0u64);
        for &(i, w) in idx {
            if self.data.labels[i as usize] {
                pos += w as u64;
            } else {
                neg += w as u64;
            }
        }
        let node = self.tree.push(pos as u32, neg as u32);
        if depth >= self.hp.depth_limit() || ((pos + neg) as usize) < self.hp.min_samples_split || pos == 0 || neg == 0 {
            return node;
        }
        let Some(best) = self.search(idx, pos, neg) else {
            return node;
        };
        if !best.purity.gt(&Purity::node(pos, neg)) {
            return node;
        }
        let col = &self.data.columns[best.feature];
        let (l, r): (Vec<_>, Vec<_>) = idx.iter().partition(|&&(i, _)| col[i as usize] <= best.threshold);
        let li = self.grow(&l, depth + 1);
        let ri = self.grow(&r, depth + 1);
        self.tree.feature[node] = best.feature as u32;
        self.tree.threshold[node] = best.threshold;
        self.tree.left[node] = li as u32;
        self.tree.right[node] = ri as u32;
        node
    }

    /// Visit features in random order until `k` non-constant ones have been
    /// scored, then keep the best (lowest feature index on ties).
    fn search(&mut self, idx: &[(u32, u32)], pos: u64, neg: u64) -> Option<Candidate> {
        let d = self.data.n_features();
        let k = self.hp.features_per_split.count(d);
        if k < d {
            self.order.shuffle(&mut self.rng);
        }
        let mut found: Vec<Candidate> = Vec::with_capacity(k);
        for j in 0..d {
            let f = self.order[j];
            if let Some((threshold, purity)) = best_threshold(&self.data.columns[f], &self.data.labels, idx, pos, neg, &mut self.scratch) {
                found.push(Candidate { feature: f, threshold, purity });
                if found.len() == k {
                    break;
                }
            }
        }
        found.sort_by_key(|c| c.feature);
        let mut best: Option<Candidate> = None;
        for c in found {
            if best.as_ref().is_none_or(|b| c.purity.gt(&b.purity)) {
                best = Some(c);
            }
        }
        best
    }
}

/// Fit one tree on weighted samples `(row, weight)`.
pub fn fit_tree_weighted<R: Rng>(data: &Dataset, weights: &[u32], hp: &Hyperparams, rng: R) -> Tree {
    let idx: Vec<(u32, u32)> = weights.iter().enumerate().filter(|(_, w)| **w > 0).map(|(i, w)| (i as u32, *w)).collect();
    let mut b = Builder {
        data,
        hp,
        rng,
        tree: Tree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            n_pos: Vec::new(),
            n_neg: Vec::new(),
        },
        order: (0..data.n_features()).collect(),
        scratch: Vec::new(),
    };
    b.grow(&idx, 0);
    b.tree
}

/// Fit one tree on every row with unit weight.
pub fn fit_tree<R: Rng>(data: &Dataset, hp: &Hyperparams, rng: R) -> Tree {
    fit_tree_weighted(data, &vec![1; data.n_rows()], hp, rng)
}

/// Bootstrap weights: `n` draws with replacement.
fn bootstrap_weights<R: Rng>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.random_range(0..n)] += 1;
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub hyperparams: Hyperparams,
    pub feature_config: FeatureConfig,
    pub layout_hash: String,
    pub n_features: usize,
}

/// Fit `n_trees` trees; tree `t` uses stream `(seed, t)` for its resample and
/// its feature subsets.
pub fn fit_forest(data: &Dataset, hp: &Hyperparams, feature_config: &FeatureConfig) -> Result<ForestModel> {
    hp.validate()?;
    let pos = data.labels.iter().filter(|y| **y).count();
    if pos == 0 || pos == data.n_rows() {
        return Err(Error::Degenerate("training labels contain a single class".into()));
    }
    let trees = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(hp.seed, Domain::ForestTree, t as u64);
            let w = if hp.bootstrap {
                bootstrap_weights(data.n_rows(), &mut rng)
            } else {
                vec![1; data.n_rows()]
            };
            fit_tree_weighted(data, &w, hp, rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        hyperparams: *hp,
        feature_config: *feature_config,
        layout_hash: feature_config.layout_hash(),
        n_features: data.n_features(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelHeader {
    hyperparams: Hyperparams,
    feature_config: FeatureConfig,
    layout_hash: String,
    n_features: usize,
    criterion: String,
    aggregation: String,
}

impl ForestModel {
    /// Mean leaf probability over trees; no layout check.
    pub fn predict_proba_values(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(x)).sum();
        sum / self.trees.len() as f64
    }

    fn check(&self, v: &FeatureVector) -> Result<()> {
        if v.config != self.feature_config || v.values.len() != self.n_features {
            return Err(Error::LayoutMismatch {
                expected: self.layout_hash.clone(),
                got: v.config.layout_hash(),
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64> {
        self.check(v)?;
        Ok(self.predict_proba_values(&v.values))
    }

    /// Success predicted when the probability reaches `threshold`.
    pub fn predict(&self, v: &FeatureVector, threshold: f64) -> Result<bool> {
        Ok(self.predict_proba(v)? >= threshold)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = ModelHeader {
            hyperparams: self.hyperparams,
            feature_config: self.feature_config,
            layout_hash: self.layout_hash.clone(),
            n_features: self.n_features,
            criterion: "gini".into(),
            aggregation: "mean_leaf_probability".into(),
        };
        let h = io::to_line(&header)?;
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(h.len() as u32).to_le_bytes());
        out.extend_from_slice(h.as_bytes());
        out.extend_from_slice(&(self.trees.len() as u32).to_le_bytes());
        for t in &self.trees {
            out.extend_from_slice(&(t.len() as u32).to_le_bytes());
            for i in 0..t.len() {
                out.extend_from_slice(&t.feature[i].to_le_bytes());
                out.extend_from_slice(&t.threshold[i].to_bits().to_le_bytes());
                out.extend_from_slice(&t.left[i].to_le_bytes());
                out.extend_from_slice(&t.right[i].to_le_bytes());
                out.extend_from_slice(&t.n_pos[i].to_le_bytes());
                out.extend_from_slice(&t.n_neg[i].to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let hlen = r.u32()? as usize;
        let header: ModelHeader = serde_json::from_slice(r.take(hlen)?)?;
        if header.layout_hash != header.feature_config.layout_hash() {
            return Err(Error::ModelFormat("layout hash does not match the recorded feature config".into()));
        }
        let n_trees = r.u32()? as usize;
        let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
        for _ in 0..n_trees {
            let n = r.u32()? as usize;
            let mut t = Tree {
                feature: Vec::with_capacity(n),
                threshold: Vec::with_capacity(n),
                left: Vec::with_capacity(n),
                right: Vec::with_capacity(n),
                n_pos: Vec::with_capacity(n),
                n_neg: Vec::with_capacity(n),
            };
            for _ in 0..n {
                t.feature.push(r.u32()?);
                t.threshold.push(f64::from_bits(r.u64()?));
                t.left.push(r.u32()?);
                t.right.push(r.u32()?);
                t.n_pos.push(r.u32()?);
                t.n_neg.push(r.u32()?);
            }
            validate_tree(&t, header.n_features)?;
            trees.push(t);
        }
        if r.pos != bytes.len() {
            return Err(Error::ModelFormat("trailing bytes".into()));
        }
        if trees.is_empty() {
            return Err(Error::ModelFormat("model has no trees".into()));
        }
        Ok(Self {
            trees,
            hyperparams: header.hyperparams,
            feature_config: header.feature_config,
            layout_hash: header.layout_hash,
            n_features: header.n_features,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// SHA-256 of the serialized model.
    pub fn hash(&self) -> Result<String> {
        Ok(io::sha256_hex(&self.to_bytes()?))
    }
}

fn validate_tree(t: &Tree, n_features: usize) -> Result<()> {
    let bad = |m: &str| Err(Error::ModelFormat(m.to_string()));
    if t.is_empty() {
        return bad("empty tree");
    }
    for i in 0..t.len() {
        if t.feature[i] == LEAF {
            if t.n_pos[i] as u64 + t.n_neg[i] as u64 == 0 {
                return bad("leaf with no samples");
            }
        } else if t.feature[i] as usize >= n_features
            || t.left[i] as usize <= i
            || t.right[i] as usize <= i
            || t.left[i] as usize >= t.len()
            || t.right[i] as usize >= t.len()
        {
            return bad("malformed split node");
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| Error::ModelFormat("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn all_features(depth: Option<usize>) -> Hyperparams {
        Hyperparams {
            n_trees: 1,
            min_samples_split: 2,
            max_depth: depth,
            features_per_split: FeaturesPerSplit::All,
            bootstrap: false,
            seed: 0,
        }
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(2, 2).unwrap(), 0.5);
        assert_eq!(gini(4, 0).unwrap(), 0.0);
        assert_eq!(gini(1, 3).unwrap(), 0.375);
        assert!(gini(0, 0).is_err());
    }

    #[test]
    fn depth_zero_is_prior() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let y = [true, false, false, true, false, true, true];
        let d = Dataset::from_rows(&rows, &y).unwrap();
        let t = fit_tree(&d, &all_features(Some(0)), stream(0, Domain::ForestTree, 0));
        assert_eq!(t.len(), 1);
        assert_eq!(t.predict_proba(&[100.0]), 4.0 / 7.0);
    }

    #[test]
    fn separable_one_split() {
        let rows: Vec<Vec<f64>> = [-3.0, -2.0, -0.5, 0.5, 1.0, 4.0].iter().map(|v| vec![*v]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] > 0.0).collect();
        let d = Dataset::from_rows(&rows, &y).unwrap();
        let t = fit_tree(&d, &all_features(None), stream(0, Domain::ForestTree, 0));
        assert_eq!(t.len(), 3);
        assert_eq!(t.node(0), TreeNode::Split { feature: 0, threshold: 0.0, left: 1, right: 2 });
        for (r, l) in rows.iter().zip(&y) {
            assert_eq!(t.predict_proba(r) == 1.0, *l);
        }
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::from_rows(&[vec![0.0], vec![1.0]], &[true, true]).unwrap();
        assert!(fit_forest(&d, &Hyperparams::default(), &FeatureConfig::default()).is_err());
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert_eq!(midpoint(a, b), a);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }

    fn random_data(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = stream(seed, Domain::Split, 99);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| (rng.random_range(0..8) as f64) * 0.25).collect()).collect();
        let y = rows.iter().map(|r| r[0] + 0.5 * r[1 % d] + rng.random_range(-0.5..0.5) > 1.0).collect();
        (rows, y)
    }

    #[test]
    fn model_bytes_roundtrip() {
        let (rows, mut y) = random_data(4, 80, 5);
        y[0] = true;
        y[1] = false;
        let d = Dataset::from_rows(&rows, &y).unwrap();
        let hp = Hyperparams {
            n_trees: 7,
            min_samples_split: 2,
            ..Default::default()
        };
        let m = fit_forest(&d, &hp, &FeatureConfig::default()).unwrap();
        let bytes = m.to_bytes().unwrap();
        let back = ForestModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(ForestModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let m2 = fit_forest(&d, &hp, &FeatureConfig::default()).unwrap();
        assert_eq!(m2.to_bytes().unwrap(), bytes);
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_predictions(seed in 0u64..500, col in 0usize..3) {
            let (rows, mut y) = random_data(seed, 40, 3);
            y[0] = true;
            y[1] = false;
            let moved: Vec<Vec<f64>> = rows.iter().map(|r| {
                let mut r = r.clone();
                r[col] = 2.0 * r[col] + 1.0;
                r
            }).collect();
            let hp = Hyperparams { n_trees: 3, min_samples_split: 2, max_depth: Some(6), features_per_split: FeaturesPerSplit::Fraction(0.5), bootstrap: true, seed };
            let a = fit_forest(&Dataset::from_rows(&rows, &y).unwrap(), &hp, &FeatureConfig::default()).unwrap();
            let b = fit_forest(&Dataset::from_rows(&moved, &y).unwrap(), &hp, &FeatureConfig::default()).unwrap();
            for (r, m) in rows.iter().zip(&moved) {
                prop_assert_eq!(a.predict_proba_values(r), b.predict_proba_values(m));
            }
        }

        #[test]
        fn proba_in_unit_interval_and_depth_bounded(seed in 0u64..500, depth in 0usize..5) {
            let (rows, mut y) = random_data(seed, 30, 4);
            y[0] = true;
            y[1] = false;
            let hp = Hyperparams { n_trees: 4, min_samples_split: 2, max_depth: Some(depth), features_per_split: FeaturesPerSplit::SqrtD, bootstrap: true, seed };
            let m = fit_forest(&Dataset::from_rows(&rows, &y).unwrap(), &hp, &FeatureConfig::default()).unwrap();
            for t in &m.trees {
                prop_assert!(t.depth() <= depth);
            }
            for r in &rows {
                let p = m.predict_proba_values(r);
                prop_assert!((0.0..=1.0).contains(&p));
                let direct: f64 = m.trees.iter().map(|t| t.predict_proba(r)).sum::<f64>() / 4.0;
                prop_assert_eq!(p, direct);
            }
        }
    }
}
