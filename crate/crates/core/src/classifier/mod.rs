//! Slice-level classification into basal / mid-ventricular / apical.
//!
//! A random forest of Gini CART trees over [`FeatureVector`]s. Every tree
//! draws from its own ChaCha stream selected by `(seed, tree_index)`, so a
//! model is identical whatever the thread count.

mod persist;
mod tree;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use persist::{read_model, write_model};
pub use tree::{DecisionTree, Node};

pub use crate::class::SliceClass;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::scalar::Real;

/// How many candidate features each split examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturesPerSplit {
    /// `floor(sqrt(d))`, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, dim: usize) -> usize {
        let k = match self {
            FeaturesPerSplit::Sqrt => (dim as f64).sqrt().floor() as usize,
            FeaturesPerSplit::All => dim,
            FeaturesPerSplit::Count(k) => k,
        };
        k.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_trees: usize,
    /// `None` grows until purity or `min_samples_split`.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeaturesPerSplit::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestHyper {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::Config("forest: n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("forest: min_samples_split must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel<T = f64> {
    pub trees: Vec<DecisionTree<T>>,
    pub hyper: ForestHyper,
    pub feature_dim: usize,
}

/// Deterministic RNG stream for tree `index`.
pub(crate) fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn labels_of<T: Real>(data: &[FeatureVector<T>]) -> Result<Vec<SliceClass>> {
    data.iter()
        .map(|f| {
            f.label.ok_or_else(|| Error::MissingLabel {
                case_id: f.case_id.clone(),
                p: f.p,
            })
        })
        .collect()
}

/// Grows a forest on labeled training vectors.
pub fn train_forest<T: Real>(train: &[FeatureVector<T>], hyper: &ForestHyper) -> Result<RandomForestModel<T>> {
    hyper.validate()?;
    let first = train
        .first()
        .ok_or_else(|| Error::TooFewSamples("training set is empty".into()))?;
    let dim = first.dim();
    if let Some(bad) = train.iter().find(|f| f.dim() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.dim(),
        });
    }
    let labels = labels_of(train)?;
    let rows: Vec<&[T]> = train.iter().map(|f| f.values.as_slice()).collect();
    let trees = (0..hyper.n_trees)
        .into_par_iter()
        .map(|i| tree::grow(&rows, &labels, hyper, &mut tree_rng(hyper.seed, i)))
        .collect();
    Ok(RandomForestModel {
        trees,
        hyper: hyper.clone(),
        feature_dim: dim,
    })
}

/// Majority vote; ties go to the earliest class in the fixed class order.
pub fn majority(votes: &[usize; 3]) -> SliceClass {
    let mut best = 0;
    for k in 1..3 {
        if votes[k] > votes[best] {
            best = k;
        }
    }
    SliceClass::ALL[best]
}

impl<T: Real> RandomForestModel<T> {
    pub fn votes(&self, values: &[T]) -> Result<[usize; 3]> {
        if values.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                found: values.len(),
            });
        }
        let mut votes = [0usize; 3];
        for t in &self.trees {
            votes[t.predict(values).index()] += 1;
        }
        Ok(votes)
    }
}

pub fn predict_class<T: Real>(model: &RandomForestModel<T>, f: &FeatureVector<T>) -> Result<SliceClass> {
    Ok(majority(&model.votes(&f.values)?))
}

/// Training and held-out parts of a split.
pub type Split<T> = (Vec<FeatureVector<T>>, Vec<FeatureVector<T>>);

/// Class-stratified shuffle split. Each class keeps
/// `round(train_ratio * count)` samples (at least one on each side) in the
/// training part. Both parts preserve input order.
pub fn stratified_split<T: Real>(
    data: &[FeatureVector<T>],
    train_ratio: f64,
    seed: u64,
) -> Result<Split<T>> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!("train_ratio {train_ratio} must lie in (0, 1)")));
    }
    let labels = labels_of(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; data.len()];
    for cls in SliceClass::ALL {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == cls).collect();
        if idx.len() < 2 {
            return Err(Error::EmptyClass(cls.token()));
        }
        idx.shuffle(&mut rng);
        let n_train = ((train_ratio * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        for &i in &idx[..n_train] {
            in_train[i] = true;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (f, t) in data.iter().zip(in_train) {
        if t {
            train.push(f.clone());
        } else {
            test.push(f.clone());
        }
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Stratified fold assignment: within each class, shuffled samples are dealt
/// round-robin to folds, continuing where the previous class stopped so fold
/// sizes differ by at most one.
pub fn stratified_folds(labels: &[SliceClass], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0usize; labels.len()];
    let mut dealt = 0;
    for cls in SliceClass::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cls).collect();
        if idx.len() < k {
            return Err(Error::TooFewSamples(format!(
                "class {cls} has {} samples, fewer than k = {k}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for &i in &idx {
            fold[i] = dealt % k;
            dealt += 1;
        }
    }
    Ok(fold)
}

pub fn cross_validate<T: Real>(data: &[FeatureVector<T>], k: usize, hyper: &ForestHyper) -> Result<CvReport> {
    let labels = labels_of(data)?;
    let fold = stratified_folds(&labels, k, hyper.seed)?;
    let mut fold_accuracies = Vec::with_capacity(k);
    for f in 0..k {
        let train: Vec<FeatureVector<T>> = data
            .iter()
            .zip(&fold)
            .filter(|(_, &g)| g != f)
            .map(|(d, _)| d.clone())
            .collect();
        let model = train_forest(&train, hyper)?;
        let (mut hit, mut total) = (0usize, 0usize);
        for (d, _) in data.iter().zip(&fold).filter(|(_, &g)| g == f) {
            total += 1;
            if predict_class(&model, d)? == d.label.expect("labels checked above") {
                hit += 1;
            }
        }
        fold_accuracies.push(hit as f64 / total as f64);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvReport {
        fold_accuracies,
        mean_accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Per-class precision, recall and F1, indexed by [`SliceClass::index`].
pub fn classification_report(pred: &[SliceClass], truth: &[SliceClass]) -> Result<[ClassScores; 3]> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::TooFewSamples("classification report of zero predictions".into()));
    }
    let mut out = [ClassScores::default(); 3];
    for cls in SliceClass::ALL {
        let tp = pred.iter().zip(truth).filter(|(&p, &t)| p == cls && t == cls).count();
        let predicted = pred.iter().filter(|&&p| p == cls).count();
        let actual = truth.iter().filter(|&&t| t == cls).count();
        let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out[cls.index()] = ClassScores {
            precision,
            recall,
            f1,
            support: actual,
        };
    }
    Ok(out)
}
