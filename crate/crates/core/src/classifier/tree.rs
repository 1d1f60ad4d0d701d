//! Gini CART trees.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::Rng;

use super::{majority, ForestHyper};
use crate::class::SliceClass;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum Node<T> {
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf { counts: [usize; 3] },
}

/// Nodes in preorder; index 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> DecisionTree<T> {
    pub fn predict(&self, x: &[T]) -> SliceClass {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return majority(counts),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// Split quality as the exact fraction
/// `(sum_k l_k^2 * n_r + sum_k r_k^2 * n_l) / (n_l * n_r)`.
/// Larger is better; it equals `n - weighted Gini impurity`, so comparing
/// fractions avoids rounding-dependent ties.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    pub(crate) fn new(left: &[usize; 3], right: &[usize; 3]) -> Self {
        let nl: u128 = left.iter().sum::<usize>() as u128;
        let nr: u128 = right.iter().sum::<usize>() as u128;
        let sq = |c: &[usize; 3]| c.iter().map(|&v| (v as u128) * (v as u128)).sum::<u128>();
        SplitScore {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    pub(crate) fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

pub(crate) fn grow<T: Real, R: Rng>(
    rows: &[&[T]],
    labels: &[SliceClass],
    hyper: &ForestHyper,
    rng: &mut R,
) -> DecisionTree<T> {
    let n = rows.len();
    let samples: Vec<usize> = if hyper.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut g = Grower {
        rows,
        labels,
        hyper,
        k: hyper.features_per_split.resolve(rows[0].len()),
        nodes: Vec::new(),
    };
    g.build(samples, 0, rng);
    DecisionTree { nodes: g.nodes }
}

struct Grower<'a, T> {
    rows: &'a [&'a [T]],
    labels: &'a [SliceClass],
    hyper: &'a ForestHyper,
    k: usize,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Grower<'_, T> {
    fn counts(&self, idx: &[usize]) -> [usize; 3] {
        let mut c = [0; 3];
        for &i in idx {
            c[self.labels[i].index()] += 1;
        }
        c
    }

    fn build<R: Rng>(&mut self, idx: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let at = self.nodes.len();
        let counts = self.counts(&idx);
        self.nodes.push(Node::Leaf { counts });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.hyper.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || idx.len() < self.hyper.min_samples_split {
            return at;
        }
        let dim = self.rows[0].len();
        let mut features = sample(rng, dim, self.k).into_vec();
        features.sort_unstable();
        let Some((feature, threshold)) = best_split(self.rows, self.labels, &idx, &features) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i][feature] <= threshold);
        let left = self.build(l, depth + 1, rng);
        let right = self.build(r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

/// Best `(feature, threshold)` over the candidate features. Thresholds are
/// midpoints between consecutive distinct values; ties keep the lowest
/// feature, then the lowest threshold.
pub(crate) fn best_split<T: Real>(
    rows: &[&[T]],
    labels: &[SliceClass],
    idx: &[usize],
    features: &[usize],
) -> Option<(usize, T)> {
    let mut total = [0usize; 3];
    for &i in idx {
        total[labels[i].index()] += 1;
    }
    let mut best: Option<(SplitScore, usize, T)> = None;
    let mut pairs: Vec<(T, usize)> = Vec::with_capacity(idx.len());
    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (rows[i][f], labels[i].index())));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let mut left = [0usize; 3];
        for w in 0..pairs.len().saturating_sub(1) {
            left[pairs[w].1] += 1;
            let (a, b) = (pairs[w].0, pairs[w + 1].0);
            if !(a < b) {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1], total[2] - left[2]];
            let score = SplitScore::new(&left, &right);
            if best.as_ref().is_none_or(|(s, _, _)| score.cmp(s) == Ordering::Greater) {
                let mid = (a + b) / T::lit(2.0);
                // Adjacent floats can round the midpoint up onto `b`.
                let threshold = if mid < b { mid } else { a };
                best = Some((score, f, threshold));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}
