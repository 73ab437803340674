use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    /// Defaults to `ceil(sqrt(d))` when unset.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 200,
            max_depth: 8,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode<T> {
    Leaf {
        probabilities: Vec<T>,
    },
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    /// Node 0 is the root.
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn leaf_probabilities(&self, row: &[T]) -> &[T] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { probabilities } => return probabilities,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel<T> {
    pub config: ForestConfig,
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<DecisionTree<T>>,
    pub feature_importances: Vec<T>,
    pub validation_accuracy: Option<T>,
    pub test_accuracy: Option<T>,
}

impl<T: Scalar> ForestModel<T> {
    pub fn predict_proba(&self, row: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.n_classes];
        for t in &self.trees {
            for (a, &p) in acc.iter_mut().zip(t.leaf_probabilities(row)) {
                *a = *a + p;
            }
        }
        let k = T::from_count(self.trees.len());
        acc.into_iter().map(|a| a / k).collect()
    }

    /// Most probable class; ties go to the lower class index.
    pub fn predict(&self, row: &[T]) -> usize {
        let p = self.predict_proba(row);
        (0..p.len()).fold(0, |b, c| if p[c] > p[b] { c } else { b })
    }

    pub fn accuracy(&self, x: &[Vec<T>], y: &[usize]) -> Option<T> {
        if x.is_empty() {
            return None;
        }
        let hits = x.iter().zip(y).filter(|(r, &c)| self.predict(r) == c).count();
        Some(T::from_count(hits) / T::from_count(x.len()))
    }
}

fn gini<T: Scalar>(counts: &[usize], total: usize) -> T {
    if total == 0 {
        return T::zero();
    }
    let t = T::from_count(total);
    T::one() - counts.iter().fold(T::zero(), |a, &c| {
        let p = T::from_count(c) / t;
        a + p * p
    })
}

struct Builder<'a, T> {
    x: &'a [Vec<T>],
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    mtry: usize,
    nodes: Vec<TreeNode<T>>,
    importance: Vec<T>,
}

impl<T: Scalar> Builder<'_, T> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    fn leaf(&mut self, counts: &[usize], total: usize) -> usize {
        let t = T::from_count(total.max(1));
        self.nodes.push(TreeNode::Leaf {
            probabilities: counts.iter().map(|&c| T::from_count(c) / t).collect(),
        });
        self.nodes.len() - 1
    }

    /// Best (decrease, feature, threshold) over the candidate features, where
    /// decrease is in sample-count units.
    fn best_split(&self, idx: &[usize], features: &[usize], parent: T) -> Option<(T, usize, T)> {
        let n = idx.len();
        let mut best: Option<(T, usize, T)> = None;
        let mut sorted = idx.to_vec();
        for &f in features {
            sorted.sort_by(|&a, &b| self.x[a][f].partial_cmp(&self.x[b][f]).unwrap_or(std::cmp::Ordering::Equal));
            let mut left = vec![0; self.n_classes];
            let mut right = self.counts(idx);
            for k in 0..n - 1 {
                let c = self.y[sorted[k]];
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let child = T::from_count(nl) * gini::<T>(&left, nl) + T::from_count(nr) * gini::<T>(&right, nr);
                let decrease = T::from_count(n) * parent - child;
                if best.is_none_or(|(d, _, _)| decrease > d) {
                    best = Some((decrease, f, (a + b) / T::lit(2.0)));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(idx);
        let parent = gini::<T>(&counts, idx.len());
        if depth >= self.max_depth || idx.len() < 2 || parent <= T::zero() {
            return self.leaf(&counts, idx.len());
        }
        let d = self.x[0].len();
        let mut features = sample(rng, d, self.mtry).into_vec();
        features.sort_unstable();
        let Some((decrease, f, thr)) = self.best_split(idx, &features, parent) else {
            return self.leaf(&counts, idx.len());
        };
        if decrease <= T::zero() {
            return self.leaf(&counts, idx.len());
        }
        self.importance[f] = self.importance[f] + decrease;
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][f] <= thr);
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Split { feature: f, threshold: thr, left: 0, right: 0 });
        let li = self.grow(&l, depth + 1, rng);
        let ri = self.grow(&r, depth + 1, rng);
        self.nodes[at] = TreeNode::Split { feature: f, threshold: thr, left: li, right: ri };
        at
    }
}

fn check_xy<T: Scalar>(x: &[Vec<T>], y: &[usize], n_classes: usize) -> Result<usize> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len() });
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::InvalidArgument("forest needs at least one feature".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension { expected: d, got: row.len() });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forest features"));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidArgument(format!("class {c} out of range for {n_classes} classes")));
    }
    Ok(d)
}

/// Bootstrap forest of Gini trees. Tree `t` draws from seed `seed + t`.
pub fn forest_fit<T: Scalar>(x: &[Vec<T>], y: &[usize], n_classes: usize, cfg: &ForestConfig) -> Result<ForestModel<T>> {
    let d = check_xy(x, y, n_classes)?;
    if cfg.trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    let present = (0..n_classes).filter(|c| y.contains(c)).count();
    if present < 2 {
        return Err(Error::Insufficient("training data holds a single class".into()));
    }
    let mtry = cfg.features_per_split.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
    if mtry == 0 || mtry > d {
        return Err(Error::InvalidArgument(format!("features_per_split {mtry} not in 1..={d}")));
    }
    let n = x.len();
    let grown: Vec<(DecisionTree<T>, Vec<T>)> = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(t as u64));
            let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder {
                x,
                y,
                n_classes,
                max_depth: cfg.max_depth,
                mtry,
                nodes: Vec::new(),
                importance: vec![T::zero(); d],
            };
            b.grow(&boot, 0, &mut rng);
            (DecisionTree { nodes: b.nodes }, b.importance)
        })
        .collect();
    let mut importance = vec![T::zero(); d];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, imp) in grown {
        for (a, v) in importance.iter_mut().zip(imp) {
            *a = *a + v;
        }
        trees.push(tree);
    }
    let total = importance.iter().fold(T::zero(), |a, &b| a + b);
    if total > T::zero() {
        importance.iter_mut().for_each(|v| *v = *v / total);
    }
    Ok(ForestModel {
        config: *cfg,
        n_classes,
        n_features: d,
        trees,
        feature_importances: importance,
        validation_accuracy: None,
        test_accuracy: None,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSplit<T> {
    pub train_x: Vec<Vec<T>>,
    pub train_y: Vec<usize>,
    pub val_x: Vec<Vec<T>>,
    pub val_y: Vec<usize>,
    pub test_x: Vec<Vec<T>>,
    pub test_y: Vec<usize>,
}

/// Splits rows already in rank order into train/validation/test, taking the
/// first half of each class for training, the next quarter for validation and
/// the rest for testing.
pub fn rank_order_split<T: Scalar>(rows: &[(Vec<T>, usize)], n_classes: usize) -> DataSplit<T> {
    let mut split = DataSplit::default();
    for c in 0..n_classes {
        let members: Vec<&(Vec<T>, usize)> = rows.iter().filter(|(_, y)| *y == c).collect();
        let m = members.len();
        let train_end = m.div_ceil(2);
        let val_end = train_end + (m - train_end).div_ceil(2);
        for (k, (row, y)) in members.into_iter().enumerate() {
            let (xs, ys) = if k < train_end {
                (&mut split.train_x, &mut split.train_y)
            } else if k < val_end {
                (&mut split.val_x, &mut split.val_y)
            } else {
                (&mut split.test_x, &mut split.test_y)
            };
            xs.push(row.clone());
            ys.push(*y);
        }
    }
    split
}

/// Fits on the training slice and records validation and test accuracy.
pub fn forest_train<T: Scalar>(split: &DataSplit<T>, n_classes: usize, cfg: &ForestConfig) -> Result<ForestModel<T>> {
    let mut model = forest_fit(&split.train_x, &split.train_y, n_classes, cfg)?;
    model.validation_accuracy = model.accuracy(&split.val_x, &split.val_y);
    model.test_accuracy = model.accuracy(&split.test_x, &split.test_y);
    Ok(model)
}
