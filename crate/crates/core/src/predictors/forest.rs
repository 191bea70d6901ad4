use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureSchema};
use super::ModelMeta;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::land::{ActionDelta, CellContext};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or hit `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fit each tree on a resample drawn with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestPredictor {
    pub schema: FeatureSchema,
    pub params: ForestParams,
    pub y_min: f64,
    pub y_max: f64,
    pub trees: Vec<RegressionTree>,
    pub meta: ModelMeta,
}

impl ForestPredictor {
    pub fn predict_features(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        // Averaging can round a hair outside the leaf range.
        (sum / self.trees.len() as f64).clamp(self.y_min, self.y_max)
    }

    pub fn predict(&self, ctx: &CellContext, delta: &ActionDelta) -> Result<f64> {
        let p = self.schema.len();
        let bad_feature = self.trees.iter().flat_map(|t| &t.nodes).any(|n| match n {
            Node::Split { feature, .. } => *feature >= p,
            Node::Leaf { .. } => false,
        });
        if bad_feature || self.trees.is_empty() {
            return Err(Error::SchemaMismatch("trees"));
        }
        Ok(self.predict_features(&featurize(ctx, delta, &self.schema)))
    }
}

/// Features tried at each split: a third of them, rounded up.
pub fn features_per_split(p: usize) -> usize {
    p.div_ceil(3).max(1)
}

struct TreeBuilder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    max_depth: Option<usize>,
    min_leaf: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64
    }

    fn build(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let at = self.nodes.len();
        let mean = self.mean(idx);
        self.nodes.push(Node::Leaf { value: mean });

        let depth_left = self.max_depth.is_none_or(|d| depth < d);
        if !depth_left || idx.len() < 2 * self.min_leaf {
            return at;
        }
        let first = self.ys[idx[0]];
        if idx.iter().all(|&i| self.ys[i] == first) {
            return at;
        }

        let p = self.xs[0].len();
        let candidates = index::sample(rng, p, self.mtry.min(p));
        let mut best: Option<(f64, usize, f64)> = None;
        let total: f64 = idx.iter().map(|&i| self.ys[i]).sum();
        let n = idx.len();
        let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
        for feature in candidates.iter() {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.xs[i][feature], self.ys[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[n - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += sorted[k].1;
                let n_left = k + 1;
                if n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let right_sum = total - left_sum;
                // Maximizing this is equivalent to minimizing child SSE.
                let score = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    let threshold = 0.5 * (sorted[k].0 + sorted[k + 1].0);
                    best = Some((score, feature, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return at;
        };

        let mut split = 0;
        for k in 0..idx.len() {
            if self.xs[idx[k]][feature] <= threshold {
                idx.swap(k, split);
                split += 1;
            }
        }
        if split == 0 || split == idx.len() {
            return at;
        }
        let (l, r) = idx.split_at_mut(split);
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

/// Bagged regression trees. Tree `k` draws from its own RNG stream, so the
/// result does not depend on how trees are scheduled across threads.
pub fn fit_forest(
    ds: &Dataset,
    schema: FeatureSchema,
    params: &ForestParams,
) -> Result<ForestPredictor> {
    schema.validate()?;
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::Validation(
            "n_trees and min_leaf must be positive".into(),
        ));
    }
    if ds.len() < params.min_leaf || ds.is_empty() {
        return Err(Error::Validation(format!(
            "forest needs at least {} rows, got {}",
            params.min_leaf.max(1),
            ds.len()
        )));
    }
    let xs: Vec<Vec<f64>> = ds
        .rows
        .iter()
        .map(|r| featurize(&r.ctx, &r.delta, &schema))
        .collect();
    let ys: Vec<f64> = ds.rows.iter().map(|r| r.eluc).collect();
    let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mtry = features_per_split(schema.len());
    let n = xs.len();

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(k as u64);
            let mut idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                xs: &xs,
                ys: &ys,
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
                mtry,
                nodes: Vec::new(),
            };
            builder.build(&mut idx, 0, &mut rng);
            RegressionTree {
                nodes: builder.nodes,
            }
        })
        .collect();

    Ok(ForestPredictor {
        schema,
        params: *params,
        y_min,
        y_max,
        trees,
        meta: ModelMeta {
            train_years: ds.year_range(),
            region_tag: ds.region_tag.clone(),
            seed: Some(params.seed),
            ..ModelMeta::default()
        },
    })
}
