//! Random forest of CART trees with bootstrap rows and per-split feature sampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeGrowth};
use crate::matrix::Matrix;
use crate::seed::{rng_for, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    /// Features drawn at each split.
    pub max_features: usize,
    pub n_features: usize,
    pub n_classes: usize,
}

pub(crate) struct ForestGrowth {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeGrowth,
}

impl RandomForest {
    /// Tree `t` draws its bootstrap sample and split features from a generator
    /// keyed by `(seed, t)`; trees are assembled in index order.
    pub(crate) fn fit(
        x: &Matrix,
        y: &[usize],
        n_classes: usize,
        growth: &ForestGrowth,
        seed: u64,
    ) -> Self {
        let n = x.n_rows();
        let d = x.n_cols();
        let max_features = growth.tree.max_features.unwrap_or(d).clamp(1, d.max(1));
        let tree_growth = TreeGrowth {
            max_features: Some(max_features),
            ..growth.tree
        };
        let trees = (0..growth.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(seed, streams::FOREST_TREE, t as u64);
                let rows: Vec<usize> = if growth.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::grow(x, y, rows, n_classes, &tree_growth, Some(&mut rng))
            })
            .collect();
        Self {
            trees,
            max_features,
            n_features: d,
            n_classes,
        }
    }

    /// Mean of the trees' leaf class frequencies.
    pub fn proba_row(&self, row: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.trees {
            for (o, p) in out.iter_mut().zip(t.leaf_for(row).0) {
                *o += p;
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= k);
    }
}
