//! CART classification tree with Gini impurity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Tree node. Internal nodes send `x[feature] <= threshold` to `left`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
        class: usize,
    },
}

/// Nodes are stored flat in pre-order; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TreeGrowth {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_impurity_decrease: f64,
    /// Features drawn per split; `None` evaluates all of them.
    pub max_features: Option<usize>,
}

/// Index of the largest entry, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn leaf(counts: &[usize]) -> TreeNode {
    let total: usize = counts.iter().sum();
    let proba: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    let class = argmax(&proba);
    TreeNode::Leaf { proba, class }
}

/// `n * gini` for a count vector.
fn weighted_gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: usize = counts.iter().map(|&c| c * c).sum();
    n as f64 - sq as f64 / n as f64
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Best split over `features` (ascending). Strict improvement keeps the lowest
/// feature index and then the lowest threshold on ties.
fn best_split(
    x: &Matrix,
    y: &[usize],
    rows: &[usize],
    features: &[usize],
    n_classes: usize,
    buf: &mut Vec<(f64, usize)>,
) -> Option<BestSplit> {
    let m = rows.len();
    let mut total = vec![0usize; n_classes];
    for &r in rows {
        total[y[r]] += 1;
    }
    let mut best: Option<BestSplit> = None;
    let mut left = vec![0usize; n_classes];
    let mut right = vec![0usize; n_classes];
    for &f in features {
        buf.clear();
        buf.extend(rows.iter().map(|&r| (x.get(r, f), y[r])));
        buf.sort_by(|a, b| a.0.total_cmp(&b.0));
        if buf[0].0 == buf[m - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&total);
        for i in 0..m - 1 {
            let (v, c) = buf[i];
            left[c] += 1;
            right[c] -= 1;
            let next = buf[i + 1].0;
            if v == next {
                continue;
            }
            let nl = i + 1;
            let impurity = weighted_gini(&left, nl) + weighted_gini(&right, m - nl);
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: midpoint(v, next),
                    impurity,
                });
            }
        }
    }
    best
}

fn sample_features(rng: &mut ChaCha8Rng, d: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut pool: Vec<usize> = (0..d).collect();
    let k = k.min(d);
    for i in 0..k {
        let j = rng.random_range(i..d);
        pool.swap(i, j);
    }
    let mut rest = pool.split_off(k);
    pool.sort_unstable();
    rest.sort_unstable();
    (pool, rest)
}

impl DecisionTree {
    /// Grows a tree on `rows` of `x`. A generator is only needed when
    /// `growth.max_features` restricts the candidate features.
    pub(crate) fn grow(
        x: &Matrix,
        y: &[usize],
        rows: Vec<usize>,
        n_classes: usize,
        growth: &TreeGrowth,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let d = x.n_cols();
        let n_total = rows.len().max(1) as f64;
        let all: Vec<usize> = (0..d).collect();
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut buf = Vec::with_capacity(rows.len());
        // (node slot, rows, depth)
        let mut stack = vec![(0usize, rows, 0usize)];
        nodes.push(TreeNode::Leaf {
            proba: Vec::new(),
            class: 0,
        });
        while let Some((slot, rows, depth)) = stack.pop() {
            let mut counts = vec![0usize; n_classes];
            for &r in &rows {
                counts[y[r]] += 1;
            }
            let m = rows.len();
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_ok = growth.max_depth.is_none_or(|md| depth < md);
            if pure || !depth_ok || m < growth.min_samples_split.max(2) {
                nodes[slot] = leaf(&counts);
                continue;
            }
            let split = match (growth.max_features, rng.as_deref_mut()) {
                (Some(k), Some(rng)) if k < d => {
                    let (drawn, rest) = sample_features(rng, d, k);
                    best_split(x, y, &rows, &drawn, n_classes, &mut buf)
                        .or_else(|| best_split(x, y, &rows, &rest, n_classes, &mut buf))
                }
                _ => best_split(x, y, &rows, &all, n_classes, &mut buf),
            };
            let Some(split) = split else {
                nodes[slot] = leaf(&counts);
                continue;
            };
            let decrease = (weighted_gini(&counts, m) - split.impurity) / n_total;
            if decrease < growth.min_impurity_decrease {
                nodes[slot] = leaf(&counts);
                continue;
            }
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .into_iter()
                .partition(|&i| x.get(i, split.feature) <= split.threshold);
            let left = nodes.len();
            let right = left + 1;
            for _ in 0..2 {
                nodes.push(TreeNode::Leaf {
                    proba: Vec::new(),
                    class: 0,
                });
            }
            nodes[slot] = TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left,
                right,
            };
            stack.push((right, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Self {
            nodes,
            n_features: d,
            n_classes,
        }
    }

    pub fn leaf_for(&self, row: &[f64]) -> (&[f64], usize) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { proba, class } => return (proba, *class),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        !self.nodes.is_empty()
            && self.nodes.iter().all(|n| match n {
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } => {
                    *feature < self.n_features
                        && *left < self.nodes.len()
                        && *right < self.nodes.len()
                        && threshold.is_finite()
                }
                TreeNode::Leaf { proba, class } => {
                    proba.len() == self.n_classes && *class < self.n_classes
                }
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn growth() -> TreeGrowth {
        TreeGrowth {
            max_depth: None,
            min_samples_split: 2,
            min_impurity_decrease: 0.0,
            max_features: None,
        }
    }

    #[test]
    fn single_threshold_split() {
        let x = Matrix::from_rows(&[[-2.0, 5.0], [-1.0, 1.0], [1.0, 4.0], [3.0, 2.0]]).unwrap();
        let y = [0, 0, 1, 1];
        let t = DecisionTree::grow(&x, &y, (0..4).collect(), 2, &growth(), None);
        assert_eq!(t.nodes.len(), 3);
        match &t.nodes[0] {
            TreeNode::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.0);
            }
            _ => panic!("root should split"),
        }
        for (i, row) in x.rows().enumerate() {
            assert_eq!(t.leaf_for(row).1, y[i]);
        }
    }

    #[test]
    fn xor_needs_zero_gain_split() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]).unwrap();
        let y = [0, 1, 1, 0];
        let t = DecisionTree::grow(&x, &y, (0..4).collect(), 2, &growth(), None);
        for (i, row) in x.rows().enumerate() {
            assert_eq!(t.leaf_for(row).1, y[i]);
        }
    }

    #[test]
    fn conflicting_duplicates_break_to_lowest_code() {
        let x = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let t = DecisionTree::grow(&x, &[1, 0], vec![0, 1], 2, &growth(), None);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.leaf_for(&[1.0]), (&[0.5, 0.5][..], 0));
    }

    #[test]
    fn depth_limit() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let g = TreeGrowth {
            max_depth: Some(1),
            ..growth()
        };
        let t = DecisionTree::grow(&x, &[0, 1, 0, 1], (0..4).collect(), 2, &g, None);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert!(midpoint(lo, hi) < hi);
    }
}
