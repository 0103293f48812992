//! Multiclass gradient-boosted regression trees with a softmax objective.
//!
//! Each round fits one tree per class to the softmax gradient `g = p - y` and
//! hessian `h = p (1 - p)`. Splits maximise the second-order gain
//! `G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)` and leaves take the
//! Newton step `-G/(H+lambda)`, scaled by the learning rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegNode {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
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
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub min_child_weight: f64,
}

const MIN_HESSIAN: f64 = 1e-16;
const MIN_PRIOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbt {
    /// `rounds[r][c]` is the class-`c` tree of round `r`.
    pub rounds: Vec<Vec<RegTree>>,
    pub learning_rate: f64,
    /// Log class priors on the training set.
    pub init_scores: Vec<f64>,
    pub n_features: usize,
    pub n_classes: usize,
}

pub(crate) fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    scores.iter_mut().for_each(|s| *s /= sum);
}

/// Mean multiclass cross-entropy of raw scores (row-major `n x k`).
pub fn cross_entropy(scores: &[f64], y: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for (i, &c) in y.iter().enumerate() {
        let row = &scores[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += lse - row[c];
    }
    total / y.len() as f64
}

struct RegBuilder<'a> {
    x: &'a Matrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostParams,
    nodes: Vec<RegNode>,
    /// Leaf value reached by each training row.
    fitted: Vec<f64>,
    buf: Vec<(f64, usize)>,
}

impl RegBuilder<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let slot = self.nodes.len();
        self.nodes.push(RegNode::Leaf { value: 0.0 });
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();

        let mut best: Option<(usize, f64, f64)> = None;
        if depth < self.params.max_depth && rows.len() >= 2 {
            let parent = self.score(g, h);
            for f in 0..self.x.n_cols() {
                self.buf.clear();
                self.buf.extend(rows.iter().map(|&r| (self.x.get(r, f), r)));
                self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (mut gl, mut hl) = (0.0, 0.0);
                for i in 0..self.buf.len() - 1 {
                    let (v, r) = self.buf[i];
                    gl += self.grad[r];
                    hl += self.hess[r];
                    let next = self.buf[i + 1].0;
                    if v == next {
                        continue;
                    }
                    let (gr, hr) = (g - gl, h - hl);
                    if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                        continue;
                    }
                    let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
                    if gain > 0.0 && best.is_none_or(|b| gain > b.2) {
                        let mid = v + (next - v) / 2.0;
                        let thr = if mid < next { mid } else { v };
                        best = Some((f, thr, gain));
                    }
                }
            }
        }

        match best {
            Some((feature, threshold, _)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| self.x.get(i, feature) <= threshold);
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[slot] = RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
            None => {
                let value = -g / (h + self.params.lambda);
                for &r in &rows {
                    self.fitted[r] = value;
                }
                self.nodes[slot] = RegNode::Leaf { value };
            }
        }
        slot
    }
}

impl Gbt {
    pub(crate) fn fit(x: &Matrix, y: &[usize], n_classes: usize, params: &BoostParams) -> Self {
        let n = x.n_rows();
        let k = n_classes;
        let mut counts = vec![0usize; k];
        for &c in y {
            counts[c] += 1;
        }
        let init_scores: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64 / n as f64).max(MIN_PRIOR).ln())
            .collect();
        let mut scores: Vec<f64> = (0..n).flat_map(|_| init_scores.iter().copied()).collect();
        let mut rounds = Vec::with_capacity(params.n_rounds);
        let mut proba = vec![0.0; n * k];

        for _ in 0..params.n_rounds {
            proba.copy_from_slice(&scores);
            proba.chunks_exact_mut(k).for_each(softmax_in_place);
            let trees: Vec<(RegTree, Vec<f64>)> = (0..k)
                .into_par_iter()
                .map(|c| {
                    let grad: Vec<f64> = (0..n)
                        .map(|i| proba[i * k + c] - if y[i] == c { 1.0 } else { 0.0 })
                        .collect();
                    let hess: Vec<f64> = (0..n)
                        .map(|i| {
                            let p = proba[i * k + c];
                            (p * (1.0 - p)).max(MIN_HESSIAN)
                        })
                        .collect();
                    let mut b = RegBuilder {
                        x,
                        grad: &grad,
                        hess: &hess,
                        params,
                        nodes: Vec::new(),
                        fitted: vec![0.0; n],
                        buf: Vec::with_capacity(n),
                    };
                    b.build((0..n).collect(), 0);
                    (RegTree { nodes: b.nodes }, b.fitted)
                })
                .collect();
            let mut round = Vec::with_capacity(k);
            for (c, (tree, fitted)) in trees.into_iter().enumerate() {
                for i in 0..n {
                    scores[i * k + c] += params.learning_rate * fitted[i];
                }
                round.push(tree);
            }
            rounds.push(round);
        }
        Self {
            rounds,
            learning_rate: params.learning_rate,
            init_scores,
            n_features: x.n_cols(),
            n_classes,
        }
    }

    pub fn raw_scores_row(&self, row: &[f64], out: &mut [f64]) {
        self.staged_scores_row(row, self.rounds.len(), out);
    }

    fn staged_scores_row(&self, row: &[f64], n_rounds: usize, out: &mut [f64]) {
        out.copy_from_slice(&self.init_scores);
        for round in &self.rounds[..n_rounds] {
            for (o, t) in out.iter_mut().zip(round) {
                *o += self.learning_rate * t.predict_row(row);
            }
        }
    }

    pub fn proba_row(&self, row: &[f64], out: &mut [f64]) {
        self.raw_scores_row(row, out);
        softmax_in_place(out);
    }

    /// Cross-entropy on `(x, y)` after 0, 1, ..., `rounds` boosting rounds.
    pub fn staged_cross_entropy(&self, x: &Matrix, y: &[usize]) -> Vec<f64> {
        let k = self.n_classes;
        let mut scores: Vec<f64> = (0..x.n_rows())
            .flat_map(|_| self.init_scores.iter().copied())
            .collect();
        let mut out = vec![cross_entropy(&scores, y, k)];
        for round in &self.rounds {
            for (i, row) in x.rows().enumerate() {
                for (c, t) in round.iter().enumerate() {
                    scores[i * k + c] += self.learning_rate * t.predict_row(row);
                }
            }
            out.push(cross_entropy(&scores, y, k));
        }
        out
    }
}
