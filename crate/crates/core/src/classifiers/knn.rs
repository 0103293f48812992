//! Brute-force k-nearest-neighbour classifier.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub k: usize,
    pub n_classes: usize,
}

impl Knn {
    /// Stored-row indices of the `k` nearest rows (Euclidean), nearest first;
    /// equal distances go to the lower row index.
    pub fn neighbours(&self, query: &[f64]) -> Vec<usize> {
        let k = self.k.min(self.y.len());
        let mut cand: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, by);
            cand.truncate(k);
        }
        cand.sort_by(by);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    /// Neighbour vote fractions.
    pub fn proba_row(&self, row: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let nn = self.neighbours(row);
        let w = 1.0 / nn.len() as f64;
        for i in nn {
            out[self.y[i]] += w;
        }
    }
}
