use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Row-major feature vectors of equal dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return invalid(format!("feature data of length {} is not a multiple of dim {dim}", data.len()));
        }
        Ok(FeatureMatrix { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != dim) {
            return invalid("feature rows differ in dimension");
        }
        Ok(FeatureMatrix { dim, data: rows.concat() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// A feature-space neighbor: indices into the source and target sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatch {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
}

/// Exact k-nearest-neighbor search by L2 distance. For each source row, up to
/// `k` target rows in ascending distance, ties broken by lower target index.
pub fn match_knn(source: &FeatureMatrix, target: &FeatureMatrix, k: usize) -> Result<Vec<FeatureMatch>> {
    if target.is_empty() || source.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    if source.dim() != target.dim() {
        return invalid(format!("feature dimensions differ: {} vs {}", source.dim(), target.dim()));
    }
    let k = k.min(target.len());
    let mut out = Vec::with_capacity(source.len() * k);
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(target.len());
    for (si, s) in source.rows().enumerate() {
        dists.clear();
        dists.extend(target.rows().enumerate().map(|(ti, t)| (squared_l2(s, t), ti)));
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
            dists.truncate(k);
        }
        dists.sort_by(cmp);
        out.extend(dists.iter().map(|&(d, ti)| FeatureMatch { source: si, target: ti, distance: d.sqrt() }));
    }
    Ok(out)
}

#[inline]
pub(crate) fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = (*x - *y) as f64;
        acc += d * d;
    }
    acc
}
