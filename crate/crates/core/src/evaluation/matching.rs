use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Target recall of the operating point.
pub const OPERATING_RECALL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrcPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Confusion counts when pairs with distance `≤ threshold` are declared matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.r#fn
    }
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.r#fn)
    }
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Matching quality at the smallest distance threshold reaching 95% recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingMetrics {
    pub threshold: f64,
    pub confusion: Confusion,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub fpr: f64,
    pub error_rate: f64,
    /// One point per distinct distance, ascending threshold.
    pub prc: Vec<PrcPoint>,
}

/// Sweeps a descriptor-distance threshold over positive (matching) and
/// negative (non-matching) pair distances.
pub fn keypoint_matching_metrics(positive: &[f64], negative: &[f64]) -> Result<MatchingMetrics> {
    if positive.is_empty() {
        return invalid("keypoint_matching_metrics needs at least one positive distance");
    }
    if positive.iter().chain(negative).any(|d| d.is_nan()) {
        return invalid("distances must not be NaN");
    }
    let mut pos = positive.to_vec();
    let mut neg = negative.to_vec();
    pos.sort_by(|a, b| a.total_cmp(b));
    neg.sort_by(|a, b| a.total_cmp(b));
    let mut thresholds: Vec<f64> = pos.iter().chain(&neg).copied().collect();
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();

    let (np, nn) = (pos.len(), neg.len());
    let mut prc = Vec::with_capacity(thresholds.len());
    let mut operating: Option<(f64, Confusion)> = None;
    let (mut ip, mut ineg) = (0usize, 0usize);
    for &t in &thresholds {
        while ip < np && pos[ip] <= t {
            ip += 1;
        }
        while ineg < nn && neg[ineg] <= t {
            ineg += 1;
        }
        let c = Confusion { tp: ip, fp: ineg, tn: nn - ineg, r#fn: np - ip };
        prc.push(PrcPoint { threshold: t, precision: c.precision(), recall: c.recall() });
        // integer form of recall ≥ 0.95
        if operating.is_none() && 100 * ip >= 95 * np {
            operating = Some((t, c));
        }
    }
    let (threshold, c) = operating.expect("the largest threshold reaches full recall");
    let precision = c.precision();
    let recall = c.recall();
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(MatchingMetrics {
        threshold,
        confusion: c,
        recall,
        f1,
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        fpr: ratio(c.fp, c.fp + c.tn),
        error_rate: ratio(c.fp + c.r#fn, c.total()),
        prc,
    })
}

pub fn write_prc_csv<W: Write>(mut w: W, prc: &[PrcPoint]) -> Result<()> {
    writeln!(w, "threshold,precision,recall")?;
    for p in prc {
        writeln!(w, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    Ok(())
}

/// Top-k placement of a positive among negatives: hit when fewer than `k`
/// negatives are at least as close to the anchor as the positive.
pub fn topk_metric(anchor: &[f32], positive: &[f32], negatives: &[Vec<f32>], k: usize) -> Result<bool> {
    if positive.len() != anchor.len() || negatives.iter().any(|n| n.len() != anchor.len()) {
        return invalid("feature dimensions differ");
    }
    let d_pos = squared_distance(anchor, positive);
    let ahead = negatives.iter().filter(|n| squared_distance(anchor, n) <= d_pos).count();
    Ok(ahead + 1 <= k)
}

pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ((*x as f64) - (*y as f64)).powi(2)).sum()
}
