use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{invalid, Result};

/// Hyper-parameters of triplet training with Adam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripletLossConfig {
    /// Margin α between positive and negative squared distances.
    pub margin: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TripletLossConfig {
    fn default() -> Self {
        TripletLossConfig { margin: 1.0, learning_rate: 0.001, batch_size: 8, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl TripletLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return invalid(format!("margin must be positive, got {}", self.margin));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return invalid(format!("learning rate must be non-negative, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return invalid("batch size must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return invalid("adam betas must lie in [0, 1) and eps must be positive");
        }
        Ok(())
    }
}

/// `max(0, ‖a − p‖² − ‖a − n‖² + α)`.
pub fn triplet_loss(anchor: &[f32], positive: &[f32], negative: &[f32], margin: f64) -> Result<f64> {
    check_dims(anchor, positive, negative)?;
    let (dp, dn) = distances(anchor, positive, negative);
    Ok((dp - dn + margin).max(0.0))
}

fn check_dims<T>(a: &[T], p: &[T], n: &[T]) -> Result<()> {
    if a.len() != p.len() || a.len() != n.len() {
        return invalid(format!("feature dimensions differ: {} / {} / {}", a.len(), p.len(), n.len()));
    }
    Ok(())
}

fn distances<T: Real>(a: &[T], p: &[T], n: &[T]) -> (f64, f64) {
    let sq = |x: &[T], y: &[T]| -> f64 {
        x.iter().zip(y).map(|(&u, &v)| {
            let d = u.to_f64().unwrap_or(f64::NAN) - v.to_f64().unwrap_or(f64::NAN);
            d * d
        }).sum()
    };
    (sq(a, p), sq(a, n))
}

/// Loss and its gradients with respect to the three features. The hinge
/// contributes nothing when its argument is exactly zero.
pub(crate) fn triplet_loss_grad<T: Real>(a: &[T], p: &[T], n: &[T], margin: f64) -> Result<(f64, Option<[Vec<T>; 3]>)> {
    check_dims(a, p, n)?;
    let (dp, dn) = distances(a, p, n);
    let arg = dp - dn + margin;
    if arg <= 0.0 {
        return Ok((0.0, None));
    }
    let two = T::one() + T::one();
    let ga = p.iter().zip(n).map(|(&p, &n)| two * (n - p)).collect();
    let gp = a.iter().zip(p).map(|(&a, &p)| two * (p - a)).collect();
    let gn = a.iter().zip(n).map(|(&a, &n)| two * (a - n)).collect();
    Ok((arg, Some([ga, gp, gn])))
}
