use std::collections::HashMap;

use super::{keypoint_order, Keypoint};
use crate::error::{invalid, Result};

/// Greedy non-maxima suppression. Keypoints are visited in
/// [`keypoint_order`]; one is kept iff no kept keypoint lies within
/// `radius` (inclusive). The result does not depend on input order.
pub fn nms(keypoints: &[Keypoint], radius: f64) -> Result<Vec<Keypoint>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return invalid(format!("nms radius must be positive, got {radius}"));
    }
    let mut sorted = keypoints.to_vec();
    sorted.sort_by(keypoint_order);
    let cell = |v: f64| (v / radius).floor() as i64;
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let mut kept: Vec<Keypoint> = Vec::new();
    for kp in sorted {
        let c = [cell(kp.position.x), cell(kp.position.y), cell(kp.position.z)];
        let mut suppressed = false;
        'search: for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(list) = buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if list.iter().any(|&i| (kept[i].position - kp.position).norm() <= radius) {
                            suppressed = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        if !suppressed {
            buckets.entry(c).or_default().push(kept.len());
            kept.push(kp);
        }
    }
    Ok(kept)
}
