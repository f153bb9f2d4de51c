use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{judge_instance, InstanceRecord, Judgement, Prediction, PredictionStatus, ThresholdPair};
use crate::error::{Result, RioError};

/// Per-scan-pair ground truth: `{scan_pair_id, instances: [...]}`. Extra keys
/// (as in full dataset manifests) are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub scan_pair_id: String,
    pub instances: Vec<InstanceRecord>,
}

/// Evaluation class names, in table order.
pub const EVAL_CLASSES: [&str; 7] = ["seating", "table / cabinet", "bed / sofa", "appliances", "cushions", "items", "structure"];
pub const OTHER_CLASS: &str = "other";

/// Maps raw instance labels onto the evaluation classes.
///
/// Exact label matches win; otherwise the first keyword contained in the
/// lower-cased label decides. Unmatched labels map to `"other"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMap {
    #[serde(default)]
    pub exact: BTreeMap<String, String>,
    #[serde(default)]
    pub keywords: Vec<(String, String)>,
}

impl Default for ClassMap {
    fn default() -> Self {
        let table: &[(&str, &[&str])] = &[
            ("seating", &["chair", "stool", "bench", "seat"]),
            ("table / cabinet", &["table", "commode", "shelf", "shelves", "cabinet", "desk", "nightstand"]),
            ("bed / sofa", &["bed", "sofa", "couch", "upholstery"]),
            ("appliances", &["appliance", "toilet", "sink", "bathtub", "oven", "fridge", "washing", "tv"]),
            ("cushions", &["pillow", "cushion", "bean bag", "ottoman"]),
            ("items", &["box", "item", "basket", "bag", "lamp", "plant", "bottle", "ball", "bin"]),
            ("structure", &["window", "door"]),
        ];
        let keywords = table
            .iter()
            .flat_map(|(class, words)| words.iter().map(move |w| (w.to_string(), class.to_string())))
            .collect();
        ClassMap { exact: BTreeMap::new(), keywords }
    }
}

impl ClassMap {
    pub fn classify(&self, label: &str) -> String {
        if let Some(c) = self.exact.get(label) {
            return c.clone();
        }
        let lower = label.to_lowercase();
        self.keywords
            .iter()
            .find(|(k, _)| lower.contains(k.as_str()))
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| OTHER_CLASS.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: ThresholdPair,
    /// Percentage of ground-truth instances aligned within the threshold.
    pub recall: f64,
    pub hits: usize,
    /// Median rotation error (degrees) over non-failed predictions.
    pub mre_deg: Option<f64>,
    /// Median translation error (meters) over non-failed predictions.
    pub mte_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub instances: usize,
    /// Recall percentage per threshold pair.
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub instances: usize,
    pub attempted: usize,
    pub failed: usize,
    /// Ground-truth instances without a prediction row (scored as misses).
    pub missing: usize,
    pub thresholds: Vec<ThresholdReport>,
    /// Rows for the listed evaluation classes that occur in the ground truth.
    pub per_class: BTreeMap<String, ClassRow>,
    /// Mean of the per-class recalls, per threshold pair.
    pub class_average: Vec<Option<f64>>,
    pub judgements: Vec<(String, Judgement)>,
}

/// Scores a prediction set against ground truth.
///
/// Recall counts failed and missing predictions as misses; the median errors
/// use only predictions that produced a pose.
pub fn benchmark(
    predictions: &[Prediction],
    ground_truth: &[GroundTruthManifest],
    class_map: &ClassMap,
    thresholds: &[ThresholdPair],
) -> Result<EvalReport> {
    let mut known: HashMap<(&str, u32), &InstanceRecord> = HashMap::new();
    for m in ground_truth {
        for r in &m.instances {
            if known.insert((m.scan_pair_id.as_str(), r.instance_id), r).is_some() {
                return Err(RioError::Scoring(format!("duplicate ground truth for {}/{}", m.scan_pair_id, r.instance_id)));
            }
        }
    }
    let mut by_key: HashMap<(&str, u32), &Prediction> = HashMap::new();
    let mut unknown = Vec::new();
    for p in predictions {
        let key = (p.scan_pair_id.as_str(), p.instance_id);
        if !known.contains_key(&key) {
            unknown.push(format!("{}/{}", p.scan_pair_id, p.instance_id));
        } else if by_key.insert(key, p).is_some() {
            return Err(RioError::Scoring(format!("duplicate prediction for {}/{}", p.scan_pair_id, p.instance_id)));
        }
    }
    if !unknown.is_empty() {
        return Err(RioError::Scoring(format!("predictions for unknown instances: {}", unknown.join(", "))));
    }

    let n_thr = thresholds.len();
    let mut judgements = Vec::new();
    let mut hits = vec![0usize; n_thr];
    let mut class_hits: BTreeMap<String, (usize, Vec<usize>)> = BTreeMap::new();
    let (mut attempted, mut failed, mut missing) = (0, 0, 0);
    let mut rot_errs = Vec::new();
    let mut trans_errs = Vec::new();

    for m in ground_truth {
        for r in &m.instances {
            let j = match by_key.get(&(m.scan_pair_id.as_str(), r.instance_id)) {
                Some(p) => {
                    attempted += 1;
                    if p.status == PredictionStatus::Failed {
                        failed += 1;
                    }
                    judge_instance(p, r, thresholds)?
                }
                None => {
                    log::warn!("no prediction for {}/{}; counted as a miss", m.scan_pair_id, r.instance_id);
                    missing += 1;
                    Judgement {
                        instance_id: r.instance_id,
                        failed: true,
                        rotation_error_deg: None,
                        translation_error_m: None,
                        candidate: None,
                        hits: vec![false; n_thr],
                    }
                }
            };
            if let (Some(re), Some(te)) = (j.rotation_error_deg, j.translation_error_m) {
                rot_errs.push(re);
                trans_errs.push(te);
            }
            let class = class_map.classify(&r.class_label);
            let entry = class_hits.entry(class).or_insert_with(|| (0, vec![0; n_thr]));
            entry.0 += 1;
            for (k, h) in j.hits.iter().enumerate() {
                if *h {
                    hits[k] += 1;
                    entry.1[k] += 1;
                }
            }
            judgements.push((m.scan_pair_id.clone(), j));
        }
    }

    let instances = judgements.len();
    let pct = |h: usize, n: usize| if n == 0 { 0.0 } else { 100.0 * h as f64 / n as f64 };
    let mre = median(&mut rot_errs);
    let mte = median(&mut trans_errs);
    let threshold_reports = thresholds
        .iter()
        .zip(&hits)
        .map(|(t, &h)| ThresholdReport { threshold: *t, recall: pct(h, instances), hits: h, mre_deg: mre, mte_m: mte })
        .collect();

    let per_class: BTreeMap<String, ClassRow> = class_hits
        .into_iter()
        .filter(|(c, _)| c != OTHER_CLASS)
        .map(|(c, (n, h))| (c, ClassRow { instances: n, recall: h.iter().map(|&x| pct(x, n)).collect() }))
        .collect();
    let class_average = (0..n_thr)
        .map(|k| {
            if per_class.is_empty() {
                None
            } else {
                Some(per_class.values().map(|r| r.recall[k]).sum::<f64>() / per_class.len() as f64)
            }
        })
        .collect();

    Ok(EvalReport {
        instances,
        attempted,
        failed,
        missing,
        thresholds: threshold_reports,
        per_class,
        class_average,
        judgements,
    })
}

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

impl EvalReport {
    /// Aligned plain-text tables: overall recall/MRE/MTE per threshold, then
    /// recall per evaluation class.
    pub fn to_table(&self, method: &str) -> String {
        let fmt_opt = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"));
        let mut header = format!("{:<24}", "Method");
        let mut row = format!("{method:<24}");
        for t in &self.thresholds {
            let label = format!("Recall < {}m, {}°", t.threshold.translation_m, t.threshold.rotation_deg);
            let _ = write!(header, " | {label:>20} {:>9} {:>8}", "MRE [deg]", "MTE [m]");
            let _ = write!(row, " | {:>20.2} {:>9} {:>8}", t.recall, fmt_opt(t.mre_deg, 2), fmt_opt(t.mte_m, 4));
        }
        let mut out = String::new();
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{}", "-".repeat(header.chars().count()));
        let _ = writeln!(out, "{row}");
        let _ = writeln!(
            out,
            "\ninstances: {}  attempted: {}  failed: {}  missing: {}\n",
            self.instances, self.attempted, self.failed, self.missing
        );

        let mut header = format!("{:<18} {:>5}", "class", "n");
        for t in &self.thresholds {
            let _ = write!(header, " {:>14}", format!("<{}m,{}°", t.threshold.translation_m, t.threshold.rotation_deg));
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{}", "-".repeat(header.chars().count()));
        for class in EVAL_CLASSES {
            if let Some(r) = self.per_class.get(class) {
                let mut line = format!("{class:<18} {:>5}", r.instances);
                for v in &r.recall {
                    let _ = write!(line, " {v:>14.2}");
                }
                let _ = writeln!(out, "{line}");
            }
        }
        let mut line = format!("{:<18} {:>5}", "avg.", "");
        for v in &self.class_average {
            let _ = write!(line, " {:>14}", fmt_opt(*v, 2));
        }
        let _ = writeln!(out, "{line}");
        out
    }
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Reads one ground-truth manifest object or an array of them.
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthManifest>> {
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(path)?)?;
    Ok(match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        other => vec![serde_json::from_value(other)?],
    })
}
