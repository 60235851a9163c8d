//! Candidate-classification scoring: ROC AUC, FROC and CPM.
//!
//! A prediction hits a reference nodule when it lies strictly inside the
//! nodule's radius (half the annotated diameter) on the same scan. Several
//! predictions may hit one nodule; the nodule is detected once, at the
//! best score among its hits. Predictions that hit no nodule but fall
//! inside an excluded finding are dropped from both counts; every other
//! miss is a false positive.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::table::{self, RowError};

/// False positives per scan at which CPM averages sensitivity.
pub const OPERATING_POINTS: [f64; 7] = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("score {0} is not a finite value in [0, 1]")]
    InvalidScore(f64),
    #[error("scan count must be at least 1")]
    ZeroScans,
    #[error("reference nodule {index} has non-positive diameter {diameter}")]
    InvalidReference { index: usize, diameter: f64 },
    #[error("no reference nodules to score against")]
    NoReferenceNodules,
    #[error("no scored predictions")]
    NoPredictions,
    #[error("AUC needs both classes, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error(transparent)]
    Table(#[from] RowError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scan_id: String,
    pub world_pos: [f64; 3],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    entries: Vec<Prediction>,
    scan_count: usize,
}

impl PredictionSet {
    pub fn new(entries: Vec<Prediction>, scan_count: usize) -> Result<Self, EvalError> {
        if scan_count == 0 {
            return Err(EvalError::ZeroScans);
        }
        if let Some(p) = entries
            .iter()
            .find(|p| !(p.score.is_finite() && (0.0..=1.0).contains(&p.score)))
        {
            return Err(EvalError::InvalidScore(p.score));
        }
        Ok(Self {
            entries,
            scan_count,
        })
    }

    pub fn entries(&self) -> &[Prediction] {
        &self.entries
    }

    pub fn scan_count(&self) -> usize {
        self.scan_count
    }
}

/// Annotated nodule (or excluded finding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceNodule {
    pub scan_id: String,
    pub world_pos: [f64; 3],
    pub diameter_mm: f64,
}

impl ReferenceNodule {
    pub fn radius(&self) -> f64 {
        self.diameter_mm / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// True positive on the given reference nodule.
    Hit(usize),
    FalsePositive,
    /// Inside an excluded finding; not counted.
    Ignored,
}

/// Predictions with their outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub outcomes: Vec<Outcome>,
    pub scores: Vec<f64>,
    pub n_nodules: usize,
}

impl MatchResult {
    /// Scores and hit labels of the counted (non-ignored) predictions.
    pub fn scored(&self) -> (Vec<f64>, Vec<bool>) {
        self.outcomes
            .iter()
            .zip(&self.scores)
            .filter(|(o, _)| **o != Outcome::Ignored)
            .map(|(o, &s)| (s, matches!(o, Outcome::Hit(_))))
            .unzip()
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

fn by_scan(list: &[ReferenceNodule]) -> HashMap<&str, Vec<usize>> {
    let mut m: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, n) in list.iter().enumerate() {
        m.entry(n.scan_id.as_str()).or_default().push(i);
    }
    m
}

fn check_radii(list: &[ReferenceNodule]) -> Result<(), EvalError> {
    match list
        .iter()
        .enumerate()
        .find(|(_, n)| !(n.diameter_mm.is_finite() && n.diameter_mm > 0.0))
    {
        Some((index, n)) => Err(EvalError::InvalidReference {
            index,
            diameter: n.diameter_mm,
        }),
        None => Ok(()),
    }
}

/// Labels each prediction against the reference nodules. When a prediction
/// falls inside several nodules it is credited to the nearest one.
pub fn match_candidates(
    predictions: &PredictionSet,
    reference: &[ReferenceNodule],
    excluded: &[ReferenceNodule],
) -> Result<MatchResult, EvalError> {
    check_radii(reference)?;
    check_radii(excluded)?;
    let ref_idx = by_scan(reference);
    let excl_idx = by_scan(excluded);

    let outcomes = predictions
        .entries
        .iter()
        .map(|p| {
            let nearest = ref_idx
                .get(p.scan_id.as_str())
                .into_iter()
                .flatten()
                .map(|&i| (i, dist2(p.world_pos, reference[i].world_pos)))
                .filter(|&(i, d2)| d2 < reference[i].radius().powi(2))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, _)) = nearest {
                return Outcome::Hit(i);
            }
            let ignored = excl_idx
                .get(p.scan_id.as_str())
                .into_iter()
                .flatten()
                .any(|&i| dist2(p.world_pos, excluded[i].world_pos) < excluded[i].radius().powi(2));
            if ignored {
                Outcome::Ignored
            } else {
                Outcome::FalsePositive
            }
        })
        .collect();
    Ok(MatchResult {
        outcomes,
        scores: predictions.entries.iter().map(|p| p.score).collect(),
        n_nodules: reference.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrocPoint {
    pub threshold: f64,
    pub fps_per_scan: f64,
    pub sensitivity: f64,
}

/// FROC points ordered by decreasing threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrocCurve {
    pub points: Vec<FrocPoint>,
}

impl FrocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fps_per_scan,sensitivity\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.fps_per_scan, p.sensitivity));
        }
        out
    }

    /// Step-function sensitivity: best sensitivity reached at or below
    /// `fps` false positives per scan, 0 if none.
    pub fn sensitivity_at(&self, fps: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.fps_per_scan <= fps)
            .map(|p| p.sensitivity)
            .fold(0.0, f64::max)
    }
}

/// Sweeps every distinct score as a threshold, highest first.
pub fn compute_froc(matched: &MatchResult, scan_count: usize) -> Result<FrocCurve, EvalError> {
    if scan_count == 0 {
        return Err(EvalError::ZeroScans);
    }
    if matched.n_nodules == 0 {
        return Err(EvalError::NoReferenceNodules);
    }
    let mut best = vec![f64::NEG_INFINITY; matched.n_nodules];
    let mut fp_scores = Vec::new();
    let mut thresholds = Vec::new();
    for (o, &s) in matched.outcomes.iter().zip(&matched.scores) {
        match o {
            Outcome::Hit(i) => {
                best[*i] = best[*i].max(s);
                thresholds.push(s);
            }
            Outcome::FalsePositive => {
                fp_scores.push(s);
                thresholds.push(s);
            }
            Outcome::Ignored => {}
        }
    }
    if thresholds.is_empty() {
        return Err(EvalError::NoPredictions);
    }
    let desc = |v: &mut Vec<f64>| v.sort_by(|a, b| b.total_cmp(a));
    desc(&mut thresholds);
    thresholds.dedup();
    desc(&mut best);
    desc(&mut fp_scores);

    let (mut det, mut fp) = (0usize, 0usize);
    let points = thresholds
        .into_iter()
        .map(|t| {
            while det < best.len() && best[det] >= t {
                det += 1;
            }
            while fp < fp_scores.len() && fp_scores[fp] >= t {
                fp += 1;
            }
            FrocPoint {
                threshold: t,
                fps_per_scan: fp as f64 / scan_count as f64,
                sensitivity: det as f64 / matched.n_nodules as f64,
            }
        })
        .collect();
    Ok(FrocCurve { points })
}

/// Mean sensitivity over [`OPERATING_POINTS`].
pub fn compute_cpm(curve: &FrocCurve) -> f64 {
    OPERATING_POINTS
        .iter()
        .map(|&x| curve.sensitivity_at(x))
        .sum::<f64>()
        / OPERATING_POINTS.len() as f64
}

/// ROC AUC via the Mann-Whitney rank statistic with midranks for ties.
pub fn compute_auc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::InvalidScore(s));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass {
            positives: n_pos,
            negatives: n_neg,
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum_pos += midrank * pos_in_group as f64;
        start = end;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub fps_per_scan: f64,
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub cpm: f64,
    pub operating_points: Vec<OperatingPoint>,
    pub n_nodules: usize,
    pub n_detected: usize,
    pub n_predictions: usize,
    pub n_false_positives: usize,
    pub n_ignored: usize,
    pub scan_count: usize,
}

/// Match, sweep and summarize in one go. AUC is computed over the counted
/// predictions, with hits as the positive class.
pub fn evaluate(
    predictions: &PredictionSet,
    reference: &[ReferenceNodule],
    excluded: &[ReferenceNodule],
) -> Result<(EvalReport, FrocCurve), EvalError> {
    let matched = match_candidates(predictions, reference, excluded)?;
    let curve = compute_froc(&matched, predictions.scan_count())?;
    let (scores, labels) = matched.scored();
    let auc = compute_auc(&scores, &labels)?;
    let mut detected = vec![false; matched.n_nodules];
    for o in &matched.outcomes {
        if let Outcome::Hit(i) = o {
            detected[*i] = true;
        }
    }
    let report = EvalReport {
        auc,
        cpm: compute_cpm(&curve),
        operating_points: OPERATING_POINTS
            .iter()
            .map(|&x| OperatingPoint {
                fps_per_scan: x,
                sensitivity: curve.sensitivity_at(x),
            })
            .collect(),
        n_nodules: matched.n_nodules,
        n_detected: detected.iter().filter(|&&d| d).count(),
        n_predictions: predictions.entries().len(),
        n_false_positives: matched
            .outcomes
            .iter()
            .filter(|o| **o == Outcome::FalsePositive)
            .count(),
        n_ignored: matched
            .outcomes
            .iter()
            .filter(|o| **o == Outcome::Ignored)
            .count(),
        scan_count: predictions.scan_count(),
    };
    Ok((report, curve))
}

const PREFIX: [&str; 4] = ["seriesuid", "coordX", "coordY", "coordZ"];

/// Reads `seriesuid,coordX,coordY,coordZ,probability`.
pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    let rows = table::read_rows(table::open(path)?, path, &PREFIX, 5)?;
    rows.iter()
        .map(|r| {
            let score = r.coord(4, "probability", path)?;
            if !(0.0..=1.0).contains(&score) {
                return Err(r.error(path, format!("probability {score} outside [0, 1]")).into());
            }
            Ok(Prediction {
                scan_id: r.fields[0].to_string(),
                world_pos: [
                    r.coord(1, "coordX", path)?,
                    r.coord(2, "coordY", path)?,
                    r.coord(3, "coordZ", path)?,
                ],
                score,
            })
        })
        .collect()
}

/// Reads `seriesuid,coordX,coordY,coordZ,diameter_mm`.
pub fn load_reference(path: &Path) -> Result<Vec<ReferenceNodule>, EvalError> {
    let rows = table::read_rows(table::open(path)?, path, &PREFIX, 5)?;
    rows.iter()
        .map(|r| {
            Ok(ReferenceNodule {
                scan_id: r.fields[0].to_string(),
                world_pos: [
                    r.coord(1, "coordX", path)?,
                    r.coord(2, "coordY", path)?,
                    r.coord(3, "coordZ", path)?,
                ],
                diameter_mm: r.coord(4, "diameter_mm", path)?,
            })
        })
        .collect()
}
