//! Average-precision evaluation of predicted boxes against references.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou3d, iou_bev, Point3};
use crate::scene::{load_poses, read_annotations, Annotation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouKind {
    #[serde(rename = "3d")]
    Iou3d,
    Bev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    PerClass,
    ClassAgnostic,
}

/// Label used for every box in class-agnostic mode.
pub const AGNOSTIC_LABEL: &str = "all";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub thresholds: Vec<f64>,
    pub mode: EvalMode,
    pub iou_kind: IouKind,
    /// Planar range bands `(min, max]` in meters from the ego position.
    pub bands: Vec<(f64, f64)>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![0.25, 0.5, 0.7],
            mode: EvalMode::ClassAgnostic,
            iou_kind: IouKind::Iou3d,
            bands: vec![(0.0, 30.0), (30.0, 50.0), (50.0, 80.0)],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() || self.thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::Eval("thresholds must lie in (0, 1]".into()));
        }
        let mut bands = self.bands.clone();
        bands.sort_by(|a, b| a.0.total_cmp(&b.0));
        for b in &bands {
            if !(b.0 >= 0.0 && b.1 > b.0) {
                return Err(Error::Eval(format!("invalid band ({}, {}]", b.0, b.1)));
            }
        }
        if bands.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::Eval("bands overlap".into()));
        }
        Ok(())
    }
}

fn in_band(r: f64, band: (f64, f64)) -> bool {
    (r > band.0 || (band.0 == 0.0 && r >= 0.0)) && r <= band.1
}

fn iou(kind: IouKind, a: &Annotation, b: &Annotation) -> f64 {
    match kind {
        IouKind::Iou3d => iou3d(&a.box3, &b.box3),
        IouKind::Bev => iou_bev(&a.box3, &b.box3),
    }
}

/// Greedy one-to-one matching within one frame. Predictions are visited by
/// descending score (ties by input order); each takes the unmatched
/// reference of highest IoU at or above `threshold` (ties by lower index).
/// Returns, per prediction in input order, the matched reference index.
pub fn match_frame(preds: &[&Annotation], refs: &[&Annotation], kind: IouKind, threshold: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; refs.len()];
    let mut out = vec![None; preds.len()];
    for pi in order {
        let mut best: Option<(usize, f64)> = None;
        for (ri, r) in refs.iter().enumerate() {
            if taken[ri] {
                continue;
            }
            let v = iou(kind, preds[pi], r);
            if v >= threshold && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((ri, v));
            }
        }
        if let Some((ri, _)) = best {
            taken[ri] = true;
            out[pi] = Some(ri);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
}

/// All-point interpolated AP of a ranked list of `(score, is_tp)` against
/// `num_refs` references; `None` without references. The list is ranked by
/// descending score, ties keeping input order.
pub fn average_precision(ranked: &[(f64, bool)], num_refs: usize) -> Option<(f64, Vec<PrPoint>)> {
    if num_refs == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.total_cmp(&ranked[a].0).then(a.cmp(&b)));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve = Vec::with_capacity(ranked.len());
    for i in order {
        let (score, hit) = ranked[i];
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        curve.push(PrPoint {
            score,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / num_refs as f64,
        });
    }
    let mut envelope = vec![0.0; curve.len()];
    let mut running: f64 = 0.0;
    for i in (0..curve.len()).rev() {
        running = running.max(curve[i].precision);
        envelope[i] = running;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in curve.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    Some((ap.clamp(0.0, 1.0), curve))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalCell {
    pub class_label: String,
    pub band: (f64, f64),
    pub threshold: f64,
    /// Absent when the cell has no references.
    pub ap: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub references: usize,
    #[serde(skip)]
    pub curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub iou_kind: IouKind,
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    pub fn cell(&self, class_label: &str, band: (f64, f64), threshold: f64) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.class_label == class_label && c.band == band && c.threshold == threshold)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per ranked prediction of every cell.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("class_label,band_min,band_max,threshold,rank,score,precision,recall\n");
        for c in &self.cells {
            for (rank, p) in c.curve.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    c.class_label, c.band.0, c.band.1, c.threshold, rank, p.score, p.precision, p.recall
                );
            }
        }
        out
    }
}

/// Scores `predictions` against `references`. `ego` gives the ego position
/// per frame for range banding; frames without an entry use the origin.
/// Predictions in frames that have no reference entry are an error.
pub fn evaluate(
    predictions: &[Annotation],
    references: &[Annotation],
    ego: &BTreeMap<u64, Point3>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let ref_frames: BTreeSet<u64> = references.iter().map(|a| a.frame).collect();
    let missing: BTreeSet<u64> = predictions.iter().map(|a| a.frame).filter(|f| !ref_frames.contains(f)).collect();
    if !missing.is_empty() {
        let list: Vec<String> = missing.iter().map(|f| f.to_string()).collect();
        return Err(Error::Eval(format!("frames missing from references: {}", list.join(", "))));
    }
    let relabel = |a: &Annotation| -> Annotation {
        let mut a = a.clone();
        if cfg.mode == EvalMode::ClassAgnostic {
            a.class_label = AGNOSTIC_LABEL.into();
        }
        a
    };
    let preds: Vec<Annotation> = predictions.iter().map(relabel).collect();
    let refs: Vec<Annotation> = references.iter().map(relabel).collect();
    let classes: BTreeSet<&str> = preds.iter().chain(&refs).map(|a| a.class_label.as_str()).collect();
    let origin = Point3::origin();
    let range = |a: &Annotation| {
        let e = ego.get(&a.frame).unwrap_or(&origin);
        let c = a.box3.center();
        (c.x - e.x).hypot(c.y - e.y)
    };

    let mut cells = Vec::new();
    for class in classes {
        let mut by_frame: BTreeMap<u64, (Vec<&Annotation>, Vec<&Annotation>)> = BTreeMap::new();
        for p in preds.iter().filter(|a| a.class_label == class) {
            by_frame.entry(p.frame).or_default().0.push(p);
        }
        for r in refs.iter().filter(|a| a.class_label == class) {
            by_frame.entry(r.frame).or_default().1.push(r);
        }
        for &threshold in &cfg.thresholds {
            let matches: Vec<(&Vec<&Annotation>, &Vec<&Annotation>, Vec<Option<usize>>)> = by_frame
                .values()
                .map(|(p, r)| (p, r, match_frame(p, r, cfg.iou_kind, threshold)))
                .collect();
            for &band in &cfg.bands {
                let mut ranked = Vec::new();
                let mut num_refs = 0;
                for (p, r, m) in &matches {
                    num_refs += r.iter().filter(|a| in_band(range(a), band)).count();
                    for (pi, mi) in m.iter().enumerate() {
                        match mi {
                            Some(ri) if in_band(range(r[*ri]), band) => ranked.push((p[pi].score, true)),
                            Some(_) => {}
                            None if in_band(range(p[pi]), band) => ranked.push((p[pi].score, false)),
                            None => {}
                        }
                    }
                }
                let tp = ranked.iter().filter(|x| x.1).count();
                let fp = ranked.len() - tp;
                let (ap, curve) = match average_precision(&ranked, num_refs) {
                    Some((ap, curve)) => (Some(ap), curve),
                    None => (None, Vec::new()),
                };
                cells.push(EvalCell {
                    class_label: class.to_string(),
                    band,
                    threshold,
                    ap,
                    true_positives: tp,
                    false_positives: fp,
                    false_negatives: num_refs - tp,
                    references: num_refs,
                    curve,
                });
            }
        }
    }
    Ok(EvalReport {
        mode: cfg.mode,
        iou_kind: cfg.iou_kind,
        cells,
    })
}

/// Loads both annotation files (and ego poses when a scene is given) and
/// runs [`evaluate`].
pub fn evaluate_files(pred: &Path, reference: &Path, scene: Option<&Path>, cfg: &EvalConfig) -> Result<EvalReport> {
    let predictions = read_annotations(pred)?;
    let references = read_annotations(reference)?;
    let ego = match scene {
        Some(dir) => load_poses(dir)?
            .into_iter()
            .map(|(f, p)| (f, Point3::from(*p.translation())))
            .collect(),
        None => BTreeMap::new(),
    };
    evaluate(&predictions, &references, &ego, cfg)
}
