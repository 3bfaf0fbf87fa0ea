//! Detection metrics: per-class AP and mAP, mean recall-precision (mRP) and
//! class-agnostic recall-precision (cRP), each with the confidence threshold
//! at which it is attained.
//!
//! mRP answers "how good is this detector at one shared threshold": recall
//! and precision are averaged over classes at every threshold and the
//! metric is their common value where the averaged curves meet. cRP is the
//! same quantity after erasing class labels, so a well-localized animal with
//! the wrong label still counts.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou, BoundingBox};
use crate::par;

/// Curve label used for class-agnostic matching.
pub const AGNOSTIC: &str = "agnostic";
/// Default IoU needed for a detection to match a ground-truth box.
pub const DEFAULT_IOU: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("class '{0}' has no ground-truth boxes")]
    NoGroundTruth(String),
    #[error("detections use class '{0}' which never appears in the ground truth")]
    UnknownClass(String),
    #[error("detections reference image ids missing from the ground truth: {}", .0.join(", "))]
    MissingImages(Vec<String>),
    #[error("no curves to average")]
    EmptyCurveSet,
    #[error("image '{image_id}': confidence {value} outside [0, 1]")]
    InvalidConfidence { image_id: String, value: f64 },
    #[error("IoU threshold {0} outside (0, 1]")]
    InvalidIouThreshold(f64),
}

/// Ground-truth box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: String,
    pub class_label: String,
    pub bbox: BoundingBox,
}

/// Scored detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class_label: String,
    pub bbox: BoundingBox,
    pub confidence: f64,
}

impl DetectionRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(EvalError::InvalidConfidence {
                image_id: self.image_id.clone(),
                value: self.confidence,
            });
        }
        Ok(())
    }
}

/// Order in which detections are considered: confidence descending, then a
/// content key so that equal-confidence records are processed the same way
/// whatever their position in the input file.
pub fn detection_order(a: &DetectionRecord, b: &DetectionRecord) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then_with(|| a.class_label.cmp(&b.class_label))
        .then_with(|| a.bbox.x_min.total_cmp(&b.bbox.x_min))
        .then_with(|| a.bbox.y_min.total_cmp(&b.bbox.y_min))
        .then_with(|| a.bbox.x_max.total_cmp(&b.bbox.x_max))
        .then_with(|| a.bbox.y_max.total_cmp(&b.bbox.y_max))
}

/// Result of greedy matching, aligned with the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Ground-truth index each detection matched, if any.
    pub det_match: Vec<Option<usize>>,
    pub gt_matched: Vec<bool>,
    pub class_agnostic: bool,
    pub iou_threshold: f64,
}

impl MatchResult {
    pub fn is_tp(&self, det: usize) -> bool {
        self.det_match[det].is_some()
    }
}

/// Greedy one-to-one matching per image (and per class unless
/// `class_agnostic`). Detections are visited in [`detection_order`]; each
/// takes the unmatched ground truth with the highest IoU at or above
/// `iou_threshold`, lower ground-truth index winning ties.
pub fn match_detections(
    gt: &[Annotation],
    dets: &[DetectionRecord],
    iou_threshold: f64,
    class_agnostic: bool,
) -> MatchResult {
    let key = |image: &'_ str, class: &'_ str| -> (String, String) {
        let class = if class_agnostic { "" } else { class };
        (image.to_owned(), class.to_owned())
    };
    let mut groups: HashMap<(String, String), Vec<usize>> = HashMap::new();
    for (i, g) in gt.iter().enumerate() {
        groups.entry(key(&g.image_id, &g.class_label)).or_default().push(i);
    }

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| detection_order(&dets[a], &dets[b]).then(a.cmp(&b)));

    let mut det_match = vec![None; dets.len()];
    let mut gt_matched = vec![false; gt.len()];
    for d in order {
        let det = &dets[d];
        let Some(cands) = groups.get(&key(&det.image_id, &det.class_label)) else {
            continue;
        };
        let mut best: Option<(usize, f64)> = None;
        for &g in cands {
            if gt_matched[g] {
                continue;
            }
            let o = iou(&det.bbox, &gt[g].bbox);
            if o >= iou_threshold && best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, _)) = best {
            gt_matched[g] = true;
            det_match[d] = Some(g);
        }
    }
    MatchResult {
        det_match,
        gt_matched,
        class_agnostic,
        iou_threshold,
    }
}

/// Recall and precision as functions of the confidence threshold.
///
/// Sample 0 is the anchor where no detection is kept (recall 0, precision
/// 1, reported at threshold 1.0). The following samples sit at the distinct
/// detection confidences in descending order, a detection being kept when
/// its confidence is at least the threshold. A final sample at 0.0 keeps
/// everything; it is omitted when some confidence is already 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RPCurve {
    pub label: String,
    pub num_gt: usize,
    pub thresholds: Vec<f64>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
}

impl RPCurve {
    /// Builds a curve from `(confidence, is_tp)` pairs.
    pub fn from_scored(label: &str, num_gt: usize, scored: &mut [(f64, bool)]) -> Result<Self, EvalError> {
        if num_gt == 0 {
            return Err(EvalError::NoGroundTruth(label.to_owned()));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut curve = RPCurve {
            label: label.to_owned(),
            num_gt,
            thresholds: vec![1.0],
            recall: vec![0.0],
            precision: vec![1.0],
        };
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut i = 0;
        while i < scored.len() {
            let t = scored[i].0;
            while i < scored.len() && scored[i].0 == t {
                if scored[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            curve.push(t, tp as f64 / num_gt as f64, tp as f64 / (tp + fp) as f64);
        }
        if scored.last().is_none_or(|s| s.0 > 0.0) {
            let r = *curve.recall.last().unwrap();
            let p = *curve.precision.last().unwrap();
            curve.push(0.0, r, p);
        }
        Ok(curve)
    }

    fn push(&mut self, t: f64, r: f64, p: f64) {
        self.thresholds.push(t);
        self.recall.push(r);
        self.precision.push(p);
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Recall and precision when keeping detections with confidence >= `t`.
    /// `None` is the nothing-kept anchor.
    pub fn at(&self, t: Option<f64>) -> (f64, f64) {
        let Some(t) = t else {
            return (self.recall[0], self.precision[0]);
        };
        // samples 1.. have non-increasing thresholds; take the last one >= t
        let tail = &self.thresholds[1..];
        let n = tail.partition_point(|&x| x >= t);
        if n == 0 {
            (self.recall[0], self.precision[0])
        } else {
            (self.recall[n], self.precision[n])
        }
    }
}

/// Recall/precision curve for one class (`Some(label)`) or for every
/// detection (`None`, the class-agnostic curve) from a matching result.
pub fn pr_curve(
    gt: &[Annotation],
    dets: &[DetectionRecord],
    matches: &MatchResult,
    class: Option<&str>,
) -> Result<RPCurve, EvalError> {
    let keep = |label: &str| class.is_none_or(|c| c == label);
    let num_gt = gt.iter().filter(|g| keep(&g.class_label)).count();
    let mut scored: Vec<(f64, bool)> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| keep(&d.class_label))
        .map(|(i, d)| (d.confidence, matches.is_tp(i)))
        .collect();
    RPCurve::from_scored(class.unwrap_or(AGNOSTIC), num_gt, &mut scored)
}

/// Area under the monotone precision envelope, integrated exactly over the
/// recall steps of the curve.
pub fn average_precision(curve: &RPCurve) -> f64 {
    let n = curve.len();
    let mut envelope = curve.precision.clone();
    for i in (0..n.saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    for (i, e) in envelope.iter().enumerate().skip(1) {
        let dr = curve.recall[i] - curve.recall[i - 1];
        if dr > 0.0 {
            ap += dr * e;
        }
    }
    ap.clamp(0.0, 1.0)
}

/// Point where averaged recall meets averaged precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub value: f64,
    pub threshold: f64,
    /// Recall stayed below precision at every threshold; `value` is then
    /// the recall with every detection kept.
    pub no_crossing: bool,
}

/// Class-averaged curve on a shared threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanCurve {
    pub thresholds: Vec<f64>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
}

impl MeanCurve {
    /// Averages `curves` over the union of their thresholds; each class
    /// contributes its values at the nearest own threshold at or above the
    /// grid threshold.
    pub fn from_curves(curves: &[RPCurve]) -> Result<Self, EvalError> {
        if curves.is_empty() {
            return Err(EvalError::EmptyCurveSet);
        }
        let mut grid: Vec<f64> = curves
            .iter()
            .flat_map(|c| c.thresholds[1..].iter().copied())
            .filter(|&t| t > 0.0)
            .collect();
        grid.sort_by(|a, b| b.total_cmp(a));
        grid.dedup();
        grid.push(0.0);

        let k = curves.len() as f64;
        let mut mean = MeanCurve {
            thresholds: Vec::with_capacity(grid.len() + 1),
            recall: Vec::with_capacity(grid.len() + 1),
            precision: Vec::with_capacity(grid.len() + 1),
        };
        for t in std::iter::once(None).chain(grid.into_iter().map(Some)) {
            let (mut r, mut p) = (0.0, 0.0);
            for c in curves {
                let (cr, cp) = c.at(t);
                r += cr;
                p += cp;
            }
            mean.thresholds.push(t.unwrap_or(1.0));
            mean.recall.push(r / k);
            mean.precision.push(p / k);
        }
        Ok(mean)
    }

    pub fn from_curve(curve: &RPCurve) -> Self {
        MeanCurve {
            thresholds: curve.thresholds.clone(),
            recall: curve.recall.clone(),
            precision: curve.precision.clone(),
        }
    }

    /// Scans from the highest threshold down for the first sample where
    /// recall is no longer below precision and interpolates linearly
    /// between it and the previous sample. Without such a sample the
    /// all-kept sample is reported and flagged.
    pub fn equal_point(&self) -> OperatingPoint {
        let n = self.thresholds.len();
        let d = |i: usize| self.recall[i] - self.precision[i];
        for i in 0..n {
            let di = d(i);
            if di < 0.0 {
                continue;
            }
            if i == 0 || di == 0.0 {
                return OperatingPoint {
                    value: 0.5 * (self.recall[i] + self.precision[i]),
                    threshold: self.thresholds[i],
                    no_crossing: false,
                };
            }
            let dp = d(i - 1);
            let lambda = -dp / (di - dp);
            let lerp = |v: &[f64]| v[i - 1] + lambda * (v[i] - v[i - 1]);
            return OperatingPoint {
                value: lerp(&self.recall),
                threshold: lerp(&self.thresholds),
                no_crossing: false,
            };
        }
        // the 0.0 sample repeats the lowest real confidence; report the latter
        let last = n - 1;
        let at = if last >= 2
            && self.thresholds[last] == 0.0
            && self.recall[last] == self.recall[last - 1]
            && self.precision[last] == self.precision[last - 1]
        {
            last - 1
        } else {
            last
        };
        OperatingPoint {
            value: self.recall[last].min(self.precision[last]),
            threshold: self.thresholds[at],
            no_crossing: true,
        }
    }
}

/// mRP and its operating threshold from per-class curves.
pub fn mrp(curves: &[RPCurve]) -> Result<OperatingPoint, EvalError> {
    Ok(MeanCurve::from_curves(curves)?.equal_point())
}

/// cRP: every box relabeled to one class, rematched, and the equal point of
/// the single resulting curve.
pub fn crp(gt: &[Annotation], dets: &[DetectionRecord], iou_threshold: f64) -> Result<OperatingPoint, EvalError> {
    Ok(crp_curve(gt, dets, iou_threshold)?.equal_point())
}

fn crp_curve(gt: &[Annotation], dets: &[DetectionRecord], iou_threshold: f64) -> Result<MeanCurve, EvalError> {
    let m = match_detections(gt, dets, iou_threshold, true);
    Ok(MeanCurve::from_curve(&pr_curve(gt, dets, &m, None)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub num_gt: usize,
    pub num_detections: usize,
    pub ap: f64,
    pub rp: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub iou_threshold: f64,
    pub classes: BTreeMap<String, ClassMetrics>,
    pub map: f64,
    pub mrp: OperatingPoint,
    pub crp: OperatingPoint,
}

impl MetricReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "IoU threshold: {}", self.iou_threshold);
        let _ = writeln!(
            s,
            "{:<16} {:>7} {:>7} {:>8} {:>8} {:>10}",
            "class", "gt", "dets", "AP", "RP", "threshold"
        );
        for (c, m) in &self.classes {
            let _ = writeln!(
                s,
                "{:<16} {:>7} {:>7} {:>8.4} {:>8.4} {:>10.4}{}",
                c,
                m.num_gt,
                m.num_detections,
                m.ap,
                m.rp.value,
                m.rp.threshold,
                if m.rp.no_crossing { "  (no-crossing)" } else { "" }
            );
        }
        let flag = |p: &OperatingPoint| if p.no_crossing { "  (no-crossing)" } else { "" };
        let _ = writeln!(s, "mAP  {:.4}", self.map);
        let _ = writeln!(s, "mRP  {:.4} at threshold {:.4}{}", self.mrp.value, self.mrp.threshold, flag(&self.mrp));
        let _ = writeln!(s, "cRP  {:.4} at threshold {:.4}{}", self.crp.value, self.crp.threshold, flag(&self.crp));
        s
    }
}

/// Report plus every curve it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub report: MetricReport,
    pub class_curves: Vec<RPCurve>,
    pub mean_curve: MeanCurve,
    pub agnostic_curve: MeanCurve,
}

impl Evaluation {
    /// Long-format CSV of every curve: `curve,threshold,recall,precision`.
    pub fn curves_csv(&self) -> String {
        let mut s = String::from("curve,threshold,recall,precision\n");
        let mut emit = |label: &str, t: &[f64], r: &[f64], p: &[f64]| {
            for i in 0..t.len() {
                let _ = writeln!(s, "{label},{},{},{}", t[i], r[i], p[i]);
            }
        };
        for c in &self.class_curves {
            emit(&c.label, &c.thresholds, &c.recall, &c.precision);
        }
        let m = &self.mean_curve;
        emit("mean", &m.thresholds, &m.recall, &m.precision);
        let a = &self.agnostic_curve;
        emit(AGNOSTIC, &a.thresholds, &a.recall, &a.precision);
        s
    }
}

/// Full evaluation of `dets` against `gt`.
pub fn evaluate(gt: &[Annotation], dets: &[DetectionRecord], iou_threshold: f64) -> Result<Evaluation, EvalError> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(EvalError::InvalidIouThreshold(iou_threshold));
    }
    for d in dets {
        d.validate()?;
    }
    let classes: BTreeSet<&str> = gt.iter().map(|g| g.class_label.as_str()).collect();
    if classes.is_empty() {
        return Err(EvalError::EmptyCurveSet);
    }
    if let Some(d) = dets
        .iter()
        .filter(|d| !classes.contains(d.class_label.as_str()))
        .min_by(|a, b| a.class_label.cmp(&b.class_label))
    {
        return Err(EvalError::UnknownClass(d.class_label.clone()));
    }
    let images: BTreeSet<&str> = gt.iter().map(|g| g.image_id.as_str()).collect();
    let missing: BTreeSet<&str> = dets
        .iter()
        .map(|d| d.image_id.as_str())
        .filter(|id| !images.contains(id))
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingImages(missing.into_iter().map(str::to_owned).collect()));
    }

    let matches = match_detections(gt, dets, iou_threshold, false);
    let class_list: Vec<&str> = classes.into_iter().collect();
    let class_curves: Vec<RPCurve> = par::map(&class_list, |c| pr_curve(gt, dets, &matches, Some(c)))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut per_class = BTreeMap::new();
    let mut ap_sum = 0.0;
    for curve in &class_curves {
        let ap = average_precision(curve);
        ap_sum += ap;
        per_class.insert(
            curve.label.clone(),
            ClassMetrics {
                num_gt: curve.num_gt,
                num_detections: dets.iter().filter(|d| d.class_label == curve.label).count(),
                ap,
                rp: MeanCurve::from_curve(curve).equal_point(),
            },
        );
    }
    let mean_curve = MeanCurve::from_curves(&class_curves)?;
    let agnostic_curve = crp_curve(gt, dets, iou_threshold)?;
    let report = MetricReport {
        iou_threshold,
        map: ap_sum / class_curves.len() as f64,
        mrp: mean_curve.equal_point(),
        crp: agnostic_curve.equal_point(),
        classes: per_class,
    };
    Ok(Evaluation {
        report,
        class_curves,
        mean_curve,
        agnostic_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(x, y, x + w, y + h).unwrap()
    }

    fn g(img: &str, class: &str, bb: BoundingBox) -> Annotation {
        Annotation {
            image_id: img.into(),
            class_label: class.into(),
            bbox: bb,
        }
    }

    fn d(img: &str, class: &str, bb: BoundingBox, conf: f64) -> DetectionRecord {
        DetectionRecord {
            image_id: img.into(),
            class_label: class.into(),
            bbox: bb,
            confidence: conf,
        }
    }

    #[test]
    fn single_tp_and_duplicate_fp() {
        let gt = vec![g("i", "bear", b(0.0, 0.0, 10.0, 10.0))];
        let m = match_detections(&gt, &[d("i", "bear", b(0.0, 0.0, 10.0, 10.0), 0.9)], 0.5, false);
        assert_eq!(m.det_match, vec![Some(0)]);

        let dets = vec![
            d("i", "bear", b(0.0, 0.0, 10.0, 10.0), 0.8),
            d("i", "bear", b(0.0, 0.0, 10.0, 10.0), 0.9),
        ];
        let m = match_detections(&gt, &dets, 0.5, false);
        assert_eq!(m.det_match, vec![None, Some(0)]);
    }

    #[test]
    fn class_mismatch_only_matches_agnostic() {
        let gt = vec![g("i", "bear", b(0.0, 0.0, 10.0, 10.0))];
        let dets = vec![d("i", "deer", b(0.0, 0.0, 10.0, 10.0), 0.7)];
        assert!(!match_detections(&gt, &dets, 0.5, false).is_tp(0));
        assert!(match_detections(&gt, &dets, 0.5, true).is_tp(0));
    }

    // 3 GT, 4 detections in one class, enumerated by hand:
    //   conf 0.9 TP, 0.8 FP, 0.7 TP, 0.6 FP; third GT never found.
    //   t=1.0 anchor: R 0,   P 1
    //   t=0.9:        R 1/3, P 1
    //   t=0.8:        R 1/3, P 1/2
    //   t=0.7:        R 2/3, P 2/3
    //   t=0.6:        R 2/3, P 1/2
    //   t=0.0:        R 2/3, P 1/2
    #[test]
    fn hand_enumerated_curve() {
        let gt = vec![
            g("i", "c", b(0.0, 0.0, 10.0, 10.0)),
            g("i", "c", b(20.0, 0.0, 10.0, 10.0)),
            g("i", "c", b(40.0, 0.0, 10.0, 10.0)),
        ];
        let dets = vec![
            d("i", "c", b(0.0, 0.0, 10.0, 10.0), 0.9),
            d("i", "c", b(60.0, 0.0, 10.0, 10.0), 0.8),
            d("i", "c", b(21.0, 0.0, 10.0, 10.0), 0.7),
            d("i", "c", b(80.0, 0.0, 10.0, 10.0), 0.6),
        ];
        let m = match_detections(&gt, &dets, 0.5, false);
        let c = pr_curve(&gt, &dets, &m, Some("c")).unwrap();
        assert_eq!(c.thresholds, vec![1.0, 0.9, 0.8, 0.7, 0.6, 0.0]);
        let third = 1.0 / 3.0;
        let expect_r = [0.0, third, third, 2.0 * third, 2.0 * third, 2.0 * third];
        let expect_p = [1.0, 1.0, 0.5, 2.0 * third, 0.5, 0.5];
        for i in 0..6 {
            assert_abs_diff_eq!(c.recall[i], expect_r[i], epsilon = 1e-15);
            assert_abs_diff_eq!(c.precision[i], expect_p[i], epsilon = 1e-15);
        }
        // envelope: 1, 1, 2/3, 2/3 -> AP = 1/3 * 1 + 1/3 * 2/3
        assert_abs_diff_eq!(average_precision(&c), third + 2.0 / 9.0, epsilon = 1e-15);
        // R - P: -1, -2/3, -1/6, 0 -> equal point exactly at 0.7
        let op = MeanCurve::from_curve(&c).equal_point();
        assert!(!op.no_crossing);
        assert_abs_diff_eq!(op.threshold, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(op.value, 2.0 * third, epsilon = 1e-15);
    }

    #[test]
    fn zero_detections_conventions() {
        let gt = vec![g("i", "c", b(0.0, 0.0, 10.0, 10.0))];
        let m = match_detections(&gt, &[], 0.5, false);
        let c = pr_curve(&gt, &[], &m, Some("c")).unwrap();
        assert!(c.recall.iter().all(|&r| r == 0.0));
        assert!(c.precision.iter().all(|&p| p == 1.0));
        assert_eq!(average_precision(&c), 0.0);
        let op = crp(&gt, &[], 0.5).unwrap();
        assert_eq!(op.value, 0.0);
        assert!(op.no_crossing);
    }

    #[test]
    fn class_without_gt_is_error() {
        let m = match_detections(&[], &[], 0.5, false);
        assert_eq!(
            pr_curve(&[], &[], &m, Some("elk")),
            Err(EvalError::NoGroundTruth("elk".into()))
        );
        assert_eq!(mrp(&[]), Err(EvalError::EmptyCurveSet));
    }

    #[test]
    fn perfect_detections_everything_one() {
        let gt = vec![
            g("a", "bear", b(0.0, 0.0, 10.0, 10.0)),
            g("a", "deer", b(30.0, 30.0, 10.0, 10.0)),
            g("b", "bear", b(5.0, 5.0, 10.0, 10.0)),
        ];
        let dets: Vec<_> = gt
            .iter()
            .zip([0.9, 0.6, 0.75])
            .map(|(x, c)| d(&x.image_id, &x.class_label, x.bbox, c))
            .collect();
        let ev = evaluate(&gt, &dets, 0.5).unwrap();
        assert_eq!(ev.report.map, 1.0);
        assert_eq!(ev.report.mrp.value, 1.0);
        assert_eq!(ev.report.mrp.threshold, 0.6);
        assert_eq!(ev.report.crp.value, 1.0);
        for m in ev.report.classes.values() {
            assert_eq!(m.ap, 1.0);
            assert_eq!(m.rp.value, 1.0);
        }
    }

    #[test]
    fn evaluate_rejects_unknown_class_and_images() {
        let gt = vec![g("a", "bear", b(0.0, 0.0, 10.0, 10.0))];
        let bad_class = vec![d("a", "yeti", b(0.0, 0.0, 10.0, 10.0), 0.5)];
        assert_eq!(
            evaluate(&gt, &bad_class, 0.5).unwrap_err(),
            EvalError::UnknownClass("yeti".into())
        );
        let bad_img = vec![
            d("z", "bear", b(0.0, 0.0, 10.0, 10.0), 0.5),
            d("y", "bear", b(0.0, 0.0, 10.0, 10.0), 0.5),
        ];
        assert_eq!(
            evaluate(&gt, &bad_img, 0.5).unwrap_err(),
            EvalError::MissingImages(vec!["y".into(), "z".into()])
        );
        let bad_conf = vec![d("a", "bear", b(0.0, 0.0, 10.0, 10.0), 1.5)];
        assert!(matches!(
            evaluate(&gt, &bad_conf, 0.5),
            Err(EvalError::InvalidConfidence { .. })
        ));
    }

    #[test]
    fn interpolated_crossing() {
        // three GT, TP@0.9, TP@0.5
        // t=0.9: R 1/3 P 1 (D=-2/3); t=0.5: R 2/3 P 1 (D=-1/3); no crossing
        let gt = vec![
            g("i", "c", b(0.0, 0.0, 10.0, 10.0)),
            g("i", "c", b(20.0, 0.0, 10.0, 10.0)),
            g("i", "c", b(40.0, 0.0, 10.0, 10.0)),
        ];
        let dets = vec![
            d("i", "c", b(0.0, 0.0, 10.0, 10.0), 0.9),
            d("i", "c", b(20.0, 0.0, 10.0, 10.0), 0.5),
        ];
        let op = crp(&gt, &dets, 0.5).unwrap();
        assert!(op.no_crossing);
        assert_abs_diff_eq!(op.value, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(op.threshold, 0.5);

        // add a FP at 0.3: t=0.3: R 2/3 P 2/3 -> crossing exactly there
        let mut more = dets.clone();
        more.push(d("i", "c", b(70.0, 0.0, 10.0, 10.0), 0.3));
        let op = crp(&gt, &more, 0.5).unwrap();
        assert!(!op.no_crossing);
        assert_abs_diff_eq!(op.value, 2.0 / 3.0, epsilon = 1e-15);

        // a FP ranked between two TPs brings R and P together at 0.75
        let gt2 = vec![g("i", "c", b(0.0, 0.0, 10.0, 10.0)), g("i", "c", b(20.0, 0.0, 10.0, 10.0))];
        let dets2 = vec![
            d("i", "c", b(0.0, 0.0, 10.0, 10.0), 0.8),
            d("i", "c", b(20.0, 0.0, 10.0, 10.0), 0.7),
            d("i", "c", b(50.0, 0.0, 10.0, 10.0), 0.75),
        ];
        // t=0.8: R 1/2 P 1 D -1/2; t=0.75: R 1/2 P 1/2 D 0
        let op = crp(&gt2, &dets2, 0.5).unwrap();
        assert_eq!(op.threshold, 0.75);
        assert_abs_diff_eq!(op.value, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn linear_interpolation_between_samples() {
        // mean over two classes produces a sign change strictly between samples
        // class a: 1 GT, TP@0.8   -> t=0.8: R1 P1
        // class b: 2 GT, FP@0.6, TP@0.4 -> t=0.6: R0 P0 ; t=0.4: R1/2 P1/2
        // grid: anchor, 0.8, 0.6, 0.4, 0.0
        //   0.8: R (1+0)/2=.5  P (1+1)/2=1   D -.5
        //   0.6: R .5          P (1+0)/2=.5  D 0   -> exact at 0.6
        let ca = RPCurve::from_scored("a", 1, &mut [(0.8, true)]).unwrap();
        let cb = RPCurve::from_scored("b", 2, &mut [(0.6, false), (0.4, true)]).unwrap();
        let op = mrp(&[ca, cb]).unwrap();
        assert_abs_diff_eq!(op.threshold, 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(op.value, 0.5, epsilon = 1e-15);

        // class a: 1 GT, TP@0.8, FP@0.3 ; class b: 1 GT, TP@0.2
        //   0.8: R .5 P 1   D -.5
        //   0.3: R .5 P .75 D -.25
        //   0.2: R 1  P .75 D .25 -> lambda 1/2, t 0.25, value .75
        let ca = RPCurve::from_scored("a", 1, &mut [(0.8, true), (0.3, false)]).unwrap();
        let cb = RPCurve::from_scored("b", 1, &mut [(0.2, true)]).unwrap();
        let op = mrp(&[ca, cb]).unwrap();
        assert_abs_diff_eq!(op.threshold, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(op.value, 0.75, epsilon = 1e-12);
    }
}
