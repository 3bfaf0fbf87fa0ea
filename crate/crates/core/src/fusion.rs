//! Detection/tracker fusion over video and multi-model detection pooling.
//!
//! Each frame, live trackers predict where their object moved, detections
//! are associated with the predictions, and trackers that went unmatched
//! emit their predicted box in place of the missing detection. Trackers that
//! stay unmatched for too long, or the least confident ones when there are
//! too many, are dropped.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{detection_order, DetectionRecord};
use crate::geometry::{iou, BoundingBox};
use crate::par;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("invalid fusion parameters: {0}")]
    InvalidParams(String),
    #[error("sequence '{sequence_id}': frame {found} comes after frame {previous}")]
    OutOfOrder {
        sequence_id: String,
        previous: u32,
        found: u32,
    },
    #[error("no detection sets to pool")]
    NoDetectionSets,
}

/// One live tracker.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackState {
    pub track_id: u64,
    pub bbox: BoundingBox,
    pub class_label: String,
    /// Last associated confidence, decayed once per unassociated frame.
    pub confidence: f64,
    /// Frames alive, counting the frame it was spawned in.
    pub age: u32,
    /// Consecutive unassociated frames.
    pub misses: u32,
    /// Per-frame change of center x, center y, width, height.
    pub velocity: [f64; 4],
}

/// How a tracker's box moves between frames.
pub trait MotionModel: Sync {
    fn predict(&self, track: &TrackState) -> BoundingBox;
    /// Called when `observed` is associated with a tracker whose box was
    /// `previous` before this frame's prediction.
    fn observe(&self, track: &mut TrackState, previous: &BoundingBox, observed: &BoundingBox);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerModel {
    /// Box stays where it was last seen.
    #[default]
    ConstantPosition,
    /// Box keeps moving and resizing by its last observed per-frame delta.
    ConstantVelocity,
}

impl MotionModel for TrackerModel {
    fn predict(&self, track: &TrackState) -> BoundingBox {
        match self {
            TrackerModel::ConstantPosition => track.bbox,
            TrackerModel::ConstantVelocity => {
                let (cx, cy) = track.bbox.center();
                let [vx, vy, vw, vh] = track.velocity;
                let w = (track.bbox.width() + vw).max(1.0);
                let h = (track.bbox.height() + vh).max(1.0);
                let b = BoundingBox::from_center(cx + vx, cy + vy, w, h);
                // keep coordinates non-negative without changing the size
                b.translate((-b.x_min).max(0.0), (-b.y_min).max(0.0))
            }
        }
    }

    fn observe(&self, track: &mut TrackState, previous: &BoundingBox, observed: &BoundingBox) {
        if let TrackerModel::ConstantVelocity = self {
            let (px, py) = previous.center();
            let (ox, oy) = observed.center();
            track.velocity = [
                ox - px,
                oy - py,
                observed.width() - previous.width(),
                observed.height() - previous.height(),
            ];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Minimum IoU between a prediction and a detection to associate them.
    pub assoc_iou: f64,
    /// Trackers with more consecutive misses than this are removed.
    pub max_age: u32,
    pub max_trackers: usize,
    /// Confidence multiplier per unassociated frame.
    pub confidence_decay: f64,
    pub model: TrackerModel,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            assoc_iou: 0.3,
            max_age: 5,
            max_trackers: 4,
            confidence_decay: 0.9,
            model: TrackerModel::ConstantPosition,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: &str| Err(FusionError::InvalidParams(m.to_owned()));
        if !(self.assoc_iou > 0.0 && self.assoc_iou < 1.0) {
            return bad("assoc_iou must be in (0, 1)");
        }
        if self.max_trackers == 0 {
            return bad("max_trackers must be at least 1");
        }
        if !(self.confidence_decay > 0.0 && self.confidence_decay <= 1.0) {
            return bad("confidence_decay must be in (0, 1]");
        }
        Ok(())
    }
}

/// Trackers alive between frames of one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FusionState {
    pub tracks: Vec<TrackState>,
    next_id: u64,
}

impl FusionState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Advances `state` by one frame with the parameters' built-in motion model.
/// Returns the frame's detections followed by the boxes of trackers that
/// were not associated this frame and survived pruning.
pub fn fuse_step(
    state: &mut FusionState,
    detections: &[DetectionRecord],
    image_id: &str,
    params: &FusionParams,
) -> Vec<DetectionRecord> {
    fuse_step_with(state, detections, image_id, params, &params.model)
}

/// [`fuse_step`] with a caller-supplied motion model.
pub fn fuse_step_with(
    state: &mut FusionState,
    detections: &[DetectionRecord],
    image_id: &str,
    params: &FusionParams,
    model: &dyn MotionModel,
) -> Vec<DetectionRecord> {
    let mut dets: Vec<&DetectionRecord> = detections.iter().collect();
    dets.sort_by(|a, b| detection_order(a, b));

    // 1. predict
    let previous: Vec<BoundingBox> = state.tracks.iter().map(|t| t.bbox).collect();
    for t in &mut state.tracks {
        t.bbox = model.predict(t);
        t.age += 1;
    }

    // 2. greedy association by descending IoU
    let mut pairs = Vec::new();
    for (ti, t) in state.tracks.iter().enumerate() {
        for (di, d) in dets.iter().enumerate() {
            let o = iou(&t.bbox, &d.bbox);
            if o >= params.assoc_iou {
                pairs.push((o, t.track_id, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    let mut track_hit = vec![false; state.tracks.len()];
    let mut det_used = vec![false; dets.len()];
    for (_, _, ti, di) in pairs {
        if track_hit[ti] || det_used[di] {
            continue;
        }
        track_hit[ti] = true;
        det_used[di] = true;
        // 3. adopt the detection
        let d = dets[di];
        let t = &mut state.tracks[ti];
        model.observe(t, &previous[ti], &d.bbox);
        t.bbox = d.bbox;
        t.confidence = d.confidence;
        t.class_label.clone_from(&d.class_label);
        t.misses = 0;
    }

    // 5. unassociated trackers miss and decay
    for (t, &hit) in state.tracks.iter_mut().zip(&track_hit) {
        if !hit {
            t.misses += 1;
            t.confidence *= params.confidence_decay;
        }
    }
    let mut emit: Vec<u64> = state
        .tracks
        .iter()
        .zip(&track_hit)
        .filter(|(_, &hit)| !hit)
        .map(|(t, _)| t.track_id)
        .collect();

    // 4. spawn from leftovers
    for (d, _) in dets.iter().zip(&det_used).filter(|(_, &u)| !u) {
        state.tracks.push(TrackState {
            track_id: state.next_id,
            bbox: d.bbox,
            class_label: d.class_label.clone(),
            confidence: d.confidence,
            age: 1,
            misses: 0,
            velocity: [0.0; 4],
        });
        state.next_id += 1;
    }

    // 6. age out
    state.tracks.retain(|t| t.misses <= params.max_age);

    // 7. cap, least confident first; on ties the staler, then newer tracker
    if state.tracks.len() > params.max_trackers {
        state.tracks.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(a.misses.cmp(&b.misses))
                .then(a.track_id.cmp(&b.track_id))
        });
        state.tracks.truncate(params.max_trackers);
        state.tracks.sort_by_key(|t| t.track_id);
    }

    emit.retain(|id| state.tracks.iter().any(|t| t.track_id == *id));
    let mut out: Vec<DetectionRecord> = dets.into_iter().cloned().collect();
    for t in state.tracks.iter().filter(|t| emit.contains(&t.track_id)) {
        out.push(DetectionRecord {
            image_id: image_id.to_owned(),
            class_label: t.class_label.clone(),
            bbox: t.bbox,
            confidence: t.confidence,
        });
    }
    out
}

/// All detections of one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub sequence_id: String,
    pub frame_index: u32,
    pub image_id: String,
    pub detections: Vec<DetectionRecord>,
}

/// Runs [`fuse_step`] over every frame, independently per sequence. Frames of
/// a sequence must appear in strictly increasing frame order. The output
/// holds one entry per input frame, ordered by sequence id then frame.
pub fn fuse_sequence(frames: &[FrameDetections], params: &FusionParams) -> Result<Vec<FrameDetections>, FusionError> {
    params.validate()?;
    let mut by_seq: BTreeMap<&str, Vec<&FrameDetections>> = BTreeMap::new();
    for f in frames {
        let seq = by_seq.entry(&f.sequence_id).or_default();
        if let Some(prev) = seq.last() {
            if f.frame_index <= prev.frame_index {
                return Err(FusionError::OutOfOrder {
                    sequence_id: f.sequence_id.clone(),
                    previous: prev.frame_index,
                    found: f.frame_index,
                });
            }
        }
        seq.push(f);
    }
    let seqs: Vec<Vec<&FrameDetections>> = by_seq.into_values().collect();
    let fused = par::map(&seqs, |seq| {
        let mut state = FusionState::new();
        seq.iter()
            .map(|f| FrameDetections {
                sequence_id: f.sequence_id.clone(),
                frame_index: f.frame_index,
                image_id: f.image_id.clone(),
                detections: fuse_step(&mut state, &f.detections, &f.image_id, params),
            })
            .collect::<Vec<_>>()
    });
    Ok(fused.into_iter().flatten().collect())
}

/// Union of several detectors' outputs followed by greedy non-maximum
/// suppression per image and class: a box is dropped when it overlaps an
/// already kept, more confident box with IoU >= `nms_iou`.
pub fn pool_detections(sets: &[Vec<DetectionRecord>], nms_iou: f64) -> Result<Vec<DetectionRecord>, FusionError> {
    if sets.is_empty() {
        return Err(FusionError::NoDetectionSets);
    }
    let mut groups: BTreeMap<(&str, &str), Vec<&DetectionRecord>> = BTreeMap::new();
    for d in sets.iter().flatten() {
        groups.entry((&d.image_id, &d.class_label)).or_default().push(d);
    }
    let mut out = Vec::new();
    for (_, mut group) in groups {
        group.sort_by(|a, b| detection_order(a, b));
        let mut kept: Vec<&DetectionRecord> = Vec::new();
        for d in group {
            if kept.iter().all(|k| iou(&k.bbox, &d.bbox) < nms_iou) {
                kept.push(d);
            }
        }
        out.extend(kept.into_iter().cloned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(img: &str, x: f64, conf: f64) -> DetectionRecord {
        DetectionRecord {
            image_id: img.into(),
            class_label: "deer".into(),
            bbox: BoundingBox::new(x, 10.0, x + 20.0, 30.0).unwrap(),
            confidence: conf,
        }
    }

    #[test]
    fn empty_step() {
        let mut s = FusionState::new();
        assert!(fuse_step(&mut s, &[], "f0", &FusionParams::default()).is_empty());
        assert!(s.tracks.is_empty());
    }

    #[test]
    fn missed_frame_is_bridged_with_decay() {
        let p = FusionParams::default();
        let mut s = FusionState::new();
        let first = fuse_step(&mut s, &[det("f1", 5.0, 0.8)], "f1", &p);
        assert_eq!(first.len(), 1);
        let second = fuse_step(&mut s, &[], "f2", &p);
        assert_eq!(second.len(), 1);
        assert_eq!(second[0].bbox, first[0].bbox);
        assert_eq!(second[0].image_id, "f2");
        assert!((second[0].confidence - 0.8 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn max_age_zero_never_emits() {
        let p = FusionParams {
            max_age: 0,
            ..Default::default()
        };
        let mut s = FusionState::new();
        fuse_step(&mut s, &[det("f1", 5.0, 0.8)], "f1", &p);
        assert!(fuse_step(&mut s, &[], "f2", &p).is_empty());
        assert!(s.tracks.is_empty());
    }

    #[test]
    fn cap_drops_least_confident() {
        let p = FusionParams {
            max_trackers: 2,
            ..Default::default()
        };
        let mut s = FusionState::new();
        let dets = [det("f", 0.0, 0.5), det("f", 100.0, 0.9), det("f", 200.0, 0.7)];
        fuse_step(&mut s, &dets, "f", &p);
        let mut confs: Vec<f64> = s.tracks.iter().map(|t| t.confidence).collect();
        confs.sort_by(f64::total_cmp);
        assert_eq!(confs, vec![0.7, 0.9]);
    }

    #[test]
    fn constant_velocity_extrapolates() {
        let p = FusionParams {
            model: TrackerModel::ConstantVelocity,
            ..Default::default()
        };
        let mut s = FusionState::new();
        fuse_step(&mut s, &[det("a", 0.0, 0.9)], "a", &p);
        fuse_step(&mut s, &[det("b", 4.0, 0.9)], "b", &p);
        let out = fuse_step(&mut s, &[], "c", &p);
        assert_eq!(out.len(), 1);
        assert!((out[0].bbox.x_min - 8.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let f = |i| FrameDetections {
            sequence_id: "s".into(),
            frame_index: i,
            image_id: format!("s/{i}"),
            detections: vec![],
        };
        let err = fuse_sequence(&[f(2), f(1)], &FusionParams::default()).unwrap_err();
        assert_eq!(
            err,
            FusionError::OutOfOrder {
                sequence_id: "s".into(),
                previous: 2,
                found: 1
            }
        );
    }

    #[test]
    fn pooling_identical_sets() {
        let a = vec![det("i", 0.0, 0.9), det("i", 50.0, 0.4)];
        let pooled = pool_detections(&[a.clone(), a.clone()], 0.5).unwrap();
        assert_eq!(pooled.len(), 2);
        assert_eq!(pool_detections(std::slice::from_ref(&a), 1.0).unwrap().len(), 2);
        assert!(pool_detections(&[], 0.5).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = FusionParams::default();
        assert!(p.validate().is_ok());
        p.max_trackers = 0;
        assert!(p.validate().is_err());
        p = FusionParams {
            assoc_iou: 1.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}
