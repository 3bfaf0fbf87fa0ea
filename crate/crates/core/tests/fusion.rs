use detkit::evaluator::{detection_order, evaluate, Annotation, DetectionRecord};
use detkit::fusion::{fuse_sequence, fuse_step, pool_detections, FrameDetections, FusionParams, FusionState, TrackerModel};
use detkit::geometry::BoundingBox;
use detkit_testkit::{oracle_nms, rng};
use rand::seq::SliceRandom;
use rand::Rng;

fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

fn det(img: &str, b: BoundingBox, conf: f64) -> DetectionRecord {
    DetectionRecord {
        image_id: img.into(),
        class_label: "deer".into(),
        bbox: b,
        confidence: conf,
    }
}

/// A deer walking right 2 px per frame; the detector misses frames 3-5.
fn gap_scenario() -> Vec<FrameDetections> {
    (0..10u32)
        .map(|f| {
            let img = format!("f{f}");
            let x = 10.0 + 2.0 * f as f64;
            let detections = if (3..6).contains(&f) {
                vec![]
            } else {
                vec![det(&img, bx(x, 40.0, x + 20.0, 60.0), 0.8)]
            };
            FrameDetections {
                sequence_id: "s".into(),
                frame_index: f,
                image_id: img,
                detections,
            }
        })
        .collect()
}

fn summary(frames: &[FrameDetections]) -> Vec<Vec<(f64, f64)>> {
    frames
        .iter()
        .map(|f| f.detections.iter().map(|d| (d.bbox.x_min, d.confidence)).collect())
        .collect()
}

#[test]
fn gap_is_bridged_by_hand_trace() {
    let out = fuse_sequence(&gap_scenario(), &FusionParams::default()).unwrap();
    // frames 0-2 associate; 3-5 emit the last seen box (x=14) decaying by 0.9;
    // frame 6's box (x=22) overlaps x=14 with IoU 240/560 and reassociates.
    let want: Vec<Vec<(f64, f64)>> = vec![
        vec![(10.0, 0.8)],
        vec![(12.0, 0.8)],
        vec![(14.0, 0.8)],
        vec![(14.0, 0.8 * 0.9)],
        vec![(14.0, 0.8 * 0.9 * 0.9)],
        vec![(14.0, 0.8 * 0.9 * 0.9 * 0.9)],
        vec![(22.0, 0.8)],
        vec![(24.0, 0.8)],
        vec![(26.0, 0.8)],
        vec![(28.0, 0.8)],
    ];
    assert_eq!(summary(&out), want);
    for f in &out[3..6] {
        assert_eq!(f.detections[0].image_id, f.image_id);
        assert_eq!(f.detections[0].bbox, bx(14.0, 40.0, 34.0, 60.0));
    }
}

#[test]
fn gap_longer_than_max_age_is_cut_short() {
    let p = FusionParams {
        max_age: 2,
        ..FusionParams::default()
    };
    let mut state = FusionState::new();
    let mut lens = Vec::new();
    let mut ids = Vec::new();
    for f in gap_scenario() {
        lens.push(fuse_step(&mut state, &f.detections, &f.image_id, &p).len());
        ids.push(state.tracks.iter().map(|t| t.track_id).collect::<Vec<_>>());
    }
    assert_eq!(lens, vec![1, 1, 1, 1, 1, 0, 1, 1, 1, 1]);
    // the first tracker dies in frame 5, a fresh one spawns in frame 6
    assert_eq!(ids[4], vec![0]);
    assert!(ids[5].is_empty());
    assert_eq!(ids[6], vec![1]);
}

#[test]
fn constant_velocity_follows_motion_through_gap() {
    let p = FusionParams {
        model: TrackerModel::ConstantVelocity,
        ..FusionParams::default()
    };
    let out = fuse_sequence(&gap_scenario(), &p).unwrap();
    let xs: Vec<f64> = out[3..6].iter().map(|f| f.detections[0].bbox.x_min).collect();
    assert_eq!(xs, vec![16.0, 18.0, 20.0]);
}

#[test]
fn out_of_order_frames_rejected() {
    let mut frames = gap_scenario();
    frames.swap(2, 3);
    assert!(fuse_sequence(&frames, &FusionParams::default()).is_err());
}

fn random_frames(r: &mut impl Rng, len: u32) -> Vec<FrameDetections> {
    let mut objects: Vec<(f64, f64)> = (0..r.random_range(0..4)).map(|_| (r.random_range(0.0..80.0), r.random_range(0.0..80.0))).collect();
    (0..len)
        .map(|f| {
            let img = format!("f{f}");
            for o in &mut objects {
                o.0 = (o.0 + r.random_range(-3.0..3.0)).max(0.0);
                o.1 = (o.1 + r.random_range(-3.0..3.0)).max(0.0);
            }
            let mut detections = Vec::new();
            for &(x, y) in &objects {
                if r.random_bool(0.6) {
                    detections.push(det(&img, bx(x, y, x + 15.0, y + 12.0), r.random_range(1..100) as f64 / 100.0));
                }
            }
            if r.random_bool(0.2) {
                let (x, y) = (r.random_range(0.0..90.0), r.random_range(0.0..90.0));
                detections.push(det(&img, bx(x, y, x + 10.0, y + 10.0), 0.3));
            }
            FrameDetections {
                sequence_id: "q".into(),
                frame_index: f,
                image_id: img,
                detections,
            }
        })
        .collect()
}

fn sorted(mut v: Vec<DetectionRecord>) -> Vec<DetectionRecord> {
    v.sort_by(detection_order);
    v
}

#[test]
fn fuzzed_sequences_keep_invariants() {
    let mut r = rng(11);
    for case in 0..500 {
        let len = r.random_range(1..15);
        let frames = random_frames(&mut r, len);
        let p = FusionParams {
            assoc_iou: r.random_range(0.1..0.9),
            max_age: r.random_range(0..4),
            max_trackers: r.random_range(1..5),
            confidence_decay: r.random_range(0.5..1.0),
            model: if r.random_bool(0.5) {
                TrackerModel::ConstantPosition
            } else {
                TrackerModel::ConstantVelocity
            },
        };
        let mut state = FusionState::new();
        let mut unassociated: Vec<(u64, u32)> = Vec::new();
        for f in &frames {
            let out = fuse_step(&mut state, &f.detections, &f.image_id, &p);
            // superset: the frame's detections come first, untouched
            assert_eq!(out[..f.detections.len()].to_vec(), sorted(f.detections.clone()), "case {case}");
            assert!(state.tracks.len() <= p.max_trackers);
            for t in &state.tracks {
                assert!(t.misses <= p.max_age);
                assert!((0.0..=1.0).contains(&t.confidence));
            }
            if p.max_age == 0 {
                assert_eq!(out.len(), f.detections.len());
            }
            // a tracker missing max_age + 1 frames in a row is gone
            unassociated = state
                .tracks
                .iter()
                .map(|t| {
                    let prev = unassociated.iter().find(|u| u.0 == t.track_id).map_or(0, |u| u.1);
                    (t.track_id, if t.misses == 0 { 0 } else { prev + 1 })
                })
                .collect();
            assert!(unassociated.iter().all(|u| u.1 <= p.max_age));
        }
        // within-frame order does not matter
        let mut shuffled = frames.clone();
        for f in &mut shuffled {
            f.detections.shuffle(&mut r);
        }
        assert_eq!(fuse_sequence(&frames, &p).unwrap(), fuse_sequence(&shuffled, &p).unwrap());
    }
}

#[test]
fn stale_tracker_boxes_lower_precision() {
    // the animal leaves after frame 2 but its tracker lingers
    let gt: Vec<Annotation> = (0..3)
        .map(|f| Annotation {
            image_id: format!("f{f}"),
            class_label: "deer".into(),
            bbox: bx(10.0, 40.0, 30.0, 60.0),
        })
        .chain((3..6).map(|f| Annotation {
            image_id: format!("f{f}"),
            class_label: "deer".into(),
            bbox: bx(200.0, 200.0, 210.0, 210.0),
        }))
        .collect();
    let frames: Vec<FrameDetections> = (0..6u32)
        .map(|f| FrameDetections {
            sequence_id: "s".into(),
            frame_index: f,
            image_id: format!("f{f}"),
            detections: if f < 3 {
                vec![det(&format!("f{f}"), bx(10.0, 40.0, 30.0, 60.0), 0.9)]
            } else {
                vec![]
            },
        })
        .collect();
    let raw: Vec<DetectionRecord> = frames.iter().flat_map(|f| f.detections.clone()).collect();
    let fused: Vec<DetectionRecord> = fuse_sequence(&frames, &FusionParams::default())
        .unwrap()
        .into_iter()
        .flat_map(|f| f.detections)
        .collect();
    assert_eq!(fused.len(), 6);
    let p_raw = evaluate(&gt, &raw, 0.5).unwrap();
    let p_fused = evaluate(&gt, &fused, 0.5).unwrap();
    let last = |e: &detkit::evaluator::Evaluation| *e.class_curves[0].precision.last().unwrap();
    assert_eq!(last(&p_raw), 1.0);
    assert_eq!(last(&p_fused), 0.5);
    assert!(p_fused.report.map <= p_raw.report.map);
}

#[test]
fn pooling_matches_exhaustive_nms() {
    let mut r = rng(12);
    for _ in 0..500 {
        let sets: Vec<Vec<DetectionRecord>> = (0..r.random_range(1..4))
            .map(|_| {
                (0..r.random_range(0..5))
                    .map(|_| {
                        let (x, y) = (r.random_range(0..12) as f64, r.random_range(0..12) as f64);
                        DetectionRecord {
                            image_id: format!("i{}", r.random_range(0..2)),
                            class_label: ["a", "b"][r.random_range(0..2)].into(),
                            bbox: bx(x, y, x + r.random_range(2..8) as f64, y + r.random_range(2..8) as f64),
                            confidence: r.random_range(1..10) as f64 / 10.0,
                        }
                    })
                    .collect()
            })
            .collect();
        let thr = r.random_range(0.2..0.9);
        let all: Vec<DetectionRecord> = sets.iter().flatten().cloned().collect();
        let got = sorted(pool_detections(&sets, thr).unwrap());
        let want = sorted(oracle_nms(&all, thr));
        assert_eq!(got, want);
    }
}

#[test]
fn pooling_identical_sets_keeps_one_copy() {
    let set = vec![det("a", bx(0.0, 0.0, 5.0, 5.0), 0.5), det("a", bx(20.0, 0.0, 25.0, 5.0), 0.4)];
    let pooled = pool_detections(&[set.clone(), set.clone()], 0.5).unwrap();
    assert_eq!(sorted(pooled), sorted(set.clone()));
    assert_eq!(sorted(pool_detections(std::slice::from_ref(&set), 1.0).unwrap()), sorted(set));
}
