use detkit::evaluator::{average_precision, evaluate, match_detections, DetectionRecord, MetricReport, RPCurve};
use detkit::geometry::BoundingBox;
use detkit_testkit::{metric_instance, oracle_ap, oracle_match, oracle_rp, oracle_scored, rng, MetricInstance};
use rand::seq::SliceRandom;

const IOU: f64 = 0.5;

fn instances(seed: u64, n: usize) -> Vec<MetricInstance> {
    let mut r = rng(seed);
    (0..n).map(|_| metric_instance(&mut r)).collect()
}

/// Every number the report exposes, thresholds excluded.
fn values(r: &MetricReport) -> Vec<f64> {
    let mut v = vec![r.map, r.mrp.value, r.crp.value];
    for m in r.classes.values() {
        v.push(m.ap);
        v.push(m.rp.value);
    }
    v
}

#[test]
fn matching_agrees_with_exhaustive_search() {
    for inst in instances(1, 1000) {
        for agnostic in [false, true] {
            let m = match_detections(&inst.gt, &inst.dets, IOU, agnostic);
            let tp: Vec<bool> = (0..inst.dets.len()).map(|i| m.is_tp(i)).collect();
            assert_eq!(tp, oracle_match(&inst.gt, &inst.dets, IOU, agnostic));
        }
    }
}

#[test]
fn ap_agrees_with_rank_sweep() {
    for inst in instances(2, 1000) {
        let eval = evaluate(&inst.gt, &inst.dets, IOU).unwrap();
        let scored = oracle_scored(&inst.gt, &inst.dets, IOU);
        let mut sum = 0.0;
        for (class, (num_gt, s)) in &scored {
            let want = oracle_ap(*num_gt, s);
            let got = eval.report.classes[class].ap;
            assert!((got - want).abs() < 1e-9, "{class}: {got} vs {want} in {inst:?}");
            sum += want;
        }
        assert!((eval.report.map - sum / scored.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn rp_agrees_with_grid_scan() {
    for inst in instances(3, 1000) {
        let eval = evaluate(&inst.gt, &inst.dets, IOU).unwrap();
        for (got, agnostic) in [(eval.report.mrp, false), (eval.report.crp, true)] {
            let want = oracle_rp(&inst.gt, &inst.dets, IOU, agnostic);
            assert!((got.value - want.value).abs() < 1e-3, "value {got:?} vs {want:?} in {inst:?}");
            assert_eq!(got.no_crossing, want.no_crossing, "{inst:?}");
            if !got.no_crossing {
                assert!((got.threshold - want.threshold).abs() < 1e-3, "threshold {got:?} vs {want:?}");
            }
        }
    }
}

#[test]
fn values_ignore_monotone_confidence_maps() {
    for inst in instances(4, 200) {
        let base = values(&evaluate(&inst.gt, &inst.dets, IOU).unwrap().report);
        for f in [|c: f64| c * c, |c: f64| (c + 1.0) / 2.0, |c: f64| c.sqrt() * 0.5] {
            let dets: Vec<DetectionRecord> = inst
                .dets
                .iter()
                .map(|d| DetectionRecord {
                    confidence: f(d.confidence),
                    ..d.clone()
                })
                .collect();
            let v = values(&evaluate(&inst.gt, &dets, IOU).unwrap().report);
            for (a, b) in base.iter().zip(&v) {
                assert!((a - b).abs() <= 1e-12, "{base:?} vs {v:?}");
            }
        }
    }
}

#[test]
fn values_ignore_record_order() {
    let mut r = rng(5);
    for inst in instances(5, 200) {
        let base = evaluate(&inst.gt, &inst.dets, IOU).unwrap().report;
        let mut gt = inst.gt.clone();
        let mut dets = inst.dets.clone();
        gt.shuffle(&mut r);
        dets.shuffle(&mut r);
        let other = evaluate(&gt, &dets, IOU).unwrap().report;
        for (a, b) in values(&base).iter().zip(&values(&other)) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(base.mrp.threshold, other.mrp.threshold);
    }
}

#[test]
fn lowest_confidence_false_positive_never_helps() {
    for inst in instances(6, 200) {
        let base = evaluate(&inst.gt, &inst.dets, IOU).unwrap().report;
        let floor = inst.dets.iter().map(|d| d.confidence).fold(0.01, f64::min);
        for g in inst.gt.iter().take(3) {
            let mut dets = inst.dets.clone();
            dets.push(DetectionRecord {
                image_id: g.image_id.clone(),
                class_label: g.class_label.clone(),
                bbox: BoundingBox::new(500.0, 500.0, 510.0, 510.0).unwrap(),
                confidence: floor / 2.0,
            });
            let after = evaluate(&inst.gt, &dets, IOU).unwrap().report;
            for (a, b) in values(&base).iter().zip(&values(&after)) {
                assert!(*b <= a + 1e-12, "{a} -> {b} in {inst:?}");
            }
        }
    }
}

#[test]
fn relabeled_ground_truth_separates_crp_from_mrp() {
    let classes = ["bear", "deer", "moose"];
    let gt: Vec<_> = (0..9)
        .map(|i| detkit::evaluator::Annotation {
            image_id: format!("img{}", i / 3),
            class_label: classes[i % 3].into(),
            bbox: BoundingBox::new(20.0 * (i % 3) as f64, 0.0, 20.0 * (i % 3) as f64 + 15.0, 15.0).unwrap(),
        })
        .collect();
    let dets: Vec<_> = gt
        .iter()
        .enumerate()
        .map(|(i, g)| DetectionRecord {
            image_id: g.image_id.clone(),
            class_label: classes[(i + 1) % 3].into(),
            bbox: g.bbox,
            confidence: 0.9,
        })
        .collect();
    let r = evaluate(&gt, &dets, IOU).unwrap().report;
    assert_eq!(r.crp.value, 1.0);
    assert!(r.mrp.value < 1.0);
    assert_eq!(r.map, 0.0);
}

#[test]
fn average_precision_of_single_curve() {
    let mut s = vec![(0.9, true), (0.5, true)];
    let c = RPCurve::from_scored("x", 4, &mut s).unwrap();
    assert!((average_precision(&c) - 0.5).abs() < 1e-12);
}
