use detkit::geometry::{box_from_mask, box_transform_between, iou, warp_mask, BinaryMask, BoundingBox, BoxTransform};
use detkit::maskprop::propagate_mask;
use detkit_testkit::{ellipse_mask, oracle_iou, oracle_mask_box};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    }
}

fn any_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..200.0f64, 0.0..200.0f64, 0.5..80.0f64, 0.5..80.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
}

fn any_transform() -> impl Strategy<Value = BoxTransform> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.2..5.0f64, 0.2..5.0f64)
        .prop_map(|(tx, ty, sx, sy)| BoxTransform::new(tx, ty, sx, sy).unwrap())
}

fn any_mask() -> impl Strategy<Value = BinaryMask> {
    (1u32..24, 1u32..24)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(any::<bool>(), (w * h) as usize)))
        .prop_map(|(w, h, bits)| BinaryMask::from_raw(w, h, bits.into_iter().map(u8::from).collect()).unwrap())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn iou_symmetric_and_bounded(a in any_box(), b in any_box()) {
        let ab = iou(&a, &b);
        prop_assert_eq!(ab, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - oracle_iou(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn iou_identity(a in any_box()) {
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_translation_invariant(a in any_box(), b in any_box(), dx in 0.0..100.0f64, dy in 0.0..100.0f64) {
        let moved = iou(&a.translate(dx, dy), &b.translate(dx, dy));
        prop_assert!((moved - iou(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn transform_round_trip(t in any_transform(), x in -100.0..400.0f64, y in -100.0..400.0f64) {
        let (u, v) = t.apply(x, y);
        let (bx, by) = t.apply_inverse(u, v);
        prop_assert!((bx - x).abs() <= 1e-9 && (by - y).abs() <= 1e-9);
        let (ix, iy) = t.inverse().apply(u, v);
        prop_assert!((ix - x).abs() <= 1e-9 && (iy - y).abs() <= 1e-9);
    }

    #[test]
    fn transform_between_boxes_maps_exactly(a in any_box(), b in any_box()) {
        let t = box_transform_between(&a, &b);
        let m = t.apply_box(&a);
        for (p, q) in [(m.x_min, b.x_min), (m.y_min, b.y_min), (m.x_max, b.x_max), (m.y_max, b.y_max)] {
            prop_assert!((p - q).abs() <= 1e-9);
        }
    }

    #[test]
    fn compose_matches_sequential(t1 in any_transform(), t2 in any_transform(), x in 0.0..100.0f64, y in 0.0..100.0f64) {
        let (a, b) = t1.apply(x, y);
        let (a, b) = t2.apply(a, b);
        let (c, d) = t2.compose(&t1).apply(x, y);
        prop_assert!((a - c).abs() <= 1e-9 && (b - d).abs() <= 1e-9);
    }

    #[test]
    fn warp_identity(m in any_mask(), x in 0u32..50, y in 0u32..50) {
        let region = BoundingBox::new(x as f64, y as f64, (x + m.width()) as f64, (y + m.height()) as f64).unwrap();
        let w = warp_mask(&m, &region, &BoxTransform::IDENTITY, m.dimensions());
        prop_assert_eq!(&w.mask, &m);
        prop_assert_eq!(w.empty, m.is_empty());
    }

    #[test]
    fn box_from_mask_matches_scan(m in any_mask()) {
        match (box_from_mask(&m), oracle_mask_box(&m)) {
            (Ok(b), Some((x0, y0, x1, y1))) => {
                prop_assert_eq!(b, BoundingBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).unwrap());
            }
            (Err(_), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn propagate_area_follows_box_area(
        w in 24u32..64, h in 24u32..64, x in 0u32..100, y in 0u32..100,
        sx in 0.7..1.6f64, sy in 0.7..1.6f64, dx in -20.0..20.0f64, dy in -20.0..20.0f64,
    ) {
        let prev = BoundingBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64).unwrap();
        let (cx, cy) = prev.center();
        let cur = BoundingBox::from_center(cx + dx + 100.0, cy + dy + 100.0, w as f64 * sx, h as f64 * sy);
        let mask = ellipse_mask(w, h);
        let out = propagate_mask(&mask, &prev, &cur).unwrap();
        let expected = mask.count() as f64 * sx * sy;
        let ratio = out.mask.count() as f64 / expected;
        prop_assert!((ratio - 1.0).abs() <= 0.05, "ratio {}", ratio);
    }
}
