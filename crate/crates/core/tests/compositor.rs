use std::collections::BTreeMap;
use std::sync::Mutex;

use detkit::compositor::{
    composite, generate_dataset, histogram_match_score, rank_sources, Background, BlendMode, CompositeError, CompositeRecipe,
    DatasetRequest, ImageRegion, Placement, PlacementPolicy, SourceCutout,
};
use detkit::geometry::{BinaryMask, BoundingBox};
use detkit_testkit::{solid, synthetic_backgrounds, synthetic_sources};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

fn cutout(img: RgbImage, b: BoundingBox, mask: Option<BinaryMask>) -> SourceCutout {
    SourceCutout {
        id: "s".into(),
        class_label: "deer".into(),
        pose_id: "p".into(),
        image: img,
        bbox: b,
        mask,
    }
}

#[test]
fn dataset_counts_per_class() {
    let sources = synthetic_sources();
    let backgrounds = synthetic_backgrounds();
    let req = DatasetRequest {
        sources: &sources,
        backgrounds: &backgrounds,
        policy: PlacementPolicy::default(),
        blend: BlendMode::MaskPaste,
        seed: 3,
    };
    let seen = Mutex::new(0usize);
    let recs = generate_dataset::<CompositeError, _>(&req, |_, img| {
        assert_eq!(img.dimensions(), (64, 64));
        *seen.lock().unwrap() += 1;
        Ok(())
    })
    .unwrap();
    let mut per: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &recs {
        *per.entry(r.annotation.class_label.as_str()).or_default() += 1;
        assert!(r.annotation.bbox.inside(64.0, 64.0));
    }
    assert_eq!(per["bear"], 286);
    assert_eq!(per["deer"], 286);
    assert_eq!(per["coyote"], 260);
    assert_eq!(per["moose"], 260);
    assert_eq!(recs.len(), 1092);
    assert_eq!(*seen.lock().unwrap(), 1092);
    let again = generate_dataset::<CompositeError, _>(&req, |_, _| Ok(())).unwrap();
    assert_eq!(recs, again);
}

#[test]
fn sink_failure_aborts_run() {
    let sources = synthetic_sources();
    let backgrounds = synthetic_backgrounds();
    let req = DatasetRequest {
        sources: &sources,
        backgrounds: &backgrounds,
        policy: PlacementPolicy::default(),
        blend: BlendMode::MaskPaste,
        seed: 3,
    };
    let r = generate_dataset::<Failure, _>(&req, |rec, _| {
        if rec.annotation.pose_id == "p05" {
            Err(Failure::Sink(format!("disk full at {}", rec.image_id)))
        } else {
            Ok(())
        }
    });
    assert!(matches!(r, Err(Failure::Sink(m)) if m == "disk full at syn_bear_airport00_p05"));
}

#[derive(Debug)]
enum Failure {
    Composite(CompositeError),
    Sink(String),
}

impl From<CompositeError> for Failure {
    fn from(e: CompositeError) -> Self {
        Failure::Composite(e)
    }
}

#[test]
fn missing_mask_reports_context() {
    let mut sources = BTreeMap::new();
    sources.insert(
        "deer".to_string(),
        vec![cutout(solid(20, 20, [1, 1, 1]), BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), None)],
    );
    let bgs = vec![Background {
        id: "b".into(),
        image: solid(30, 30, [0, 0, 0]),
    }];
    let req = DatasetRequest {
        sources: &sources,
        backgrounds: &bgs,
        policy: PlacementPolicy::default(),
        blend: BlendMode::MaskPaste,
        seed: 0,
    };
    let Err(Failure::Composite(err)) = generate_dataset::<Failure, _>(&req, |_, _| Ok(())) else {
        panic!("expected a composite error");
    };
    assert!(matches!(err, CompositeError::Failed { ref reason, .. } if **reason == CompositeError::MissingMask("s".into())));
    assert!(err.to_string().contains("deer/b/p"));
}

#[test]
fn tiny_sigma_leaves_outside_untouched() {
    let src = cutout(solid(20, 20, [250, 10, 10]), BoundingBox::new(5.0, 5.0, 15.0, 15.0).unwrap(), None);
    let bg = Background {
        id: "b".into(),
        image: RgbImage::from_fn(40, 40, |x, y| Rgb([x as u8 * 3, y as u8 * 5, 90])),
    };
    let (rec, out) = composite(&CompositeRecipe {
        source: &src,
        target: &bg,
        placement: Placement {
            center_x: 20.0,
            center_y: 20.0,
            scale: 1.0,
        },
        blend: BlendMode::GaussianNoMask { sigma: 0.1 },
        seed: 0,
    })
    .unwrap();
    let r = rec.annotation.bbox.pixel_rect();
    for y in 0..40 {
        for x in 0..40 {
            let inside = x >= r.x && x < r.x + r.width && y >= r.y && y < r.y + r.height;
            if inside {
                assert_eq!(*out.get_pixel(x, y), Rgb([250, 10, 10]));
            } else {
                assert_eq!(out.get_pixel(x, y), bg.image.get_pixel(x, y));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn gaussian_blend_is_convex(
        sc in prop::array::uniform3(any::<u8>()),
        tc in prop::array::uniform3(any::<u8>()),
        sigma in 0.3..6.0f64,
        scale in 0.3..1.5f64,
        cx in 15.0..35.0f64,
        cy in 15.0..35.0f64,
    ) {
        let src = cutout(solid(24, 24, sc), BoundingBox::new(2.0, 2.0, 22.0, 22.0).unwrap(), None);
        let bg = Background { id: "b".into(), image: solid(50, 50, tc) };
        let res = composite(&CompositeRecipe {
            source: &src,
            target: &bg,
            placement: Placement { center_x: cx, center_y: cy, scale },
            blend: BlendMode::GaussianNoMask { sigma },
            seed: 0,
        });
        let (_, out) = res.unwrap();
        for p in out.pixels() {
            for c in 0..3 {
                prop_assert!(p[c] >= sc[c].min(tc[c]) && p[c] <= sc[c].max(tc[c]));
            }
        }
    }

    #[test]
    fn histogram_score_symmetric_and_self_zero(
        a in prop::array::uniform3(any::<u8>()),
        b in prop::array::uniform3(any::<u8>()),
    ) {
        let ia = solid(6, 6, a);
        let ib = solid(6, 6, b);
        let ab = histogram_match_score(ImageRegion::full(&ia), &ib);
        let ba = histogram_match_score(ImageRegion::full(&ib), &ia);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=6.0 + 1e-12).contains(&ab));
        prop_assert_eq!(histogram_match_score(ImageRegion::full(&ia), &ia), 0.0);
    }
}

#[test]
fn ranking_is_stable_for_ties() {
    let t = solid(8, 8, [100, 100, 100]);
    let a = solid(8, 8, [0, 0, 0]);
    let b = solid(8, 8, [255, 255, 255]);
    let ranked = rank_sources(&[ImageRegion::full(&a), ImageRegion::full(&t), ImageRegion::full(&b)], &t);
    let order: Vec<usize> = ranked.iter().map(|r| r.0).collect();
    assert_eq!(order, vec![1, 0, 2]);
}
