//! Fixtures and brute-force oracles shared by the test suites.
//!
//! The oracles deliberately avoid the library's own helpers: they recount
//! everything from raw boxes and confidences with the simplest loops that
//! express each definition.

use std::collections::{BTreeMap, BTreeSet};

use detkit::compositor::{Background, SourceCutout};
use detkit::evaluator::{Annotation, DetectionRecord};
use detkit::geometry::{BinaryMask, BoundingBox};
use detkit::sampling::{DatasetManifest, ManifestEntry};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-class source counts of the reference wildlife dataset.
#[derive(Debug, Clone, Copy)]
pub struct ClassRow {
    pub class: &'static str,
    pub sequences: usize,
    pub video_images: usize,
    pub static_real: usize,
    /// Synthetic poses per background; zero for classes without synthetic
    /// images.
    pub poses: usize,
}

pub const CLASS_TABLE: [ClassRow; 8] = [
    ClassRow { class: "bear", sequences: 92, video_images: 25715, static_real: 1115, poses: 11 },
    ClassRow { class: "bison", sequences: 88, video_images: 25133, static_real: 0, poses: 0 },
    ClassRow { class: "cow", sequences: 14, video_images: 5221, static_real: 0, poses: 0 },
    ClassRow { class: "coyote", sequences: 113, video_images: 23334, static_real: 1736, poses: 10 },
    ClassRow { class: "deer", sequences: 67, video_images: 23985, static_real: 1549, poses: 11 },
    ClassRow { class: "elk", sequences: 78, video_images: 25059, static_real: 0, poses: 0 },
    ClassRow { class: "horse", sequences: 23, video_images: 4871, static_real: 0, poses: 0 },
    ClassRow { class: "moose", sequences: 97, video_images: 24800, static_real: 0, poses: 10 },
];

pub const AIRPORT_BACKGROUNDS: usize = 14;
pub const HIGHWAY_BACKGROUNDS: usize = 12;

pub fn all_classes() -> Vec<String> {
    CLASS_TABLE.iter().map(|r| r.class.to_owned()).collect()
}

/// Classes with real static images.
pub fn three_classes() -> Vec<String> {
    ["bear", "deer", "coyote"].map(String::from).to_vec()
}

pub fn four_classes() -> Vec<String> {
    ["bear", "deer", "moose", "coyote"].map(String::from).to_vec()
}

pub fn background_ids() -> Vec<String> {
    (0..AIRPORT_BACKGROUNDS)
        .map(|i| format!("airport{i:02}"))
        .chain((0..HIGHWAY_BACKGROUNDS).map(|i| format!("highway{i:02}")))
        .collect()
}

/// `count` positive lengths summing exactly to `total`, spread between
/// roughly 0.4x and 1.6x the mean by a golden-ratio sequence.
pub fn sequence_lengths(count: usize, total: usize) -> Vec<usize> {
    assert!(count > 0 && total >= count);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let weights: Vec<f64> = (1..=count).map(|i| 0.4 + 1.2 * ((i as f64 * phi) % 1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w * total as f64 / wsum).collect();
    let mut lens: Vec<usize> = exact.iter().map(|e| (e.floor() as usize).max(1)).collect();
    let mut assigned: usize = lens.iter().sum();
    // largest remainder first, index order on ties
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut k = 0;
    while assigned < total {
        lens[order[k % count]] += 1;
        assigned += 1;
        k += 1;
    }
    while assigned > total {
        let i = (0..count).max_by_key(|&i| (lens[i], std::cmp::Reverse(i))).unwrap();
        lens[i] -= 1;
        assigned -= 1;
    }
    lens
}

/// Manifest with the full per-class video, static and synthetic counts.
pub fn table_manifest() -> DatasetManifest {
    let mut entries = Vec::new();
    for row in CLASS_TABLE {
        let c = row.class;
        for (s, len) in sequence_lengths(row.sequences, row.video_images).into_iter().enumerate() {
            let seq = format!("{c}_s{s:03}");
            for f in 0..len {
                entries.push(ManifestEntry::video(
                    &format!("{seq}_f{f:04}"),
                    c,
                    &seq,
                    f as u32,
                    &format!("video/{seq}/{f:04}.jpg"),
                ));
            }
        }
        for i in 0..row.static_real {
            entries.push(ManifestEntry::static_real(&format!("{c}_st{i:04}"), c, &format!("static/{c}/{i:04}.jpg")));
        }
        for bg in background_ids() {
            for p in 0..row.poses {
                let pose = format!("p{p:02}");
                entries.push(ManifestEntry::synthetic(
                    &format!("syn_{c}_{bg}_{pose}"),
                    c,
                    &bg,
                    &pose,
                    &format!("synthetic/{c}/{bg}_{pose}.png"),
                ));
            }
        }
    }
    DatasetManifest::new(entries).expect("fixture manifest is valid")
}

pub fn solid(w: u32, h: u32, c: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(w, h, Rgb(c))
}

fn fixture_color(key: &str) -> [u8; 3] {
    let h = detkit::rng::fnv1a(key.as_bytes());
    [(h & 0xff) as u8, (h >> 8 & 0xff) as u8, (h >> 16 & 0xff) as u8]
}

/// 64x64 solid-color cutouts, a centered 32x32 box with an elliptical mask,
/// for every synthetic class and pose.
pub fn synthetic_sources() -> BTreeMap<String, Vec<SourceCutout>> {
    let mut out = BTreeMap::new();
    for row in CLASS_TABLE.iter().filter(|r| r.poses > 0) {
        let poses = (0..row.poses)
            .map(|p| {
                let pose = format!("p{p:02}");
                let id = format!("{}_{pose}", row.class);
                SourceCutout {
                    image: solid(64, 64, fixture_color(&id)),
                    bbox: BoundingBox::new(16.0, 16.0, 48.0, 48.0).unwrap(),
                    mask: Some(ellipse_mask(32, 32)),
                    class_label: row.class.to_owned(),
                    pose_id: pose,
                    id,
                }
            })
            .collect();
        out.insert(row.class.to_owned(), poses);
    }
    out
}

pub fn synthetic_backgrounds() -> Vec<Background> {
    background_ids()
        .into_iter()
        .map(|id| Background {
            image: solid(64, 64, fixture_color(&id)),
            id,
        })
        .collect()
}

pub fn ellipse_mask(w: u32, h: u32) -> BinaryMask {
    let (a, b) = (w as f64 / 2.0, h as f64 / 2.0);
    BinaryMask::from_fn(w, h, |x, y| {
        let dx = (x as f64 + 0.5 - a) / a;
        let dy = (y as f64 + 0.5 - b) / b;
        dx * dx + dy * dy <= 1.0
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random evaluation problem.
#[derive(Debug, Clone)]
pub struct MetricInstance {
    pub gt: Vec<Annotation>,
    pub dets: Vec<DetectionRecord>,
}

pub const INSTANCE_CLASSES: [&str; 3] = ["a", "b", "c"];

fn random_box(r: &mut ChaCha8Rng) -> BoundingBox {
    let x = r.random_range(0..16) as f64;
    let y = r.random_range(0..16) as f64;
    let w = r.random_range(2..10) as f64;
    let h = r.random_range(2..10) as f64;
    BoundingBox::new(x, y, x + w, y + h).unwrap()
}

/// Up to 5 images, 1..=6 ground-truth boxes and 0..=8 detections with
/// confidences on the `k/100` grid. Detections are mostly jittered copies of
/// ground truth, sometimes relabeled, plus random clutter; every detection
/// refers to an image and class present in the ground truth.
pub fn metric_instance(r: &mut ChaCha8Rng) -> MetricInstance {
    let n_img = r.random_range(1..=5);
    let n_gt = r.random_range(1..=6);
    let gt: Vec<Annotation> = (0..n_gt)
        .map(|_| Annotation {
            image_id: format!("img{}", r.random_range(0..n_img)),
            class_label: INSTANCE_CLASSES[r.random_range(0..3)].to_owned(),
            bbox: random_box(r),
        })
        .collect();
    let images: Vec<String> = gt.iter().map(|g| g.image_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let classes: Vec<String> = gt.iter().map(|g| g.class_label.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let n_det = r.random_range(0..=8);
    let dets = (0..n_det)
        .map(|_| {
            let confidence = r.random_range(1..100) as f64 / 100.0;
            if r.random_bool(0.7) {
                let g = &gt[r.random_range(0..gt.len())];
                let j = |r: &mut ChaCha8Rng| r.random_range(-1..=1) as f64;
                let (dx0, dy0, dx1, dy1) = (j(r), j(r), j(r), j(r));
                let b = &g.bbox;
                let bbox = BoundingBox::new(
                    (b.x_min + dx0).max(0.0),
                    (b.y_min + dy0).max(0.0),
                    (b.x_max + dx1).max(b.x_min + dx0 + 1.0),
                    (b.y_max + dy1).max(b.y_min + dy0 + 1.0),
                )
                .unwrap_or(*b);
                let class_label = if r.random_bool(0.2) {
                    classes[r.random_range(0..classes.len())].clone()
                } else {
                    g.class_label.clone()
                };
                DetectionRecord {
                    image_id: g.image_id.clone(),
                    class_label,
                    bbox,
                    confidence,
                }
            } else {
                DetectionRecord {
                    image_id: images[r.random_range(0..images.len())].clone(),
                    class_label: classes[r.random_range(0..classes.len())].clone(),
                    bbox: random_box(r),
                    confidence,
                }
            }
        })
        .collect();
    MetricInstance { gt, dets }
}

/// Plain intersection over union.
pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    inter / ((a.x_max - a.x_min) * (a.y_max - a.y_min) + (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter)
}

/// Greedy matching by exhaustive search. Returns whether each detection is a
/// true positive.
pub fn oracle_match(gt: &[Annotation], dets: &[DetectionRecord], thr: f64, agnostic: bool) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&dets[a], &dets[b]);
        db.confidence
            .partial_cmp(&da.confidence)
            .unwrap()
            .then(da.image_id.cmp(&db.image_id))
            .then(da.class_label.cmp(&db.class_label))
            .then(da.bbox.x_min.partial_cmp(&db.bbox.x_min).unwrap())
            .then(da.bbox.y_min.partial_cmp(&db.bbox.y_min).unwrap())
            .then(da.bbox.x_max.partial_cmp(&db.bbox.x_max).unwrap())
            .then(da.bbox.y_max.partial_cmp(&db.bbox.y_max).unwrap())
            .then(a.cmp(&b))
    });
    let mut used = vec![false; gt.len()];
    let mut tp = vec![false; dets.len()];
    for d in order {
        let mut best: Option<usize> = None;
        let mut best_iou = -1.0;
        for (g, a) in gt.iter().enumerate() {
            if used[g] || a.image_id != dets[d].image_id || (!agnostic && a.class_label != dets[d].class_label) {
                continue;
            }
            let o = oracle_iou(&a.bbox, &dets[d].bbox);
            if o >= thr && o > best_iou {
                best = Some(g);
                best_iou = o;
            }
        }
        if let Some(g) = best {
            used[g] = true;
            tp[d] = true;
        }
    }
    tp
}

/// Average precision by sweeping the rank list: precision at each recall
/// level is the best precision at that or any higher recall.
pub fn oracle_ap(num_gt: usize, scored: &[(f64, bool)]) -> f64 {
    let mut s = scored.to_vec();
    s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    // operating points at each distinct confidence cut
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut cuts: Vec<f64> = s.iter().map(|x| x.0).collect();
    cuts.dedup();
    for cut in cuts {
        let kept: Vec<&(f64, bool)> = s.iter().filter(|x| x.0 >= cut).collect();
        let tp = kept.iter().filter(|x| x.1).count();
        points.push((tp as f64 / num_gt as f64, tp as f64 / kept.len() as f64));
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for i in 0..points.len() {
        let r = points[i].0;
        if r > prev_r {
            let best_p = points[i..].iter().map(|p| p.1).fold(0.0, f64::max);
            ap += (r - prev_r) * best_p;
            prev_r = r;
        }
    }
    ap
}

/// Recall/precision of each class when keeping detections with confidence
/// at least `t`; a class keeping nothing scores recall 0, precision 1.
fn class_rp_at(gt: &[Annotation], dets: &[DetectionRecord], tp: &[bool], class: Option<&str>, t: f64) -> (f64, f64) {
    let in_class = |c: &str| class.is_none_or(|k| k == c);
    let num_gt = gt.iter().filter(|g| in_class(&g.class_label)).count();
    let kept: Vec<usize> = (0..dets.len())
        .filter(|&i| in_class(&dets[i].class_label) && dets[i].confidence >= t)
        .collect();
    if kept.is_empty() {
        return (0.0, 1.0);
    }
    let hits = kept.iter().filter(|&&i| tp[i]).count();
    (hits as f64 / num_gt as f64, hits as f64 / kept.len() as f64)
}

/// Equal recall/precision point found by scanning thresholds downward.
#[derive(Debug, Clone, Copy)]
pub struct OracleRp {
    pub value: f64,
    pub threshold: f64,
    pub no_crossing: bool,
}

/// Class-averaged equal point. Averaged recall and precision are counted
/// exactly at every detection confidence (plus the nothing-kept level at
/// 1.0 and the keep-all level at 0.0) and joined linearly in between. The
/// joined curves are scanned from 1.0 down on a 1e-4 grid; the first grid
/// cell where recall catches up with precision is narrowed by bisection.
pub fn oracle_rp(gt: &[Annotation], dets: &[DetectionRecord], thr: f64, agnostic: bool) -> OracleRp {
    let tp = oracle_match(gt, dets, thr, agnostic);
    let classes: Vec<Option<String>> = if agnostic {
        vec![None]
    } else {
        gt.iter().map(|g| g.class_label.clone()).collect::<BTreeSet<_>>().into_iter().map(Some).collect()
    };
    let mean_at = |t: Option<f64>| -> (f64, f64) {
        let mut r = 0.0;
        let mut p = 0.0;
        for c in &classes {
            let (cr, cp) = match t {
                None => (0.0, 1.0),
                Some(t) => class_rp_at(gt, dets, &tp, c.as_deref(), t),
            };
            r += cr;
            p += cp;
        }
        (r / classes.len() as f64, p / classes.len() as f64)
    };
    // knots: (threshold, recall, precision), threshold descending
    let mut knots = vec![(1.0, mean_at(None).0, mean_at(None).1)];
    let mut confs: Vec<f64> = dets.iter().map(|d| d.confidence).filter(|&c| c > 0.0).collect();
    confs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    confs.dedup();
    confs.push(0.0);
    for c in confs {
        let (r, p) = mean_at(Some(c));
        knots.push((c, r, p));
    }
    let curve = |t: f64| -> (f64, f64) {
        if t >= knots[0].0 {
            return (knots[0].1, knots[0].2);
        }
        for w in knots.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            if t <= hi.0 && t >= lo.0 {
                let f = (hi.0 - t) / (hi.0 - lo.0);
                return (hi.1 + f * (lo.1 - hi.1), hi.2 + f * (lo.2 - hi.2));
            }
        }
        let last = knots[knots.len() - 1];
        (last.1, last.2)
    };
    let diff = |t: f64| {
        let (r, p) = curve(t);
        r - p
    };
    let steps = 10_000;
    for j in 0..=steps {
        // exact quotients so that grid points land on k/100 confidences
        let t = (steps - j) as f64 / steps as f64;
        if diff(t) >= 0.0 {
            let (mut hi, mut lo) = (if j == 0 { t } else { (steps - j + 1) as f64 / steps as f64 }, t);
            if j > 0 {
                for _ in 0..60 {
                    let mid = 0.5 * (hi + lo);
                    if diff(mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            let (r, p) = curve(lo);
            return OracleRp {
                value: 0.5 * (r + p),
                threshold: lo,
                no_crossing: false,
            };
        }
    }
    let (r, p) = curve(0.0);
    OracleRp {
        value: r.min(p),
        threshold: 0.0,
        no_crossing: true,
    }
}

/// Per-class `(confidence, is_tp)` lists under class-aware matching.
pub fn oracle_scored(gt: &[Annotation], dets: &[DetectionRecord], thr: f64) -> BTreeMap<String, (usize, Vec<(f64, bool)>)> {
    let tp = oracle_match(gt, dets, thr, false);
    let mut out: BTreeMap<String, (usize, Vec<(f64, bool)>)> = BTreeMap::new();
    for g in gt {
        out.entry(g.class_label.clone()).or_default().0 += 1;
    }
    for (d, is_tp) in dets.iter().zip(tp) {
        out.entry(d.class_label.clone()).or_default().1.push((d.confidence, is_tp));
    }
    out
}

/// Non-maximum suppression by repeatedly taking the most confident
/// survivor and deleting everything it overlaps.
pub fn oracle_nms(dets: &[DetectionRecord], nms_iou: f64) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    let groups: BTreeSet<(String, String)> = dets.iter().map(|d| (d.image_id.clone(), d.class_label.clone())).collect();
    for (img, cls) in groups {
        let mut pool: Vec<DetectionRecord> = dets
            .iter()
            .filter(|d| d.image_id == img && d.class_label == cls)
            .cloned()
            .collect();
        while !pool.is_empty() {
            let best = (0..pool.len())
                .max_by(|&a, &b| {
                    let (x, y) = (&pool[a], &pool[b]);
                    x.confidence
                        .partial_cmp(&y.confidence)
                        .unwrap()
                        .then(y.bbox.x_min.partial_cmp(&x.bbox.x_min).unwrap())
                        .then(y.bbox.y_min.partial_cmp(&x.bbox.y_min).unwrap())
                        .then(y.bbox.x_max.partial_cmp(&x.bbox.x_max).unwrap())
                        .then(y.bbox.y_max.partial_cmp(&x.bbox.y_max).unwrap())
                        .then(b.cmp(&a))
                })
                .unwrap();
            let keep = pool.remove(best);
            pool.retain(|d| oracle_iou(&d.bbox, &keep.bbox) < nms_iou);
            out.push(keep);
        }
    }
    out
}

/// Tight box of a mask by scanning every pixel.
pub fn oracle_mask_box(mask: &BinaryMask) -> Option<(u32, u32, u32, u32)> {
    let mut b: Option<(u32, u32, u32, u32)> = None;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                b = Some(match b {
                    None => (x, y, x + 1, y + 1),
                    Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x + 1), y1.max(y + 1)),
                });
            }
        }
    }
    b
}
