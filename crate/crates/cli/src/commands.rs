use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use detkit::compositor::{generate_dataset, Background, BlendMode, CompositeError, DatasetRequest, PlacementPolicy, SourceCutout};
use detkit::evaluator::{DetectionRecord, DEFAULT_IOU};
use detkit::fusion::{fuse_sequence, pool_detections, FusionParams, TrackerModel};
use detkit::geometry::{box_from_mask, BoundingBox};
use detkit::io::{self, DetectionRow, Provenance};
use detkit::maskprop::{crop_to_box, propagate_mask, refine_with_edges};
use detkit::sampling::{load_manifest, plan_split, write_entries, ManifestEntry, SplitStrategy, StrategyKind};

use crate::args::{
    BlendName, CompositeArgs, EvaluateArgs, FuseArgs, MaskpropArgs, MaskrefineArgs, ModelName, PlanArgs, PoolArgs, StrategyName,
};
use crate::config::required;
use crate::digest;
use crate::error::CliError;

pub const DEFAULT_SIGMA: f64 = 3.0;
pub const DEFAULT_WINDOW: u32 = 15;
pub const DEFAULT_NMS_IOU: f64 = 0.5;
const IMAGE_EXTS: [&str; 3] = ["png", "jpg", "jpeg"];

fn provenance(command: &str, seed: Option<u64>) -> Provenance {
    let mut p = Provenance::new(command);
    p.seed = seed;
    p
}

fn param(p: &mut Provenance, key: &str, value: impl ToString) {
    p.parameters.insert(key.to_owned(), value.to_string());
}

fn input(p: &mut Provenance, key: &str, path: &Path) -> Result<(), CliError> {
    p.inputs.insert(key.to_owned(), digest::path(path)?);
    Ok(())
}

/// Parses `x_min,y_min,x_max,y_max`.
pub fn parse_box(flag: &str, s: &str) -> Result<BoundingBox, CliError> {
    let bad = || CliError::Usage(format!("--{flag} '{s}': expected x_min,y_min,x_max,y_max"));
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    if v.len() != 4 {
        return Err(bad());
    }
    BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| CliError::Usage(format!("--{flag} '{s}': {e}")))
}

fn json_with_provenance<T: serde::Serialize>(prov: &Provenance, key: &str, value: &T) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert("provenance".into(), serde_json::to_value(prov).expect("provenance serializes"));
    obj.insert(key.into(), serde_json::to_value(value).expect("value serializes"));
    let mut s = serde_json::to_string_pretty(&obj).expect("json serializes");
    s.push('\n');
    s
}

pub fn strategy_kind(a: &PlanArgs) -> Result<StrategyKind, CliError> {
    let name = required(a.strategy, "strategy")?;
    Ok(match name {
        StrategyName::PerClassFromCompleteSequences => StrategyKind::PerClassFromCompleteSequences {
            n: required(a.n, "n")?,
        },
        StrategyName::EvenAcrossSequences => StrategyKind::EvenAcrossSequences { n: required(a.n, "n")? },
        StrategyName::PrefixFraction => StrategyKind::PrefixFraction {
            fraction: required(a.fraction, "fraction")?,
        },
        StrategyName::PerSequenceEven => StrategyKind::PerSequenceEven {
            k: required(a.k, "k")?,
            sequences: required(a.sequences, "sequences")?,
        },
        StrategyName::StaticPerClass => StrategyKind::StaticPerClass { n: required(a.n, "n")? },
        StrategyName::PosesPerBackground => StrategyKind::PosesPerBackground { k: required(a.k, "k")? },
    })
}

pub fn plan(a: PlanArgs) -> Result<(), CliError> {
    let manifest_path = required(a.manifest.clone(), "manifest")?;
    let out = required(a.out.clone(), "out")?;
    let kind = strategy_kind(&a)?;
    let seed = a.seed.unwrap_or(0);
    let manifest = load_manifest(&manifest_path)?;
    let classes = a.classes.clone().unwrap_or_else(|| manifest.classes());
    let strategy = SplitStrategy::new(kind, classes.clone(), seed)?;
    let plan = plan_split(&manifest, &strategy)?;

    let mut prov = provenance("plan", Some(seed));
    input(&mut prov, "manifest", &manifest_path)?;
    param(&mut prov, "strategy", strategy.kind.name());
    param(&mut prov, "classes", classes.join(","));
    match strategy.kind {
        StrategyKind::PerClassFromCompleteSequences { n }
        | StrategyKind::EvenAcrossSequences { n }
        | StrategyKind::StaticPerClass { n } => param(&mut prov, "n", n),
        StrategyKind::PrefixFraction { fraction } => param(&mut prov, "fraction", fraction),
        StrategyKind::PerSequenceEven { k, sequences } => {
            param(&mut prov, "k", k);
            param(&mut prov, "sequences", sequences);
        }
        StrategyKind::PosesPerBackground { k } => param(&mut prov, "k", k),
    }
    io::write_file(&out, plan.to_json(Some(&prov)).as_bytes())?;

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{:<16} {:>8} {:>8}", "class", "train", "test");
    for (c, n) in &plan.summary {
        let _ = writeln!(stdout, "{:<16} {:>8} {:>8}", c, n.train, n.test);
    }
    let _ = writeln!(stdout, "{:<16} {:>8} {:>8}", "total", plan.train.len(), plan.test.len());
    if matches!(strategy.kind.source_kind(), detkit::sampling::SourceKind::Video) {
        let _ = writeln!(stdout, "train sequences: {}", detkit::sampling::SplitPlan::count_sequences(&manifest, &plan.train));
    }
    Ok(())
}

fn image_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| detkit::Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| detkit::Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTS.contains(&e.as_str())) {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            out.push((stem, path));
        }
    }
    out.sort();
    for w in out.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(detkit::Error::format(&w[1].1, format!("two images named '{}'", w[0].0)).into());
        }
    }
    Ok(out)
}

fn subdirs(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| detkit::Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| detkit::Error::io(dir, e))?.path();
        if path.is_dir() {
            let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            out.push((name, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Source cutouts from `sources/<class>/<pose>.png`. The animal's box comes
/// from its mask (`masks/<class>/<pose>.png`) when a mask directory is
/// given, else from `sources/annotations.csv` (image id `<class>/<pose>`),
/// else the whole image.
fn load_sources(sources: &Path, masks: Option<&Path>) -> Result<BTreeMap<String, Vec<SourceCutout>>, CliError> {
    let ann_path = sources.join("annotations.csv");
    let boxes: BTreeMap<String, BoundingBox> = if ann_path.is_file() {
        io::read_annotations(&ann_path)?.into_iter().map(|a| (a.image_id, a.bbox)).collect()
    } else {
        BTreeMap::new()
    };
    let mut out = BTreeMap::new();
    for (class, dir) in subdirs(sources)? {
        let mut poses = Vec::new();
        for (pose, path) in image_files(&dir)? {
            let id = format!("{class}/{pose}");
            let image = io::read_rgb(&path)?;
            let (bbox, mask) = match masks {
                Some(m) => {
                    let mpath = m.join(&class).join(format!("{pose}.png"));
                    let full = io::read_mask(&mpath)?;
                    if full.dimensions() != image.dimensions() {
                        return Err(detkit::Error::format(
                            &mpath,
                            format!("mask is {:?} but image '{id}' is {:?}", full.dimensions(), image.dimensions()),
                        )
                        .into());
                    }
                    let bbox = box_from_mask(&full).map_err(|e| detkit::Error::format(&mpath, e.to_string()))?;
                    (bbox, Some(crop_to_box(&full, &bbox)))
                }
                None => {
                    let bbox = match boxes.get(&id) {
                        Some(b) => *b,
                        None => BoundingBox::new(0.0, 0.0, image.width() as f64, image.height() as f64)?,
                    };
                    (bbox, None)
                }
            };
            poses.push(SourceCutout {
                id,
                class_label: class.clone(),
                pose_id: pose,
                image,
                bbox,
                mask,
            });
        }
        if !poses.is_empty() {
            out.insert(class, poses);
        }
    }
    if out.is_empty() {
        return Err(detkit::Error::format(sources, "no <class>/<pose> images found").into());
    }
    Ok(out)
}

#[derive(Debug)]
enum SinkError {
    Composite(CompositeError),
    Write(detkit::Error),
}

impl From<CompositeError> for SinkError {
    fn from(e: CompositeError) -> Self {
        SinkError::Composite(e)
    }
}

pub fn composite(a: CompositeArgs) -> Result<(), CliError> {
    let sources_dir = required(a.sources.clone(), "sources")?;
    let bg_dir = required(a.backgrounds.clone(), "backgrounds")?;
    let out = required(a.out.clone(), "out")?;
    let seed = a.seed.unwrap_or(0);
    let mode = a.mode.unwrap_or(if a.masks.is_some() { BlendName::Mask } else { BlendName::Gaussian });
    let blend = match mode {
        BlendName::Mask => {
            if a.masks.is_none() {
                return Err(CliError::Usage("--mode mask needs --masks".into()));
            }
            BlendMode::MaskPaste
        }
        BlendName::Gaussian => BlendMode::GaussianNoMask {
            sigma: a.sigma.unwrap_or(DEFAULT_SIGMA),
        },
    };
    let defaults = PlacementPolicy::default();
    let policy = PlacementPolicy {
        scale_min: a.scale_min.unwrap_or(defaults.scale_min),
        scale_max: a.scale_max.unwrap_or(defaults.scale_max),
    };

    let sources = load_sources(&sources_dir, a.masks.as_deref())?;
    let backgrounds: Vec<Background> = image_files(&bg_dir)?
        .into_iter()
        .map(|(id, path)| io::read_rgb(&path).map(|image| Background { id, image }))
        .collect::<Result<_, _>>()?;

    let mut prov = provenance("composite", Some(seed));
    input(&mut prov, "sources", &sources_dir)?;
    if let Some(m) = &a.masks {
        input(&mut prov, "masks", m)?;
    }
    input(&mut prov, "backgrounds", &bg_dir)?;
    match blend {
        BlendMode::MaskPaste => param(&mut prov, "mode", "mask"),
        BlendMode::GaussianNoMask { sigma } => {
            param(&mut prov, "mode", "gaussian");
            param(&mut prov, "sigma", sigma);
        }
    }
    param(&mut prov, "scale_min", policy.scale_min);
    param(&mut prov, "scale_max", policy.scale_max);

    let req = DatasetRequest {
        sources: &sources,
        backgrounds: &backgrounds,
        policy,
        blend,
        seed,
    };
    let records = generate_dataset::<SinkError, _>(&req, |rec, img| {
        io::write_rgb(&out.join(&rec.output_path), img, Some(&prov)).map_err(SinkError::Write)
    })
    .map_err(|e| match e {
        SinkError::Composite(c) => CliError::from(c),
        SinkError::Write(w) => CliError::from(w),
    })?;

    let entries: Vec<ManifestEntry> = records
        .iter()
        .map(|r| {
            ManifestEntry::synthetic(
                &r.image_id,
                &r.annotation.class_label,
                &r.annotation.background_id,
                &r.annotation.pose_id,
                &r.output_path,
            )
        })
        .collect();
    let manifest_path = out.join("manifest.csv");
    io::write_with(&manifest_path, |w| {
        w.write_all(prov.comment_block().as_bytes())?;
        write_entries(w, &entries, None).map_err(std::io::Error::other)
    })?;
    let anns: Vec<detkit::evaluator::Annotation> = records
        .iter()
        .map(|r| detkit::evaluator::Annotation {
            image_id: r.image_id.clone(),
            class_label: r.annotation.class_label.clone(),
            bbox: r.annotation.bbox,
        })
        .collect();
    io::write_with(&out.join("annotations.csv"), |w| io::write_annotations(w, &anns, Some(&prov)))?;
    io::write_file(&out.join("records.json"), json_with_provenance(&prov, "records", &records).as_bytes())?;

    let mut per: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &records {
        *per.entry(r.annotation.class_label.as_str()).or_default() += 1;
    }
    let mut stdout = std::io::stdout().lock();
    for (c, n) in per {
        let _ = writeln!(stdout, "{c:<16} {n:>6}");
    }
    let _ = writeln!(stdout, "{:<16} {:>6}", "total", records.len());
    Ok(())
}

pub fn maskprop(a: MaskpropArgs) -> Result<(), CliError> {
    let mask_path = required(a.prev_mask.clone(), "prev-mask")?;
    let prev = parse_box("prev-box", &required(a.prev_box.clone(), "prev-box")?)?;
    let cur = parse_box("cur-box", &required(a.cur_box.clone(), "cur-box")?)?;
    let out = required(a.out.clone(), "out")?;
    let mask = io::read_mask(&mask_path)?;
    let pr = prev.pixel_rect();
    // A mask the size of the box is the box's raster; anything else is
    // taken to be a full frame and is cropped, then written back full size.
    let box_sized = mask.dimensions() == (pr.width, pr.height);
    let input_mask = if box_sized { mask.clone() } else { crop_to_box(&mask, &prev) };
    let warped = propagate_mask(&input_mask, &prev, &cur)?;
    if warped.empty {
        log::warn!("propagated mask is empty");
    }
    let result = if box_sized {
        warped.mask
    } else {
        let cr = cur.pixel_rect();
        warped.mask.place(mask.width(), mask.height(), cr.x as i64, cr.y as i64)
    };
    let mut prov = provenance("maskprop", None);
    input(&mut prov, "prev_mask", &mask_path)?;
    param(&mut prov, "prev_box", a.prev_box.as_deref().unwrap_or_default());
    param(&mut prov, "cur_box", a.cur_box.as_deref().unwrap_or_default());
    io::write_mask(&out, &result, Some(&prov))?;
    println!("{} foreground pixels{}", result.count(), if warped.empty { " (empty)" } else { "" });
    Ok(())
}

pub fn maskrefine(a: MaskrefineArgs) -> Result<(), CliError> {
    let edges_path = required(a.edges.clone(), "edges")?;
    let bbox = parse_box("box", &required(a.bbox.clone(), "box")?)?;
    let out = required(a.out.clone(), "out")?;
    let window = a.window.unwrap_or(DEFAULT_WINDOW);
    let offset = a.offset.unwrap_or(0.0);
    let edges = io::read_edge_map(&edges_path)?;
    let mask = refine_with_edges(&edges, &bbox, window, offset)?;
    let mut prov = provenance("maskrefine", None);
    input(&mut prov, "edges", &edges_path)?;
    param(&mut prov, "box", a.bbox.as_deref().unwrap_or_default());
    param(&mut prov, "window", window);
    param(&mut prov, "offset", offset);
    io::write_mask(&out, &mask, Some(&prov))?;
    println!("{} foreground pixels", mask.count());
    Ok(())
}

pub fn evaluate(a: EvaluateArgs, seed: Option<u64>) -> Result<(), CliError> {
    let gt_path = required(a.gt.clone(), "gt")?;
    let det_path = required(a.det.clone(), "det")?;
    let iou = a.iou.unwrap_or(DEFAULT_IOU);
    let gt = io::read_annotations(&gt_path)?;
    let dets: Vec<DetectionRecord> = io::read_detections(&det_path)?.into_iter().map(|r| r.record).collect();
    let eval = detkit::evaluator::evaluate(&gt, &dets, iou)?;

    let mut prov = provenance("evaluate", seed);
    input(&mut prov, "gt", &gt_path)?;
    input(&mut prov, "det", &det_path)?;
    param(&mut prov, "iou", iou);
    if let Some(out) = &a.out {
        io::write_file(out, json_with_provenance(&prov, "report", &eval.report).as_bytes())?;
    }
    if let Some(curves) = &a.curves {
        let mut text = prov.comment_block();
        text.push_str(&eval.curves_csv());
        io::write_file(curves, text.as_bytes())?;
    }
    print!("{}", eval.report.to_table());
    Ok(())
}

fn write_rows(out: &Path, rows: &[DetectionRow], prov: &Provenance) -> Result<(), CliError> {
    io::write_with(out, |w| io::write_detections(w, rows, Some(prov)))?;
    Ok(())
}

pub fn fuse(a: FuseArgs) -> Result<(), CliError> {
    let det_path = required(a.det.clone(), "det")?;
    let out = required(a.out.clone(), "out")?;
    let d = FusionParams::default();
    let params = FusionParams {
        assoc_iou: a.assoc_iou.unwrap_or(d.assoc_iou),
        max_age: a.max_age.unwrap_or(d.max_age),
        max_trackers: a.max_trackers.unwrap_or(d.max_trackers),
        confidence_decay: a.decay.unwrap_or(d.confidence_decay),
        model: match a.model {
            None => d.model,
            Some(ModelName::Cp) => TrackerModel::ConstantPosition,
            Some(ModelName::Cv) => TrackerModel::ConstantVelocity,
        },
    };
    params.validate()?;
    let rows = io::read_detections(&det_path)?;
    let manifest = a.manifest.as_deref().map(load_manifest).transpose()?;
    let frames = io::group_frames(&det_path, &rows, manifest.as_ref())?;
    let fused = fuse_sequence(&frames, &params)?;

    let mut prov = provenance("fuse", None);
    input(&mut prov, "det", &det_path)?;
    if let Some(m) = &a.manifest {
        input(&mut prov, "manifest", m)?;
    }
    param(&mut prov, "assoc_iou", params.assoc_iou);
    param(&mut prov, "max_age", params.max_age);
    param(&mut prov, "max_trackers", params.max_trackers);
    param(&mut prov, "decay", params.confidence_decay);
    param(&mut prov, "model", if params.model == TrackerModel::ConstantVelocity { "cv" } else { "cp" });
    let out_rows: Vec<DetectionRow> = fused
        .iter()
        .flat_map(|f| {
            f.detections.iter().map(|d| DetectionRow {
                record: d.clone(),
                frame: Some((f.sequence_id.clone(), f.frame_index)),
            })
        })
        .collect();
    write_rows(&out, &out_rows, &prov)?;
    println!("{} detections in, {} out over {} frames", rows.len(), out_rows.len(), fused.len());
    Ok(())
}

pub fn pool(a: PoolArgs) -> Result<(), CliError> {
    if a.dets.is_empty() {
        return Err(CliError::Usage("missing --det (give it once per detection file)".into()));
    }
    let out = required(a.out.clone(), "out")?;
    let nms_iou = a.nms_iou.unwrap_or(DEFAULT_NMS_IOU);
    if !(nms_iou > 0.0 && nms_iou <= 1.0) {
        return Err(CliError::Usage(format!("--nms-iou {nms_iou} must be in (0, 1]")));
    }
    let mut prov = provenance("pool", None);
    let mut sets = Vec::new();
    for (i, p) in a.dets.iter().enumerate() {
        sets.push(io::read_detections(p)?.into_iter().map(|r| r.record).collect::<Vec<_>>());
        input(&mut prov, &format!("det{i}"), p)?;
    }
    param(&mut prov, "nms_iou", nms_iou);
    let pooled = pool_detections(&sets, nms_iou)?;
    let rows: Vec<DetectionRow> = pooled.into_iter().map(|record| DetectionRow { record, frame: None }).collect();
    write_rows(&out, &rows, &prov)?;
    println!("{} detections in, {} kept", sets.iter().map(Vec::len).sum::<usize>(), rows.len());
    Ok(())
}
