//! Browser bindings for three detkit operations: the recall/precision
//! explorer, a compositing preview and a mask propagation preview.
//!
//! Each operation is a plain Rust function returning `Result<_, String>`
//! so it can be tested natively; the `#[wasm_bindgen]` wrappers only turn
//! errors into JavaScript exceptions.

use std::path::Path;

use detkit::compositor::{composite, Background, BlendMode, CompositeRecipe, Placement, SourceCutout};
use detkit::evaluator::{evaluate, DetectionRecord};
use detkit::geometry::{BinaryMask, BoundingBox};
use detkit::io::{parse_annotations, parse_detections};
use detkit::maskprop::propagate_mask;
use image::{Rgb, RgbImage};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Evaluates detections against ground truth given as CSV text. Returns
/// JSON with the report, the per-class curves, the class-averaged curve
/// and the class-agnostic curve.
pub fn explore_rp(gt_csv: &str, det_csv: &str, iou_threshold: f64) -> Result<String, String> {
    let gt = parse_annotations(Path::new("ground truth"), gt_csv.as_bytes()).map_err(err)?;
    let dets: Vec<DetectionRecord> = parse_detections(Path::new("detections"), det_csv.as_bytes())
        .map_err(err)?
        .into_iter()
        .map(|r| r.record)
        .collect();
    let eval = evaluate(&gt, &dets, iou_threshold).map_err(err)?;
    serde_json::to_string(&eval).map_err(err)
}

fn gradient(w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        let gx = (x * 255 / w.max(1)) as u8;
        let gy = (y * 255 / h.max(1)) as u8;
        Rgb([40 + gx / 3, 90 + gy / 3, 60 + (gx / 4).wrapping_add(gy / 4)])
    })
}

fn ellipse(w: u32, h: u32) -> BinaryMask {
    let (a, b) = (w as f64 / 2.0, h as f64 / 2.0);
    BinaryMask::from_fn(w, h, |x, y| {
        let dx = (x as f64 + 0.5 - a) / a;
        let dy = (y as f64 + 0.5 - b) / b;
        dx * dx + dy * dy <= 1.0
    })
}

fn to_rgba(img: &RgbImage) -> Vec<u8> {
    img.pixels().flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

/// Pastes a brown elliptical "animal" onto a gradient background of
/// `width x height` at the given center and scale. `sigma <= 0` pastes
/// through the mask; otherwise the box is blended with a Gaussian alpha
/// of that width and no mask. Returns RGBA pixels, row-major.
pub fn composite_preview(width: u32, height: u32, center_x: f64, center_y: f64, scale: f64, sigma: f64) -> Result<Vec<u8>, String> {
    if width == 0 || height == 0 || width > 2048 || height > 2048 {
        return Err(format!("canvas {width}x{height} out of range"));
    }
    let src = SourceCutout {
        id: "demo".into(),
        class_label: "deer".into(),
        pose_id: "p0".into(),
        image: RgbImage::from_fn(60, 40, |x, y| {
            if (x + y) % 7 == 0 {
                Rgb([120, 80, 40])
            } else {
                Rgb([150, 105, 60])
            }
        }),
        bbox: BoundingBox::new(0.0, 0.0, 60.0, 40.0).map_err(err)?,
        mask: Some(ellipse(60, 40)),
    };
    let target = Background {
        id: "gradient".into(),
        image: gradient(width, height),
    };
    let blend = if sigma > 0.0 {
        BlendMode::GaussianNoMask { sigma }
    } else {
        BlendMode::MaskPaste
    };
    let (_, out) = composite(&CompositeRecipe {
        source: &src,
        target: &target,
        placement: Placement {
            center_x,
            center_y,
            scale,
        },
        blend,
        seed: 0,
    })
    .map_err(err)?;
    Ok(to_rgba(&out))
}

/// Moves an elliptical mask drawn in `prev_box` into `cur_box` on a
/// `width x height` canvas. Returns RGBA pixels: the previous mask in
/// blue, the propagated mask in orange, overlap in white.
pub fn propagate_preview(width: u32, height: u32, prev: [f64; 4], cur: [f64; 4]) -> Result<Vec<u8>, String> {
    if width == 0 || height == 0 || width > 2048 || height > 2048 {
        return Err(format!("canvas {width}x{height} out of range"));
    }
    let prev_box = BoundingBox::new(prev[0], prev[1], prev[2], prev[3]).map_err(err)?;
    let cur_box = BoundingBox::new(cur[0], cur[1], cur[2], cur[3]).map_err(err)?;
    let pr = prev_box.pixel_rect();
    let cr = cur_box.pixel_rect();
    let mask = ellipse(pr.width, pr.height);
    let moved = propagate_mask(&mask, &prev_box, &cur_box).map_err(err)?;
    let a = mask.place(width, height, pr.x as i64, pr.y as i64);
    let b = moved.mask.place(width, height, cr.x as i64, cr.y as i64);
    let mut out = Vec::with_capacity((width * height * 4) as usize);
    for y in 0..height {
        for x in 0..width {
            let px = match (a.get(x, y), b.get(x, y)) {
                (true, true) => [255, 255, 255, 255],
                (true, false) => [60, 120, 230, 255],
                (false, true) => [240, 140, 40, 255],
                (false, false) => [24, 24, 28, 255],
            };
            out.extend_from_slice(&px);
        }
    }
    Ok(out)
}

#[wasm_bindgen(js_name = exploreRp)]
pub fn explore_rp_js(gt_csv: &str, det_csv: &str, iou_threshold: f64) -> Result<String, JsError> {
    explore_rp(gt_csv, det_csv, iou_threshold).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compositePreview)]
pub fn composite_preview_js(width: u32, height: u32, center_x: f64, center_y: f64, scale: f64, sigma: f64) -> Result<Vec<u8>, JsError> {
    composite_preview(width, height, center_x, center_y, scale, sigma).map_err(|e| JsError::new(&e))
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen(js_name = propagatePreview)]
pub fn propagate_preview_js(
    width: u32,
    height: u32,
    px0: f64,
    py0: f64,
    px1: f64,
    py1: f64,
    cx0: f64,
    cy0: f64,
    cx1: f64,
    cy1: f64,
) -> Result<Vec<u8>, JsError> {
    propagate_preview(width, height, [px0, py0, px1, py1], [cx0, cy0, cx1, cy1]).map_err(|e| JsError::new(&e))
}
