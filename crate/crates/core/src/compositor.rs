//! Copy-paste synthesis of training images.
//!
//! An annotated animal is cut from a source image and inserted, scaled, into
//! a target background. With a mask the animal's pixels are pasted exactly;
//! without one the whole box is feathered into the background through a
//! Gaussian-smoothed alpha map. Candidate sources can be ranked per
//! background by color-histogram similarity.

use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BinaryMask, BoundingBox, PixelRect};
use crate::par;
use crate::rng::SeededRng;

pub const HIST_BINS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompositeError {
    #[error("placed box {placed:?} does not fit inside the {width}x{height} target")]
    OutOfBounds {
        placed: PixelRect,
        width: u32,
        height: u32,
    },
    #[error("source '{0}' has no mask but mask paste was requested")]
    MissingMask(String),
    #[error("source '{id}': mask is {mask_w}x{mask_h} but its box covers {box_w}x{box_h} pixels")]
    MaskSize {
        id: String,
        mask_w: u32,
        mask_h: u32,
        box_w: u32,
        box_h: u32,
    },
    #[error("source '{0}': box lies outside the source image")]
    SourceBox(String),
    #[error("gaussian sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("invalid scale {0}")]
    BadScale(f64),
    #[error("invalid scale range [{0}, {1}]")]
    BadScaleRange(f64, f64),
    #[error("class '{0}' has no source images")]
    NoSources(String),
    #[error("no background images")]
    NoBackgrounds,
    #[error("composite {class}/{background}/{pose} from '{source_id}' failed: {reason}")]
    Failed {
        class: String,
        background: String,
        pose: String,
        source_id: String,
        reason: Box<CompositeError>,
    },
}

/// Per-channel normalized color histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    pub bins: [[f64; HIST_BINS]; 3],
}

impl ColorHistogram {
    pub fn of(image: &RgbImage, rect: Option<PixelRect>) -> Self {
        let rect = rect.unwrap_or(PixelRect {
            x: 0,
            y: 0,
            width: image.width(),
            height: image.height(),
        });
        let mut bins = [[0.0; HIST_BINS]; 3];
        let mut n = 0usize;
        for y in rect.y..(rect.y + rect.height).min(image.height()) {
            for x in rect.x..(rect.x + rect.width).min(image.width()) {
                let p = image.get_pixel(x, y);
                for c in 0..3 {
                    bins[c][p[c] as usize * HIST_BINS / 256] += 1.0;
                }
                n += 1;
            }
        }
        if n > 0 {
            for ch in &mut bins {
                for b in ch.iter_mut() {
                    *b /= n as f64;
                }
            }
        }
        ColorHistogram { bins }
    }

    /// Symmetric chi-square distance `sum (a - b)^2 / (a + b)` over all
    /// bins of all channels. Ranges over `[0, 2 * channels]`.
    pub fn chi_square(&self, other: &ColorHistogram) -> f64 {
        let mut d = 0.0;
        for c in 0..3 {
            for i in 0..HIST_BINS {
                let (a, b) = (self.bins[c][i], other.bins[c][i]);
                if a + b > 0.0 {
                    d += (a - b) * (a - b) / (a + b);
                }
            }
        }
        d
    }
}

/// Part of an image, usually the annotated animal.
#[derive(Debug, Clone, Copy)]
pub struct ImageRegion<'a> {
    pub image: &'a RgbImage,
    pub rect: Option<PixelRect>,
}

impl<'a> ImageRegion<'a> {
    pub fn full(image: &'a RgbImage) -> Self {
        ImageRegion { image, rect: None }
    }
}

/// Histogram distance between a source region and a target; lower is a
/// better match.
pub fn histogram_match_score(source: ImageRegion<'_>, target: &RgbImage) -> f64 {
    ColorHistogram::of(source.image, source.rect).chi_square(&ColorHistogram::of(target, None))
}

/// Indices of `sources` with their scores, best match first. Equal scores
/// keep input order.
pub fn rank_sources(sources: &[ImageRegion<'_>], target: &RgbImage) -> Vec<(usize, f64)> {
    let th = ColorHistogram::of(target, None);
    let mut scored: Vec<(usize, f64)> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| (i, ColorHistogram::of(s.image, s.rect).chi_square(&th)))
        .collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    scored
}

/// An annotated animal available for pasting.
#[derive(Debug, Clone)]
pub struct SourceCutout {
    pub id: String,
    pub class_label: String,
    pub pose_id: String,
    pub image: RgbImage,
    pub bbox: BoundingBox,
    /// Foreground over `bbox.pixel_rect()`.
    pub mask: Option<BinaryMask>,
}

#[derive(Debug, Clone)]
pub struct Background {
    pub id: String,
    pub image: RgbImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub center_x: f64,
    pub center_y: f64,
    /// Size of the pasted box relative to the source box.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BlendMode {
    MaskPaste,
    GaussianNoMask { sigma: f64 },
}

pub struct CompositeRecipe<'a> {
    pub source: &'a SourceCutout,
    pub target: &'a Background,
    pub placement: Placement,
    pub blend: BlendMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAnnotation {
    pub bbox: BoundingBox,
    pub class_label: String,
    pub background_id: String,
    pub pose_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeEcho {
    pub source_id: String,
    pub background_id: String,
    pub placement: Placement,
    pub blend: BlendMode,
    pub seed: u64,
}

/// One generated image and how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRecord {
    pub image_id: String,
    /// Relative to the output directory.
    pub output_path: String,
    pub annotation: SyntheticAnnotation,
    pub recipe: RecipeEcho,
}

/// Canonical id and relative output path of a synthetic image.
pub fn synthetic_name(class: &str, background: &str, pose: &str) -> (String, String) {
    (
        format!("syn_{class}_{background}_{pose}"),
        format!("{class}/{background}_{pose}.png"),
    )
}

fn placed_rect(source: &SourceCutout, target: &RgbImage, p: &Placement) -> Result<PixelRect, CompositeError> {
    if !(p.scale.is_finite() && p.scale > 0.0) {
        return Err(CompositeError::BadScale(p.scale));
    }
    let sr = source.bbox.pixel_rect();
    let dw = ((sr.width as f64 * p.scale).round() as u32).max(1);
    let dh = ((sr.height as f64 * p.scale).round() as u32).max(1);
    let x0 = (p.center_x - dw as f64 / 2.0).round();
    let y0 = (p.center_y - dh as f64 / 2.0).round();
    let out = |x: f64, y: f64| CompositeError::OutOfBounds {
        placed: PixelRect {
            x: x.max(0.0) as u32,
            y: y.max(0.0) as u32,
            width: dw,
            height: dh,
        },
        width: target.width(),
        height: target.height(),
    };
    if !(x0 >= 0.0 && y0 >= 0.0) {
        return Err(out(x0, y0));
    }
    let rect = PixelRect {
        x: x0 as u32,
        y: y0 as u32,
        width: dw,
        height: dh,
    };
    if !rect.fits_in(target.width(), target.height()) {
        return Err(out(x0, y0));
    }
    Ok(rect)
}

/// Maps target pixels back into the source image.
struct Resampler<'a> {
    src: &'a RgbImage,
    sr: PixelRect,
    dst: PixelRect,
    fx: f64,
    fy: f64,
}

impl<'a> Resampler<'a> {
    fn new(src: &'a RgbImage, sr: PixelRect, dst: PixelRect) -> Self {
        Resampler {
            src,
            sr,
            dst,
            fx: sr.width as f64 / dst.width as f64,
            fy: sr.height as f64 / dst.height as f64,
        }
    }

    /// Bilinear sample, clamped to the source image.
    fn color(&self, x: u32, y: u32) -> [f64; 3] {
        let sx = self.sr.x as f64 + (x as f64 - self.dst.x as f64 + 0.5) * self.fx - 0.5;
        let sy = self.sr.y as f64 + (y as f64 - self.dst.y as f64 + 0.5) * self.fy - 0.5;
        let (w, h) = (self.src.width() as i64, self.src.height() as i64);
        let x0 = sx.floor();
        let y0 = sy.floor();
        let (ax, ay) = (sx - x0, sy - y0);
        let cx = |v: i64| v.clamp(0, w - 1) as u32;
        let cy = |v: i64| v.clamp(0, h - 1) as u32;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let p00 = self.src.get_pixel(cx(x0), cy(y0));
        let p10 = self.src.get_pixel(cx(x0 + 1), cy(y0));
        let p01 = self.src.get_pixel(cx(x0), cy(y0 + 1));
        let p11 = self.src.get_pixel(cx(x0 + 1), cy(y0 + 1));
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - ax) + p10[c] as f64 * ax;
            let bot = p01[c] as f64 * (1.0 - ax) + p11[c] as f64 * ax;
            out[c] = top * (1.0 - ay) + bot * ay;
        }
        out
    }

    /// Nearest-neighbor mask lookup for a pixel inside the placed box.
    fn mask(&self, mask: &BinaryMask, x: u32, y: u32) -> bool {
        let u = ((x - self.dst.x) as f64 + 0.5) * self.fx;
        let v = ((y - self.dst.y) as f64 + 0.5) * self.fy;
        let u = (u.floor() as u32).min(self.sr.width - 1);
        let v = (v.floor() as u32).min(self.sr.height - 1);
        mask.get(u, v)
    }
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Discrete Gaussian smoothing of a 1-D box indicator `[start, start+len)`,
/// evaluated on `0..n` and scaled to peak 1.
fn feather_profile(n: u32, start: u32, len: u32, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let (s, e) = (start as i64, (start + len) as i64);
    let mut prof: Vec<f64> = (0..n as i64)
        .map(|x| {
            let mut a = 0.0;
            for (i, k) in (-radius..=radius).enumerate() {
                let src = x - k;
                if src >= s && src < e {
                    a += kernel[i];
                }
            }
            a / total
        })
        .collect();
    let peak = prof.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        for v in &mut prof {
            *v /= peak;
        }
    }
    prof
}

/// Renders one synthetic image.
pub fn composite(recipe: &CompositeRecipe<'_>) -> Result<(SyntheticRecord, RgbImage), CompositeError> {
    let src = recipe.source;
    let tgt = &recipe.target.image;
    let sr = src.bbox.pixel_rect();
    if !sr.fits_in(src.image.width(), src.image.height()) {
        return Err(CompositeError::SourceBox(src.id.clone()));
    }
    if let BlendMode::GaussianNoMask { sigma } = recipe.blend {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(CompositeError::BadSigma(sigma));
        }
    }
    let mask = match (&recipe.blend, &src.mask) {
        (BlendMode::MaskPaste, None) => return Err(CompositeError::MissingMask(src.id.clone())),
        (_, Some(m)) if m.dimensions() != (sr.width, sr.height) => {
            return Err(CompositeError::MaskSize {
                id: src.id.clone(),
                mask_w: m.width(),
                mask_h: m.height(),
                box_w: sr.width,
                box_h: sr.height,
            })
        }
        (_, m) => m.as_ref(),
    };
    let dst = placed_rect(src, tgt, &recipe.placement)?;
    let rs = Resampler::new(&src.image, sr, dst);

    let mut out = tgt.clone();
    match recipe.blend {
        BlendMode::MaskPaste => {
            let mask = mask.expect("checked above");
            for y in dst.y..dst.y + dst.height {
                for x in dst.x..dst.x + dst.width {
                    if rs.mask(mask, x, y) {
                        let c = rs.color(x, y);
                        out.put_pixel(x, y, Rgb([to_u8(c[0]), to_u8(c[1]), to_u8(c[2])]));
                    }
                }
            }
        }
        BlendMode::GaussianNoMask { sigma } => {
            let ax = feather_profile(tgt.width(), dst.x, dst.width, sigma);
            let ay = feather_profile(tgt.height(), dst.y, dst.height, sigma);
            for y in 0..tgt.height() {
                if ay[y as usize] == 0.0 {
                    continue;
                }
                for x in 0..tgt.width() {
                    let a = ax[x as usize] * ay[y as usize];
                    if a == 0.0 {
                        continue;
                    }
                    let c = rs.color(x, y);
                    let t = tgt.get_pixel(x, y);
                    let mut px = [0u8; 3];
                    for ch in 0..3 {
                        px[ch] = to_u8(c[ch] * a + t[ch] as f64 * (1.0 - a));
                    }
                    out.put_pixel(x, y, Rgb(px));
                }
            }
        }
    }

    let (image_id, output_path) = synthetic_name(&src.class_label, &recipe.target.id, &src.pose_id);
    let record = SyntheticRecord {
        image_id,
        output_path,
        annotation: SyntheticAnnotation {
            bbox: dst.to_box(),
            class_label: src.class_label.clone(),
            background_id: recipe.target.id.clone(),
            pose_id: src.pose_id.clone(),
        },
        recipe: RecipeEcho {
            source_id: src.id.clone(),
            background_id: recipe.target.id.clone(),
            placement: recipe.placement,
            blend: recipe.blend,
            seed: recipe.seed,
        },
    };
    Ok((record, out))
}

/// Seeded placement: scale uniform in `[scale_min, scale_max]` (shrunk to
/// what fits the background), top-left corner uniform over the positions
/// that keep the pasted box inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementPolicy {
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for PlacementPolicy {
    fn default() -> Self {
        PlacementPolicy {
            scale_min: 0.5,
            scale_max: 1.0,
        }
    }
}

impl PlacementPolicy {
    pub fn validate(&self) -> Result<(), CompositeError> {
        if self.scale_min > 0.0 && self.scale_min <= self.scale_max && self.scale_max.is_finite() {
            Ok(())
        } else {
            Err(CompositeError::BadScaleRange(self.scale_min, self.scale_max))
        }
    }

    pub fn place(&self, source: &SourceCutout, target: &RgbImage, rng: &mut SeededRng) -> Placement {
        let sr = source.bbox.pixel_rect();
        let fit = (target.width() as f64 / sr.width as f64).min(target.height() as f64 / sr.height as f64);
        let scale = rng.uniform(self.scale_min.min(fit), self.scale_max.min(fit));
        let dw = ((sr.width as f64 * scale).round() as u32).clamp(1, target.width());
        let dh = ((sr.height as f64 * scale).round() as u32).clamp(1, target.height());
        let x0 = rng.below((target.width() - dw + 1) as u64) as f64;
        let y0 = rng.below((target.height() - dh + 1) as u64) as f64;
        Placement {
            center_x: x0 + dw as f64 / 2.0,
            center_y: y0 + dh as f64 / 2.0,
            scale,
        }
    }
}

pub struct DatasetRequest<'a> {
    /// Class label -> available poses.
    pub sources: &'a BTreeMap<String, Vec<SourceCutout>>,
    pub backgrounds: &'a [Background],
    pub policy: PlacementPolicy,
    pub blend: BlendMode,
    pub seed: u64,
}

/// One composite for every (class, background, pose). Each output is handed
/// to `sink` as soon as it is rendered; the returned records are ordered by
/// class, background and pose whatever the rendering order. The first
/// failure in that order aborts the run.
pub fn generate_dataset<E, F>(req: &DatasetRequest<'_>, sink: F) -> Result<Vec<SyntheticRecord>, E>
where
    E: From<CompositeError> + Send,
    F: Fn(&SyntheticRecord, &RgbImage) -> Result<(), E> + Sync + Send,
{
    req.policy.validate()?;
    if req.backgrounds.is_empty() {
        return Err(CompositeError::NoBackgrounds.into());
    }
    let mut backgrounds: Vec<&Background> = req.backgrounds.iter().collect();
    backgrounds.sort_by(|a, b| a.id.cmp(&b.id));

    let mut tasks: Vec<(&str, &Background, &SourceCutout)> = Vec::new();
    for (class, poses) in req.sources {
        if poses.is_empty() {
            return Err(CompositeError::NoSources(class.clone()).into());
        }
        let mut poses: Vec<&SourceCutout> = poses.iter().collect();
        poses.sort_by(|a, b| a.pose_id.cmp(&b.pose_id));
        for bg in &backgrounds {
            for src in &poses {
                tasks.push((class, bg, src));
            }
        }
    }

    let results = par::map(&tasks, |&(class, bg, src)| -> Result<SyntheticRecord, E> {
        let mut rng = SeededRng::new(req.seed, &format!("place/{class}/{}/{}", bg.id, src.pose_id));
        let placement = req.policy.place(src, &bg.image, &mut rng);
        let recipe = CompositeRecipe {
            source: src,
            target: bg,
            placement,
            blend: req.blend,
            seed: req.seed,
        };
        let (record, image) = composite(&recipe).map_err(|e| CompositeError::Failed {
            class: class.to_owned(),
            background: bg.id.clone(),
            pose: src.pose_id.clone(),
            source_id: src.id.clone(),
            reason: Box::new(e),
        })?;
        sink(&record, &image)?;
        Ok(record)
    });
    results.into_iter().collect()
}
