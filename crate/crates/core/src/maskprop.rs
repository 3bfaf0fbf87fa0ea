//! Semi-automatic mask generation: carry an annotated mask to a later frame
//! using the motion of its bounding box, or recover a rough mask from an
//! externally computed edge map.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::{box_transform_between, warp_mask_into, BinaryMask, BoundingBox, PixelRect, Warped};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("box {0:?} is not inside the {1}x{2} edge map")]
    BoxOutside(BoundingBox, u32, u32),
    #[error("window must be odd and at least 3, got {0}")]
    BadWindow(u32),
    #[error("edge map has {actual} values, expected {width}x{height}")]
    EdgeSize {
        width: u32,
        height: u32,
        actual: usize,
    },
    #[error("edge strength {0} outside [0, 1]")]
    EdgeRange(f32),
    #[error("mask is {mask_w}x{mask_h} but its box covers {box_w}x{box_h} pixels")]
    MaskBoxMismatch {
        mask_w: u32,
        mask_h: u32,
        box_w: u32,
        box_h: u32,
    },
    #[error("no boundary found")]
    NoBoundary,
}

/// Per-pixel edge strength in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl EdgeMap {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, MaskError> {
        if data.len() != width as usize * height as usize {
            return Err(MaskError::EdgeSize {
                width,
                height,
                actual: data.len(),
            });
        }
        if let Some(&v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(MaskError::EdgeRange(v));
        }
        Ok(EdgeMap {
            width,
            height,
            data,
        })
    }

    /// 8-bit grayscale scaled to `[0, 1]`.
    pub fn from_gray(width: u32, height: u32, pixels: &[u8]) -> Result<Self, MaskError> {
        EdgeMap::new(width, height, pixels.iter().map(|&p| p as f32 / 255.0).collect())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Moves `prev_mask` (the raster of `prev_box`) into the frame of
/// `cur_box`, scaling and translating it with the box motion. The result is
/// `cur_box`'s pixel extent; an empty result is flagged, not an error.
pub fn propagate_mask(prev_mask: &BinaryMask, prev_box: &BoundingBox, cur_box: &BoundingBox) -> Result<Warped, MaskError> {
    let pr = prev_box.pixel_rect();
    if prev_mask.dimensions() != (pr.width, pr.height) {
        return Err(MaskError::MaskBoxMismatch {
            mask_w: prev_mask.width(),
            mask_h: prev_mask.height(),
            box_w: pr.width,
            box_h: pr.height,
        });
    }
    let t = box_transform_between(prev_box, cur_box);
    let cr = cur_box.pixel_rect();
    Ok(warp_mask_into(
        prev_mask,
        &pr.to_box(),
        &t,
        (cr.x as f64, cr.y as f64),
        (cr.width, cr.height),
    ))
}

/// Rough object mask from an edge map, as a full-size raster.
///
/// Inside `bbox`, a pixel is foreground when its edge strength exceeds the
/// mean over the `window x window` neighbourhood (clipped at the map border)
/// plus `offset`. The largest 4-connected foreground component is kept and
/// its holes are filled. Everything outside the box is background.
pub fn refine_with_edges(edges: &EdgeMap, bbox: &BoundingBox, window: u32, offset: f32) -> Result<BinaryMask, MaskError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(MaskError::BadWindow(window));
    }
    if !bbox.inside(edges.width as f64, edges.height as f64) {
        return Err(MaskError::BoxOutside(*bbox, edges.width, edges.height));
    }
    let rect = bbox.pixel_rect();
    if !rect.fits_in(edges.width, edges.height) {
        return Err(MaskError::BoxOutside(*bbox, edges.width, edges.height));
    }

    let integral = Integral::new(edges);
    let r = window / 2;
    let local = BinaryMask::from_fn(rect.width, rect.height, |u, v| {
        let (x, y) = (rect.x + u, rect.y + v);
        let x0 = x.saturating_sub(r);
        let y0 = y.saturating_sub(r);
        let x1 = (x + r + 1).min(edges.width);
        let y1 = (y + r + 1).min(edges.height);
        let mean = integral.sum(x0, y0, x1, y1) / ((x1 - x0) as f64 * (y1 - y0) as f64);
        edges.get(x, y) as f64 > mean + offset as f64
    });

    let component = largest_component(&local).ok_or(MaskError::NoBoundary)?;
    let filled = fill_holes(&component);
    Ok(filled.place(edges.width, edges.height, rect.x as i64, rect.y as i64))
}

struct Integral {
    stride: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(e: &EdgeMap) -> Self {
        let stride = e.width as usize + 1;
        let mut sums = vec![0.0; stride * (e.height as usize + 1)];
        for y in 0..e.height as usize {
            let mut row = 0.0;
            for x in 0..e.width as usize {
                row += e.data[y * e.width as usize + x] as f64;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Integral { stride, sums }
    }

    fn sum(&self, x0: u32, y0: u32, x1: u32, y1: u32) -> f64 {
        let at = |x: u32, y: u32| self.sums[y as usize * self.stride + x as usize];
        at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0)
    }
}

const N4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Flood-fills from `seed` over pixels where `inside` holds, 4-connected.
fn flood(w: u32, h: u32, seed: (u32, u32), seen: &mut [bool], inside: impl Fn(u32, u32) -> bool) -> Vec<(u32, u32)> {
    let idx = |x: u32, y: u32| y as usize * w as usize + x as usize;
    let mut out = Vec::new();
    let mut queue = VecDeque::from([seed]);
    seen[idx(seed.0, seed.1)] = true;
    while let Some((x, y)) = queue.pop_front() {
        out.push((x, y));
        for (dx, dy) in N4 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as u32, ny as u32);
            if !seen[idx(nx, ny)] && inside(nx, ny) {
                seen[idx(nx, ny)] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    out
}

/// Largest 4-connected component; the first in raster order wins ties.
pub fn largest_component(mask: &BinaryMask) -> Option<BinaryMask> {
    let (w, h) = mask.dimensions();
    let mut seen = vec![false; w as usize * h as usize];
    let mut best: Vec<(u32, u32)> = Vec::new();
    for (x, y) in mask.foreground() {
        if seen[y as usize * w as usize + x as usize] {
            continue;
        }
        let comp = flood(w, h, (x, y), &mut seen, |a, b| mask.get(a, b));
        if comp.len() > best.len() {
            best = comp;
        }
    }
    if best.is_empty() {
        return None;
    }
    let mut out = BinaryMask::new(w, h);
    for (x, y) in best {
        out.set(x, y, true);
    }
    Some(out)
}

/// Marks as foreground every background pixel that cannot reach the raster
/// border through 4-connected background.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dimensions();
    let mut outside = vec![false; w as usize * h as usize];
    let border = (0..w)
        .flat_map(|x| [(x, 0), (x, h.saturating_sub(1))])
        .chain((0..h).flat_map(|y| [(0, y), (w.saturating_sub(1), y)]));
    for (x, y) in border {
        if !mask.get(x, y) && !outside[y as usize * w as usize + x as usize] {
            flood(w, h, (x, y), &mut outside, |a, b| !mask.get(a, b));
        }
    }
    BinaryMask::from_fn(w, h, |x, y| !outside[y as usize * w as usize + x as usize])
}

/// Region of a full-frame mask covered by `bbox`, for feeding
/// [`propagate_mask`].
pub fn crop_to_box(mask: &BinaryMask, bbox: &BoundingBox) -> BinaryMask {
    let r: PixelRect = bbox.pixel_rect();
    mask.crop(r)
}
