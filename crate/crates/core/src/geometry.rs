//! Boxes, binary masks and the box-pair transforms used to move masks
//! between frames.
//!
//! Boxes are continuous and half-open: a box `(0, 0, 10, 10)` covers pixel
//! columns `0..10` when rasterized. Masks are stored in the local frame of
//! the region they describe, so mask pixel `(0, 0)` sits at the region's
//! top-left corner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },
    #[error("invalid transform: scales must be positive and finite")]
    InvalidTransform,
    #[error("mask data has {actual} bytes, expected {width}x{height}")]
    MaskSize {
        width: u32,
        height: u32,
        actual: usize,
    },
    #[error("empty mask")]
    EmptyMask,
}

/// Axis-aligned box in pixel coordinates, origin top-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    /// Builds a box, checking that coordinates are finite, non-negative and
    /// that the box has positive extent on both axes.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, GeometryError> {
        let b = BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        match b.violation() {
            None => Ok(b),
            Some(reason) => Err(GeometryError::InvalidBox {
                x_min,
                y_min,
                x_max,
                y_max,
                reason,
            }),
        }
    }

    fn violation(&self) -> Option<&'static str> {
        let c = [self.x_min, self.y_min, self.x_max, self.y_max];
        if c.iter().any(|v| !v.is_finite()) {
            Some("non-finite coordinate")
        } else if c.iter().any(|&v| v < 0.0) {
            Some("negative coordinate")
        } else if self.x_min >= self.x_max || self.y_min >= self.y_max {
            Some("empty extent")
        } else {
            None
        }
    }

    pub fn is_valid(&self) -> bool {
        self.violation().is_none()
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BoundingBox {
            x_min: cx - 0.5 * w,
            y_min: cy - 0.5 * h,
            x_max: cx + 0.5 * w,
            y_max: cy + 0.5 * h,
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        BoundingBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
        }
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Whether this box lies entirely inside `[0, width) x [0, height)`.
    pub fn inside(&self, width: f64, height: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max <= width && self.y_max <= height
    }

    /// Clamps the box to `[0, width] x [0, height]`, keeping at least one
    /// unit of extent when the box falls entirely outside.
    pub fn clamp_to(&self, width: f64, height: f64) -> Self {
        let x_min = self.x_min.clamp(0.0, (width - 1.0).max(0.0));
        let y_min = self.y_min.clamp(0.0, (height - 1.0).max(0.0));
        let x_max = self.x_max.clamp(x_min + 1.0, width.max(x_min + 1.0));
        let y_max = self.y_max.clamp(y_min + 1.0, height.max(y_min + 1.0));
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Integer pixel footprint: corners rounded to the nearest pixel edge,
    /// at least one pixel on each axis.
    pub fn pixel_rect(&self) -> PixelRect {
        let x = self.x_min.round().max(0.0) as u32;
        let y = self.y_min.round().max(0.0) as u32;
        let x1 = (self.x_max.round().max(0.0) as u32).max(x + 1);
        let y1 = (self.y_max.round().max(0.0) as u32).max(y + 1);
        PixelRect {
            x,
            y,
            width: x1 - x,
            height: y1 - y,
        }
    }
}

/// Intersection over union of two valid boxes; 0 when they are disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Integer pixel rectangle `[x, x + width) x [y, y + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl PixelRect {
    pub fn to_box(self) -> BoundingBox {
        BoundingBox {
            x_min: self.x as f64,
            y_min: self.y as f64,
            x_max: (self.x + self.width) as f64,
            y_max: (self.y + self.height) as f64,
        }
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.x + self.width <= width && self.y + self.height <= height
    }
}

/// Anisotropic scale followed by translation: `p' = scale * p + translate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxTransform {
    pub translate_x: f64,
    pub translate_y: f64,
    pub scale_x: f64,
    pub scale_y: f64,
}

impl Default for BoxTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl BoxTransform {
    pub const IDENTITY: BoxTransform = BoxTransform {
        translate_x: 0.0,
        translate_y: 0.0,
        scale_x: 1.0,
        scale_y: 1.0,
    };

    pub fn new(
        translate_x: f64,
        translate_y: f64,
        scale_x: f64,
        scale_y: f64,
    ) -> Result<Self, GeometryError> {
        let ok = [translate_x, translate_y].iter().all(|v| v.is_finite())
            && [scale_x, scale_y].iter().all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(GeometryError::InvalidTransform);
        }
        Ok(BoxTransform {
            translate_x,
            translate_y,
            scale_x,
            scale_y,
        })
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        BoxTransform {
            translate_x: dx,
            translate_y: dy,
            ..Self::IDENTITY
        }
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        BoxTransform {
            scale_x: sx,
            scale_y: sy,
            ..Self::IDENTITY
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.scale_x * x + self.translate_x,
            self.scale_y * y + self.translate_y,
        )
    }

    #[inline]
    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.translate_x) / self.scale_x,
            (y - self.translate_y) / self.scale_y,
        )
    }

    pub fn apply_box(&self, b: &BoundingBox) -> BoundingBox {
        let (x_min, y_min) = self.apply(b.x_min, b.y_min);
        let (x_max, y_max) = self.apply(b.x_max, b.y_max);
        BoundingBox {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn inverse(&self) -> Self {
        BoxTransform {
            translate_x: -self.translate_x / self.scale_x,
            translate_y: -self.translate_y / self.scale_y,
            scale_x: 1.0 / self.scale_x,
            scale_y: 1.0 / self.scale_y,
        }
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &BoxTransform) -> Self {
        BoxTransform {
            translate_x: self.scale_x * first.translate_x + self.translate_x,
            translate_y: self.scale_y * first.translate_y + self.translate_y,
            scale_x: self.scale_x * first.scale_x,
            scale_y: self.scale_y * first.scale_y,
        }
    }
}

/// The unique scale + translation taking `prev` onto `cur`: scales are the
/// width and height ratios, and the translation moves the scaled center of
/// `prev` onto the center of `cur`.
pub fn box_transform_between(prev: &BoundingBox, cur: &BoundingBox) -> BoxTransform {
    let scale_x = cur.width() / prev.width();
    let scale_y = cur.height() / prev.height();
    let (pcx, pcy) = prev.center();
    let (ccx, ccy) = cur.center();
    BoxTransform {
        translate_x: ccx - scale_x * pcx,
        translate_y: ccy - scale_y * pcy,
        scale_x,
        scale_y,
    }
}

/// Row-major foreground bitmap. Values are normalized to 0/1 on entry.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BinaryMask({}x{}, {} fg)",
            self.width,
            self.height,
            self.count()
        )
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![1; width as usize * height as usize],
        }
    }

    /// Wraps raw bytes; any nonzero byte is foreground.
    pub fn from_raw(width: u32, height: u32, mut data: Vec<u8>) -> Result<Self, GeometryError> {
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::MaskSize {
                width,
                height,
                actual: data.len(),
            });
        }
        for v in &mut data {
            *v = (*v != 0) as u8;
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    /// 0/1 bytes, row-major.
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize] != 0
    }

    /// Like [`get`](Self::get) but background outside the raster.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u64) < self.width as u64
            && (y as u64) < self.height as u64
            && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Iterator over foreground pixel coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    /// Copies the sub-rectangle `rect`; pixels outside the raster read as
    /// background.
    pub fn crop(&self, rect: PixelRect) -> BinaryMask {
        BinaryMask::from_fn(rect.width, rect.height, |x, y| {
            self.get_signed(rect.x as i64 + x as i64, rect.y as i64 + y as i64)
        })
    }

    /// Pastes this mask into a `width x height` canvas at `(x, y)`.
    pub fn place(&self, width: u32, height: u32, x: i64, y: i64) -> BinaryMask {
        BinaryMask::from_fn(width, height, |u, v| {
            self.get_signed(u as i64 - x, v as i64 - y)
        })
    }

    /// Fraction of pixels on which two equally sized masks agree.
    pub fn agreement(&self, other: &BinaryMask) -> f64 {
        assert_eq!(self.dimensions(), other.dimensions());
        if self.data.is_empty() {
            return 1.0;
        }
        let same = self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a == b)
            .count();
        same as f64 / self.data.len() as f64
    }
}

/// Outcome of a warp: the mask plus whether it came out empty. An empty
/// result is reported, not treated as a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub mask: BinaryMask,
    pub empty: bool,
}

/// Resamples `mask` (the raster of `region`) under `t`.
///
/// The output raster shares the input's frame: output pixel `(u, v)` is the
/// image point `(region.x_min + u + 0.5, region.y_min + v + 0.5)`. Each
/// output pixel is pulled back through the inverse transform and takes the
/// nearest source pixel; anything that maps outside the source is
/// background.
pub fn warp_mask(
    mask: &BinaryMask,
    region: &BoundingBox,
    t: &BoxTransform,
    out_size: (u32, u32),
) -> Warped {
    warp_mask_into(mask, region, t, (region.x_min, region.y_min), out_size)
}

/// [`warp_mask`] with an explicit output frame origin in image coordinates.
pub fn warp_mask_into(
    mask: &BinaryMask,
    region: &BoundingBox,
    t: &BoxTransform,
    out_origin: (f64, f64),
    out_size: (u32, u32),
) -> Warped {
    let (ow, oh) = out_size;
    let out = BinaryMask::from_fn(ow, oh, |u, v| {
        let px = out_origin.0 + u as f64 + 0.5;
        let py = out_origin.1 + v as f64 + 0.5;
        let (sx, sy) = t.apply_inverse(px, py);
        let lx = (sx - region.x_min).floor();
        let ly = (sy - region.y_min).floor();
        lx.is_finite() && ly.is_finite() && mask.get_signed(lx as i64, ly as i64)
    });
    let empty = out.is_empty();
    if empty {
        log::warn!("warped mask is empty ({ow}x{oh})");
    }
    Warped { mask: out, empty }
}

/// Tightest half-open box around every foreground pixel.
pub fn box_from_mask(mask: &BinaryMask) -> Result<BoundingBox, GeometryError> {
    let mut it = mask.foreground();
    let (x0, y0) = it.next().ok_or(GeometryError::EmptyMask)?;
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (x0, y0, x0, y0);
    for (x, y) in it {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    Ok(BoundingBox {
        x_min: xmin as f64,
        y_min: ymin as f64,
        x_max: (xmax + 1) as f64,
        y_max: (ymax + 1) as f64,
    })
}
