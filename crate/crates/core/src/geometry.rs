//! Boxes, bit masks and their overlap measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in continuous pixel units, top-left corner plus size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinates ({x}, {y}, {w}, {h})")));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox(format!("non-positive size {w}x{h}")));
        }
        Ok(BBox { x, y, w, h })
    }

    /// Box from centre, aspect ratio (w/h) and height.
    pub fn from_center_aspect(cx: f64, cy: f64, aspect: f64, height: f64) -> Result<Self> {
        let w = aspect * height;
        BBox::new(cx - w / 2.0, cy - height / 2.0, w, height)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn right(&self) -> f64 {
        self.x + self.w
    }
    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
    pub fn aspect(&self) -> f64 {
        self.w / self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox { x: self.x + dx, y: self.y + dy, ..*self }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Part of the box inside `[0, width) x [0, height)`, if any.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        BBox::new(x0, y0, x1 - x0, y1 - y0).ok()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Intersection over union of two boxes.
pub fn iou_box(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidDetection(format!(
                "mask has {} bits, expected {}x{}",
                bits.len(),
                width,
                height
            )));
        }
        Ok(BitMask { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BitMask { width, height, bits: vec![false; width * height] }
    }

    /// Filled axis-aligned ellipse inscribed in `bbox`; pixel `(c, r)` is set
    /// when its centre `(c + 0.5, r + 0.5)` lies inside the ellipse.
    pub fn ellipse(width: usize, height: usize, bbox: &BBox) -> Self {
        let mut mask = BitMask::empty(width, height);
        let (cx, cy) = bbox.center();
        let (rx, ry) = (bbox.w() / 2.0, bbox.h() / 2.0);
        let r0 = bbox.y().floor().max(0.0) as usize;
        let r1 = (bbox.bottom().ceil().max(0.0) as usize).min(height);
        let c0 = bbox.x().floor().max(0.0) as usize;
        let c1 = (bbox.right().ceil().max(0.0) as usize).min(width);
        for r in r0..r1 {
            let dy = (r as f64 + 0.5 - cy) / ry;
            for c in c0..c1 {
                let dx = (c as f64 + 0.5 - cx) / rx;
                if dx * dx + dy * dy <= 1.0 {
                    mask.bits[r * width + c] = true;
                }
            }
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Tight pixel box around the set bits, `None` when the mask is empty.
    pub fn extent(&self) -> Option<BBox> {
        let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
        for (i, _) in self.bits.iter().enumerate().filter(|(_, &b)| b) {
            let (r, c) = (i / self.width, i % self.width);
            c0 = c0.min(c);
            r0 = r0.min(r);
            c1 = c1.max(c + 1);
            r1 = r1.max(r + 1);
        }
        if c0 == usize::MAX {
            return None;
        }
        BBox::new(c0 as f64, r0 as f64, (c1 - c0) as f64, (r1 - r0) as f64).ok()
    }

    /// Run-length encoding over row-major order: alternating run lengths,
    /// starting with a run of unset pixels (possibly zero).
    pub fn to_rle(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in &self.bits {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        counts
    }

    pub fn from_rle(width: usize, height: usize, counts: &[u32]) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total != (width * height) as u64 {
            return Err(Error::InvalidDetection(format!("RLE covers {total} pixels, mask has {}", width * height)));
        }
        let mut bits = Vec::with_capacity(width * height);
        for (i, &c) in counts.iter().enumerate() {
            bits.extend(std::iter::repeat_n(i % 2 == 1, c as usize));
        }
        Ok(BitMask { width, height, bits })
    }
}

/// Intersection over union of two equally sized masks, by exact pixel count.
pub fn iou_mask(a: &BitMask, b: &BitMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::MaskDimensions(a.width, a.height, b.width, b.height));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Err(Error::EmptyMasks);
    }
    Ok(inter as f64 / union as f64)
}
