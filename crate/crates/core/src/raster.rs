//! Pixel-level primitives shared by the document model and the compositor.
//!
//! Storage is straight-alpha RGBA8 (`image::RgbaImage`). All blending happens on
//! premultiplied `f32` values in `[0, 1]` and is quantized exactly once, with
//! round-half-up on the 255 scale.

use image::RgbaImage;
use serde::{Deserialize, Serialize};

/// Premultiplied RGBA in `[0, 1]`.
pub type Premul = [f32; 4];

pub const TRANSPARENT: Premul = [0.0; 4];

/// Integer rectangle in canvas pixels. `x`/`y` may be negative so that
/// out-of-bounds input can be represented and rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[i64; 4]", try_from = "[i64; 4]")]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x as i64 && x < self.right() && y >= self.y as i64 && y < self.bottom()
    }

    /// True when the rectangle is non-empty and lies inside `[0, width) × [0, height)`.
    pub fn within(&self, width: u32, height: u32) -> bool {
        !self.is_empty() && self.x >= 0 && self.y >= 0 && self.right() <= width as i64 && self.bottom() <= height as i64
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = (self.x as i64).max(other.x as i64);
        let y0 = (self.y as i64).max(other.y as i64);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0 as i32, y0 as i32, (x1 - x0) as u32, (y1 - y0) as u32))
    }

    pub fn union(&self, other: &Rect) -> Rect {
        let x0 = (self.x as i64).min(other.x as i64);
        let y0 = (self.y as i64).min(other.y as i64);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        Rect::new(x0 as i32, y0 as i32, (x1 - x0) as u32, (y1 - y0) as u32)
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersect(other).map_or(0, |r| r.area()) as f64;
        let union = self.area() as f64 + other.area() as f64 - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Grow by `pad` on every side, then clip to the image.
    pub fn padded_within(&self, pad: u32, width: u32, height: u32) -> Option<Rect> {
        let p = pad as i64;
        let grown = Rect::new((self.x as i64 - p) as i32, (self.y as i64 - p) as i32, self.w + 2 * pad, self.h + 2 * pad);
        grown.intersect(&Rect::new(0, 0, width, height))
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }
}

impl From<Rect> for [i64; 4] {
    fn from(r: Rect) -> Self {
        [r.x as i64, r.y as i64, r.w as i64, r.h as i64]
    }
}

impl TryFrom<[i64; 4]> for Rect {
    type Error = String;

    fn try_from(v: [i64; 4]) -> Result<Self, Self::Error> {
        let [x, y, w, h] = v;
        let xy_ok = i32::try_from(x).is_ok() && i32::try_from(y).is_ok();
        if !xy_ok || !(0..=u32::MAX as i64).contains(&w) || !(0..=u32::MAX as i64).contains(&h) {
            return Err(format!("bbox out of range: {v:?}"));
        }
        Ok(Rect::new(x as i32, y as i32, w as u32, h as u32))
    }
}

/// Binary raster; `true` marks a selected pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![true; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|b| *b)
    }

    pub fn crop(&self, rect: Rect) -> BinaryMask {
        BinaryMask::from_fn(rect.w, rect.h, |x, y| self.get((rect.x as i64 + x as i64) as u32, (rect.y as i64 + y as i64) as u32))
    }

    /// OR `other` into `self` with its origin at `(rect.x, rect.y)`. Pixels
    /// falling outside `self` are ignored.
    pub fn paint(&mut self, rect: Rect, other: &BinaryMask) {
        for y in 0..other.height {
            for x in 0..other.width {
                if !other.get(x, y) {
                    continue;
                }
                let cx = rect.x as i64 + x as i64;
                let cy = rect.y as i64 + y as i64;
                if cx >= 0 && cy >= 0 && cx < self.width as i64 && cy < self.height as i64 {
                    self.set(cx as u32, cy as u32, true);
                }
            }
        }
    }

    /// Square (Chebyshev) dilation by `radius` pixels, done as two separable max passes.
    pub fn dilate(&self, radius: u32) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = (self.width as i64, self.height as i64);
        let r = radius as i64;
        let mut horiz = BinaryMask::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let hit = (x - r).max(0)..=(x + r).min(w - 1);
                if hit.into_iter().any(|xx| self.get(xx as u32, y as u32)) {
                    horiz.set(x as u32, y as u32, true);
                }
            }
        }
        let mut out = BinaryMask::new(self.width, self.height);
        for y in 0..h {
            for x in 0..w {
                let hit = (y - r).max(0)..=(y + r).min(h - 1);
                if hit.into_iter().any(|yy| horiz.get(x as u32, yy as u32)) {
                    out.set(x as u32, y as u32, true);
                }
            }
        }
        out
    }

    /// Luma PNG-friendly form: 255 for set pixels, 0 otherwise.
    pub fn to_luma(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width, self.height, |x, y| image::Luma([if self.get(x, y) { 255 } else { 0 }]))
    }

    /// Pixels at or above 128 are set.
    pub fn from_luma(img: &image::GrayImage) -> Self {
        BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y).0[0] >= 128)
    }
}

/// Round-half-up quantization of a `[0, 1]` value onto the 255 scale.
#[inline]
pub fn quantize(v: f32) -> u8 {
    let scaled = (v * 255.0 + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

#[inline]
pub fn premultiply(px: [u8; 4]) -> Premul {
    let a = px[3] as f32 / 255.0;
    [px[0] as f32 / 255.0 * a, px[1] as f32 / 255.0 * a, px[2] as f32 / 255.0 * a, a]
}

/// Source-over on premultiplied values.
#[inline]
pub fn over_pixel(top: Premul, bottom: Premul) -> Premul {
    let k = 1.0 - top[3];
    [top[0] + bottom[0] * k, top[1] + bottom[1] * k, top[2] + bottom[2] * k, top[3] + bottom[3] * k]
}

/// Convert an accumulated premultiplied pixel to straight RGBA8.
#[inline]
pub fn unpremultiply_quantize(px: Premul) -> [u8; 4] {
    let a = quantize(px[3]);
    if a == 0 {
        return [0, 0, 0, 0];
    }
    let inv = 1.0 / px[3];
    [quantize((px[0] * inv).min(1.0)), quantize((px[1] * inv).min(1.0)), quantize((px[2] * inv).min(1.0)), a]
}

/// Premultiplied float raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PremulRaster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<Premul>,
}

impl PremulRaster {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![TRANSPARENT; width as usize * height as usize] }
    }

    pub fn from_straight(img: &RgbaImage) -> Self {
        Self { width: img.width(), height: img.height(), data: img.pixels().map(|p| premultiply(p.0)).collect() }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Premul {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn to_straight(&self) -> RgbaImage {
        let mut out = RgbaImage::new(self.width, self.height);
        for (dst, src) in out.pixels_mut().zip(&self.data) {
            dst.0 = unpremultiply_quantize(*src);
        }
        out
    }
}

/// Fraction of pixels whose every channel differs by at most `tol` (on the 255 scale).
pub fn fraction_within(a: &RgbaImage, b: &RgbaImage, tol: u8) -> f64 {
    assert_eq!(a.dimensions(), b.dimensions(), "compared images differ in size");
    let total = a.width() as usize * a.height() as usize;
    if total == 0 {
        return 1.0;
    }
    let ok = a.pixels().zip(b.pixels()).filter(|(p, q)| p.0.iter().zip(q.0.iter()).all(|(x, y)| x.abs_diff(*y) <= tol)).count();
    ok as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(1.5), 255);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(127.4 / 255.0), 127);
    }

    #[test]
    fn rect_geometry() {
        let a = Rect::new(0, 0, 10, 10);
        let b = Rect::new(5, 5, 10, 10);
        assert_eq!(a.intersect(&b), Some(Rect::new(5, 5, 5, 5)));
        assert_eq!(a.union(&b), Rect::new(0, 0, 15, 15));
        assert!((a.iou(&b) - 25.0 / 175.0).abs() < 1e-12);
        assert!(!Rect::new(-5, 0, 10, 10).within(100, 100));
        assert!(Rect::new(90, 90, 10, 10).within(100, 100));
        assert!(!Rect::new(91, 90, 10, 10).within(100, 100));
        assert_eq!(Rect::new(0, 0, 4, 4).padded_within(1, 100, 100), Some(Rect::new(0, 0, 5, 5)));
    }

    #[test]
    fn dilation_is_square() {
        let mut m = BinaryMask::new(7, 7);
        m.set(3, 3, true);
        let d = m.dilate(2);
        assert_eq!(d.count(), 25);
        assert!(d.get(1, 1) && d.get(5, 5) && !d.get(0, 3));
    }

    #[test]
    fn bbox_serializes_as_array() {
        let r = Rect::new(1, 2, 3, 4);
        assert_eq!(serde_json::to_string(&r).unwrap(), "[1,2,3,4]");
        let back: Rect = serde_json::from_str("[1,2,3,4]").unwrap();
        assert_eq!(back, r);
        assert!(serde_json::from_str::<Rect>("[1,2,-3,4]").is_err());
    }
}
