use std::collections::VecDeque;

use image::RgbaImage;

use super::{ClientResult, LayerDetector, MaskSegmenter, OcrClient};
use crate::decompose::{Detection, DetectionKind, TextBox};
use crate::raster::{BinaryMask, Rect};

/// Recognizes nothing. Stand-in when no OCR backend is configured.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullOcr;

impl OcrClient for NullOcr {
    fn recognize(&self, _image: &RgbaImage) -> ClientResult<Vec<TextBox>> {
        Ok(Vec::new())
    }
}

fn median(mut v: Vec<u8>) -> u8 {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

/// Per-channel median of the given pixels.
fn median_color(pixels: impl Iterator<Item = [u8; 4]>) -> Option<[u8; 3]> {
    let px: Vec<[u8; 4]> = pixels.collect();
    if px.is_empty() {
        return None;
    }
    Some([0, 1, 2].map(|c| median(px.iter().map(|p| p[c]).collect())))
}

fn border_color(image: &RgbaImage) -> [u8; 3] {
    let (w, h) = image.dimensions();
    let border = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| x == 0 || y == 0 || x + 1 == w || y + 1 == h)
        .map(|(x, y)| image.get_pixel(x, y).0);
    median_color(border).unwrap_or([0, 0, 0])
}

fn differs(px: [u8; 4], key: [u8; 3], tolerance: u8) -> bool {
    (0..3).any(|c| px[c].abs_diff(key[c]) > tolerance)
}

/// Connected components of pixels that differ from the border color.
///
/// Components whose pixel count fills at least `rect_fill` of their bbox are
/// reported as rectangular. Output is sorted by bbox top, then left.
#[derive(Debug, Clone, Copy)]
pub struct ComponentDetector {
    pub tolerance: u8,
    pub min_area: usize,
    pub rect_fill: f64,
}

impl Default for ComponentDetector {
    fn default() -> Self {
        Self { tolerance: 24, min_area: 16, rect_fill: 0.98 }
    }
}

impl LayerDetector for ComponentDetector {
    fn detect(&self, image: &RgbaImage) -> ClientResult<Vec<Detection>> {
        let (w, h) = image.dimensions();
        if w == 0 || h == 0 {
            return Ok(Vec::new());
        }
        let key = border_color(image);
        let fg = BinaryMask::from_fn(w, h, |x, y| differs(image.get_pixel(x, y).0, key, self.tolerance));
        let mut seen = BinaryMask::new(w, h);
        let mut found = Vec::new();
        for sy in 0..h {
            for sx in 0..w {
                if !fg.get(sx, sy) || seen.get(sx, sy) {
                    continue;
                }
                seen.set(sx, sy, true);
                let mut queue = VecDeque::from([(sx, sy)]);
                let (mut x0, mut y0, mut x1, mut y1, mut area) = (sx, sy, sx, sy, 0usize);
                while let Some((x, y)) = queue.pop_front() {
                    area += 1;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let (nx, ny) = (nx as u32, ny as u32);
                            if fg.get(nx, ny) && !seen.get(nx, ny) {
                                seen.set(nx, ny, true);
                                queue.push_back((nx, ny));
                            }
                        }
                    }
                }
                if area < self.min_area {
                    continue;
                }
                let bbox = Rect::new(x0 as i32, y0 as i32, x1 - x0 + 1, y1 - y0 + 1);
                let kind = if area as f64 >= self.rect_fill * bbox.area() as f64 {
                    DetectionKind::Rectangular
                } else {
                    DetectionKind::NonRectangular
                };
                found.push(Detection { bbox, kind });
            }
        }
        found.sort_by_key(|d| (d.bbox.y, d.bbox.x));
        Ok(found)
    }
}

/// Selects bbox pixels that differ from the color just outside the bbox
/// (falling back to the image border color when the bbox touches every edge).
#[derive(Debug, Clone, Copy)]
pub struct ColorKeySegmenter {
    pub tolerance: u8,
}

impl Default for ColorKeySegmenter {
    fn default() -> Self {
        Self { tolerance: 24 }
    }
}

impl MaskSegmenter for ColorKeySegmenter {
    fn segment(&self, image: &RgbaImage, bbox: Rect) -> ClientResult<BinaryMask> {
        let (w, h) = image.dimensions();
        let ring = Rect::new(bbox.x - 1, bbox.y - 1, bbox.w + 2, bbox.h + 2);
        let ring_px = (ring.y as i64..ring.bottom())
            .flat_map(|y| (ring.x as i64..ring.right()).map(move |x| (x, y)))
            .filter(|&(x, y)| !bbox.contains(x, y) && x >= 0 && y >= 0 && x < w as i64 && y < h as i64)
            .map(|(x, y)| image.get_pixel(x as u32, y as u32).0);
        let key = median_color(ring_px).unwrap_or_else(|| border_color(image));
        Ok(BinaryMask::from_fn(bbox.w, bbox.h, |x, y| {
            differs(image.get_pixel(bbox.x as u32 + x, bbox.y as u32 + y).0, key, self.tolerance)
        }))
    }
}
