use image::RgbaImage;

use super::{ClientResult, StrokeSegmenter};
use crate::raster::BinaryMask;

/// Marks pixels whose luminance stands out from the local background.
///
/// The background estimate is the median luminance in a square window of
/// `window_radius`; the cut between stroke and background distances is the
/// Otsu threshold, floored at `min_contrast`.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdStrokeSegmenter {
    pub window_radius: u32,
    pub min_contrast: u8,
}

impl Default for ThresholdStrokeSegmenter {
    fn default() -> Self {
        Self { window_radius: 8, min_contrast: 24 }
    }
}

pub(crate) fn luminance(px: [u8; 4]) -> u8 {
    let l = 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32;
    (l + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Median over a clamped square window, via a sliding 256-bin histogram per row.
fn local_median(lum: &[u8], w: usize, h: usize, r: usize) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(h - 1);
        let mut hist = [0u32; 256];
        let mut count = 0u32;
        let add_col = |hist: &mut [u32; 256], count: &mut u32, x: usize, sign: i32| {
            for yy in y0..=y1 {
                let v = lum[yy * w + x] as usize;
                if sign > 0 {
                    hist[v] += 1;
                    *count += 1;
                } else {
                    hist[v] -= 1;
                    *count -= 1;
                }
            }
        };
        for x in 0..=r.min(w - 1) {
            add_col(&mut hist, &mut count, x, 1);
        }
        for x in 0..w {
            if x > 0 {
                if x + r < w {
                    add_col(&mut hist, &mut count, x + r, 1);
                }
                if x > r {
                    add_col(&mut hist, &mut count, x - r - 1, -1);
                }
            }
            let half = count.div_ceil(2);
            let mut acc = 0;
            for (v, n) in hist.iter().enumerate() {
                acc += n;
                if acc >= half {
                    out[y * w + x] = v as u8;
                    break;
                }
            }
        }
    }
    out
}

/// Otsu's threshold over a 256-bin histogram; classes are `<= t` and `> t`.
pub(crate) fn otsu(hist: &[u64; 256]) -> u8 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, n)| i as f64 * *n as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best, mut best_t) = (-1.0f64, 0u8);
    for (t, &n) in hist.iter().enumerate() {
        w0 += n as f64;
        sum0 += t as f64 * n as f64;
        let w1 = total as f64 - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_t = t as u8;
        }
    }
    best_t
}

impl StrokeSegmenter for ThresholdStrokeSegmenter {
    fn segment(&self, image: &RgbaImage) -> ClientResult<BinaryMask> {
        let (w, h) = (image.width() as usize, image.height() as usize);
        if w == 0 || h == 0 {
            return Ok(BinaryMask::new(image.width(), image.height()));
        }
        let lum: Vec<u8> = image.pixels().map(|p| luminance(p.0)).collect();
        let med = local_median(&lum, w, h, self.window_radius as usize);
        let dist: Vec<u8> = lum.iter().zip(&med).map(|(l, m)| l.abs_diff(*m)).collect();
        let mut hist = [0u64; 256];
        for d in &dist {
            hist[*d as usize] += 1;
        }
        let cut = otsu(&hist).max(self.min_contrast);
        Ok(BinaryMask::from_fn(image.width(), image.height(), |x, y| dist[y as usize * w + x as usize] > cut))
    }
}
