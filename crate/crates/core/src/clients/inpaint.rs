use std::collections::VecDeque;

use image::RgbaImage;

use super::{ClientError, ClientErrorKind, ClientResult, Inpainter, Stage};
use crate::raster::BinaryMask;

/// Harmonic hole filling.
///
/// Masked pixels are seeded from their nearest known pixel (4-connected BFS,
/// fixed neighbor order), then relaxed in raster order by Gauss-Seidel
/// sweeps of 4-neighbor averaging until the largest per-channel change in a
/// sweep drops below `tolerance` (255 scale) or `max_iterations` is hit.
/// Unmasked pixels are copied through untouched.
#[derive(Debug, Clone, Copy)]
pub struct DiffusionInpainter {
    pub max_iterations: usize,
    pub tolerance: f32,
}

impl Default for DiffusionInpainter {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 0.5 }
    }
}

const NEIGHBORS: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

impl Inpainter for DiffusionInpainter {
    fn inpaint(&self, image: &RgbaImage, mask: &BinaryMask) -> ClientResult<RgbaImage> {
        let (w, h) = image.dimensions();
        if mask.dimensions() != (w, h) {
            return Err(ClientError::new(Stage::Inpaint, ClientErrorKind::BadInput("mask is not image-sized".into())));
        }
        if mask.is_empty() {
            return Ok(image.clone());
        }
        if mask.is_full() {
            return Err(ClientError::new(Stage::Inpaint, ClientErrorKind::DegenerateInpaint));
        }
        let (wi, hi) = (w as i64, h as i64);
        let idx = |x: i64, y: i64| (y * wi + x) as usize;

        let mut values: Vec<[f32; 4]> = image.pixels().map(|p| p.0.map(f32::from)).collect();
        let mut known: Vec<bool> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| !mask.get(x, y)).collect();

        // Nearest-known seeding.
        let mut queue: VecDeque<(i64, i64)> =
            (0..hi).flat_map(|y| (0..wi).map(move |x| (x, y))).filter(|&(x, y)| known[idx(x, y)]).collect();
        while let Some((x, y)) = queue.pop_front() {
            let v = values[idx(x, y)];
            for (dx, dy) in NEIGHBORS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= wi || ny >= hi || known[idx(nx, ny)] {
                    continue;
                }
                known[idx(nx, ny)] = true;
                values[idx(nx, ny)] = v;
                queue.push_back((nx, ny));
            }
        }

        let holes: Vec<(i64, i64)> =
            (0..hi).flat_map(|y| (0..wi).map(move |x| (x, y))).filter(|&(x, y)| mask.get(x as u32, y as u32)).collect();
        for _ in 0..self.max_iterations {
            let mut max_delta = 0.0f32;
            for &(x, y) in &holes {
                let mut sum = [0.0f32; 4];
                let mut n = 0.0f32;
                for (dx, dy) in NEIGHBORS {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= wi || ny >= hi {
                        continue;
                    }
                    let v = values[idx(nx, ny)];
                    for c in 0..4 {
                        sum[c] += v[c];
                    }
                    n += 1.0;
                }
                let cell = &mut values[idx(x, y)];
                for c in 0..4 {
                    let next = sum[c] / n;
                    max_delta = max_delta.max((next - cell[c]).abs());
                    cell[c] = next;
                }
            }
            if max_delta < self.tolerance {
                break;
            }
        }

        let mut out = image.clone();
        for &(x, y) in &holes {
            let v = values[idx(x, y)];
            out.get_pixel_mut(x as u32, y as u32).0 = v.map(|c| (c + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
        Ok(out)
    }
}
