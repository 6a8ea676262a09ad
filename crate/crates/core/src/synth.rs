//! Seeded synthetic designs with exact ground truth.
//!
//! Each design is an opaque solid or gradient background with one to six
//! hard-edged elements stamped on it: block-letter words, rectangles and
//! ellipses, kept a few pixels apart. [`SynthDesign::clients`] returns stub
//! clients that report the ground truth, so decomposition can be checked
//! without models.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgba, RgbaImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clients::{ClientSet, DiffusionInpainter, FixtureDetector, FixtureOcr, FixtureSegmenter, FixtureStrokes};
use crate::decompose::{Detection, DetectionKind, TextBox};
use crate::raster::{BinaryMask, Rect};

const GLYPH_W: u32 = 5;
const GLYPH_H: u32 = 7;

#[rustfmt::skip]
const FONT: [[u8; 7]; 26] = [
    [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
    [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E], [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F], [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
    [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F], [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
    [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E], [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
    [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11], [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
    [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11], [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
    [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
    [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D], [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
    [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E], [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
    [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A], [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
    [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04], [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
];

const WORDS: &[&str] =
    &["SALE", "NEW", "BIG", "OPEN", "MENU", "SUMMER", "COFFEE", "TODAY", "FRESH", "LIVE", "JAZZ", "BOOK", "FREE", "HELLO", "SHOP"];

/// Glyph mask for an uppercase word at an integer pixel scale, one blank
/// column between letters. Other characters render blank.
pub fn word_mask(word: &str, scale: u32) -> BinaryMask {
    let n = word.chars().count() as u32;
    let w = (n * (GLYPH_W + 1) - 1) * scale;
    BinaryMask::from_fn(w, GLYPH_H * scale, |x, y| {
        let (cell, col) = ((x / scale) / (GLYPH_W + 1), (x / scale) % (GLYPH_W + 1));
        let ch = word.chars().nth(cell as usize).unwrap_or(' ');
        if col >= GLYPH_W || !ch.is_ascii_uppercase() {
            return false;
        }
        FONT[(ch as u8 - b'A') as usize][(y / scale) as usize] & (0x10 >> col) != 0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Text,
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone)]
pub struct SynthDesign {
    pub seed: u64,
    pub image: RgbaImage,
    pub text_boxes: Vec<TextBox>,
    /// Image-sized union of all glyph pixels.
    pub strokes: BinaryMask,
    pub detections: Vec<Detection>,
    /// Bbox-sized masks of the non-rectangular detections.
    pub masks: HashMap<Rect, BinaryMask>,
}

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub width: (u32, u32),
    pub height: (u32, u32),
    pub elements: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { width: (160, 320), height: (120, 240), elements: (1, 6) }
    }
}

fn color(rng: &mut ChaCha8Rng) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn far_color(rng: &mut ChaCha8Rng, from: [u8; 3]) -> [u8; 3] {
    loop {
        let c = color(rng);
        let d: i32 = (0..3).map(|i| (c[i] as i32 - from[i] as i32).abs()).sum();
        if d >= 160 {
            return c;
        }
    }
}

fn background(rng: &mut ChaCha8Rng, w: u32, h: u32) -> (RgbaImage, [u8; 3]) {
    let a = color(rng);
    let mode = rng.random_range(0..4u8);
    if mode == 0 {
        return (RgbaImage::from_pixel(w, h, Rgba([a[0], a[1], a[2], 255])), a);
    }
    // Gentle gradients: at most 100 levels per channel across the canvas.
    let b = a.map(|c| (c as i32 + rng.random_range(-100..=100)).clamp(0, 255) as u8);
    let img = RgbaImage::from_fn(w, h, |x, y| {
        let t = match mode {
            1 => x as f64 / (w - 1) as f64,
            2 => y as f64 / (h - 1) as f64,
            _ => (x + y) as f64 / (w + h - 2) as f64,
        };
        let mix = |i: usize| (a[i] as f64 + (b[i] as f64 - a[i] as f64) * t).round() as u8;
        Rgba([mix(0), mix(1), mix(2), 255])
    });
    let mid = img.get_pixel(w / 2, h / 2).0;
    (img, [mid[0], mid[1], mid[2]])
}

/// Clearance between elements, enough for box padding plus mask dilation.
const GAP: i32 = 6;

fn place(rng: &mut ChaCha8Rng, w: u32, h: u32, size: (u32, u32), taken: &[Rect]) -> Option<Rect> {
    if size.0 + 2 * GAP as u32 > w || size.1 + 2 * GAP as u32 > h {
        return None;
    }
    for _ in 0..60 {
        let x = rng.random_range(GAP..=(w - size.0) as i32 - GAP);
        let y = rng.random_range(GAP..=(h - size.1) as i32 - GAP);
        let r = Rect::new(x, y, size.0, size.1);
        let grown = Rect::new(x - GAP, y - GAP, size.0 + 2 * GAP as u32, size.1 + 2 * GAP as u32);
        if taken.iter().all(|t| grown.intersect(t).is_none()) {
            return Some(r);
        }
    }
    None
}

pub fn generate(seed: u64, config: &SynthConfig) -> SynthDesign {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rng.random_range(config.width.0..=config.width.1);
    let h = rng.random_range(config.height.0..=config.height.1);
    let (mut image, bg) = background(&mut rng, w, h);
    let count = rng.random_range(config.elements.0..=config.elements.1);

    let mut taken = Vec::new();
    let mut text_boxes = Vec::new();
    let mut strokes = BinaryMask::new(w, h);
    let mut detections = Vec::new();
    let mut masks = HashMap::new();
    for n in 0..count {
        // Guarantee at least one text element per design.
        let kind = match if n == 0 { 0 } else { rng.random_range(0..3u8) } {
            0 => ElementKind::Text,
            1 => ElementKind::Rectangle,
            _ => ElementKind::Ellipse,
        };
        let fill = far_color(&mut rng, bg);
        let (mask, label) = match kind {
            ElementKind::Text => {
                let word = WORDS[rng.random_range(0..WORDS.len())];
                (word_mask(word, rng.random_range(1..=3)), word.to_owned())
            }
            ElementKind::Rectangle => {
                let (mw, mh) = (rng.random_range(12..=w / 3), rng.random_range(12..=h / 3));
                (BinaryMask::filled(mw, mh), String::new())
            }
            ElementKind::Ellipse => {
                let (mw, mh) = (rng.random_range(12..=w / 3), rng.random_range(12..=h / 3));
                let (rx, ry) = (mw as f64 / 2.0, mh as f64 / 2.0);
                let m = BinaryMask::from_fn(mw, mh, |x, y| {
                    let dx = (x as f64 + 0.5 - rx) / rx;
                    let dy = (y as f64 + 0.5 - ry) / ry;
                    dx * dx + dy * dy <= 1.0
                });
                (m, String::new())
            }
        };
        let Some(r) = place(&mut rng, w, h, mask.dimensions(), &taken) else { continue };
        taken.push(r);
        let stripe = kind == ElementKind::Rectangle && rng.random_bool(0.5);
        let second = far_color(&mut rng, fill);
        for y in 0..r.h {
            for x in 0..r.w {
                if mask.get(x, y) {
                    let c = if stripe && (y / 4) % 2 == 1 { second } else { fill };
                    image.put_pixel(r.x as u32 + x, r.y as u32 + y, Rgba([c[0], c[1], c[2], 255]));
                }
            }
        }
        match kind {
            ElementKind::Text => {
                strokes.paint(r, &mask);
                text_boxes.push(TextBox { text: label, bbox: r });
            }
            ElementKind::Rectangle => detections.push(Detection { bbox: r, kind: DetectionKind::Rectangular }),
            ElementKind::Ellipse => {
                detections.push(Detection { bbox: r, kind: DetectionKind::NonRectangular });
                masks.insert(r, mask);
            }
        }
    }
    SynthDesign { seed, image, text_boxes, strokes, detections, masks }
}

impl SynthDesign {
    /// Stub clients that return this design's ground truth for any image.
    pub fn clients(&self) -> ClientSet {
        ClientSet::new(
            Arc::new(FixtureOcr::any(self.text_boxes.clone())),
            Arc::new(FixtureStrokes::any(self.strokes.clone())),
            Arc::new(FixtureDetector::any(self.detections.clone())),
            Arc::new(FixtureSegmenter::new(self.masks.clone())),
            Arc::new(DiffusionInpainter::default()),
        )
    }

    pub fn element_count(&self) -> usize {
        self.text_boxes.len() + self.detections.len()
    }

    /// Writes `image.png` plus fixture files and a `clients.toml` that
    /// loads them. Returns the paths written.
    pub fn write_fixtures(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        let io = |e: image::ImageError| std::io::Error::other(e.to_string());
        let masks_dir = dir.join("masks");
        std::fs::create_dir_all(&masks_dir)?;
        let mut written = Vec::new();

        let path = dir.join("image.png");
        self.image.save(&path).map_err(io)?;
        written.push(path);
        let path = dir.join("strokes.png");
        self.strokes.to_luma().save(&path).map_err(io)?;
        written.push(path);
        let ocr: BTreeMap<&str, &[TextBox]> = BTreeMap::from([("*", self.text_boxes.as_slice())]);
        let path = dir.join("ocr.json");
        std::fs::write(&path, serde_json::to_string_pretty(&ocr)? + "\n")?;
        written.push(path);
        let det: BTreeMap<&str, &[Detection]> = BTreeMap::from([("*", self.detections.as_slice())]);
        let path = dir.join("detections.json");
        std::fs::write(&path, serde_json::to_string_pretty(&det)? + "\n")?;
        written.push(path);
        let mut rects: Vec<&Rect> = self.masks.keys().collect();
        rects.sort_by_key(|r| (r.y, r.x, r.w, r.h));
        for r in rects {
            let path = masks_dir.join(FixtureSegmenter::file_name(*r));
            self.masks[r].to_luma().save(&path).map_err(io)?;
            written.push(path);
        }
        let path = dir.join("clients.toml");
        std::fs::write(
            &path,
            "[ocr]\nkind = \"fixture\"\npath = \"ocr.json\"\n\n\
             [strokes]\nkind = \"fixture\"\npath = \"strokes.png\"\n\n\
             [detector]\nkind = \"fixture\"\npath = \"detections.json\"\n\n\
             [segmenter]\nkind = \"fixture\"\npath = \"masks\"\n\n\
             [inpainter]\nkind = \"builtin\"\n",
        )?;
        written.push(path);
        Ok(written)
    }
}
