//! Raster-to-layers decomposition.
//!
//! Text goes first: OCR boxes partition the stroke mask into one alpha mask
//! per word, and the strokes are inpainted away. Non-text layers are then
//! detected on the text-free image, cut out with a bbox mask (rectangular)
//! or a segmenter mask (non-rectangular), and the background is what the
//! inpainter produces once every non-text region is removed.

use image::RgbaImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::{ClientError, ClientSet};
use crate::document::{DocumentError, LayerImage, LayerKind, LayeredDocument};
use crate::raster::{BinaryMask, Rect};

pub type StrokeMask = BinaryMask;

pub const MIN_IMAGE_SIDE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBox {
    pub text: String,
    pub bbox: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionKind {
    Rectangular,
    #[serde(rename = "nonrectangular")]
    NonRectangular,
}

impl From<DetectionKind> for LayerKind {
    fn from(k: DetectionKind) -> Self {
        match k {
            DetectionKind::Rectangular => LayerKind::Rectangular,
            DetectionKind::NonRectangular => LayerKind::NonRectangular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: Rect,
    pub kind: DetectionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecomposeConfig {
    /// Padding added around OCR boxes before strokes are grouped.
    pub text_box_pad: u32,
    /// Dilation applied to removal masks before inpainting.
    pub dilation_radius: u32,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self { text_box_pad: 1, dilation_radius: 2 }
    }
}

#[derive(Debug, Error)]
pub enum DecomposeError {
    #[error("image is {width}x{height}; both sides must be at least {MIN_IMAGE_SIDE}")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("mask is {actual:?}, expected {expected:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Document(#[from] DocumentError),
}

impl DecomposeError {
    /// Pipeline stage tag for reporting.
    pub fn stage(&self) -> &'static str {
        match self {
            DecomposeError::Client(e) => e.stage.as_str(),
            DecomposeError::ImageTooSmall { .. } => "input",
            DecomposeError::DimensionMismatch { .. } => "segment",
            DecomposeError::Document(_) => "document",
        }
    }
}

/// Splits a stroke mask into one cropped mask per box.
///
/// A stroke pixel belongs to the smallest-area box containing it; equal
/// areas go to the lower index. Pixels outside every box are dropped.
pub fn group_stroke_mask(mask: &StrokeMask, boxes: &[Rect]) -> Vec<BinaryMask> {
    let (w, h) = mask.dimensions();
    let mut owner: Vec<Option<usize>> = vec![None; w as usize * h as usize];
    for (i, b) in boxes.iter().enumerate() {
        let Some(clip) = b.intersect(&Rect::new(0, 0, w, h)) else { continue };
        for y in clip.y as u32..clip.bottom() as u32 {
            for x in clip.x as u32..clip.right() as u32 {
                let slot = &mut owner[y as usize * w as usize + x as usize];
                let better = match *slot {
                    None => true,
                    Some(j) => (b.area(), i) < (boxes[j].area(), j),
                };
                if better {
                    *slot = Some(i);
                }
            }
        }
    }
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            BinaryMask::from_fn(b.w, b.h, |x, y| {
                let (cx, cy) = (b.x as i64 + x as i64, b.y as i64 + y as i64);
                if cx < 0 || cy < 0 || cx >= w as i64 || cy >= h as i64 {
                    return false;
                }
                let idx = cy as usize * w as usize + cx as usize;
                mask.get(cx as u32, cy as u32) && owner[idx] == Some(i)
            })
        })
        .collect()
}

/// RGB from the image crop, alpha 255 where the mask is set and 0 elsewhere.
pub fn cut_layer(image: &RgbaImage, bbox: Rect, mask: &BinaryMask) -> Result<RgbaImage, DecomposeError> {
    if mask.dimensions() != (bbox.w, bbox.h) {
        return Err(DecomposeError::DimensionMismatch { expected: (bbox.w, bbox.h), actual: mask.dimensions() });
    }
    Ok(RgbaImage::from_fn(bbox.w, bbox.h, |x, y| {
        let mut px = *image.get_pixel(bbox.x as u32 + x, bbox.y as u32 + y);
        px.0[3] = if mask.get(x, y) { 255 } else { 0 };
        px
    }))
}

fn union_mask(width: u32, height: u32, masks: &[(Rect, BinaryMask)]) -> BinaryMask {
    let mut union = BinaryMask::new(width, height);
    for (bbox, m) in masks {
        union.paint(*bbox, m);
    }
    union
}

/// Clip a client-reported box to the image; `None` when nothing is left.
fn clip_to(bbox: Rect, width: u32, height: u32) -> Option<Rect> {
    bbox.intersect(&Rect::new(0, 0, width, height))
}

#[derive(Debug, Clone)]
pub struct TextExtraction {
    /// Text layers in OCR order, ids unassigned.
    pub layers: Vec<LayerImage>,
    pub text_removed: RgbaImage,
    pub warnings: Vec<String>,
}

pub fn extract_text_layers(image: &RgbaImage, clients: &ClientSet, config: &DecomposeConfig) -> Result<TextExtraction, DecomposeError> {
    let (w, h) = image.dimensions();
    let mut warnings = Vec::new();
    let ocr = clients.recognize(image)?;
    if ocr.is_empty() {
        return Ok(TextExtraction { layers: Vec::new(), text_removed: image.clone(), warnings });
    }
    let strokes = clients.segment_strokes(image)?;

    let mut kept: Vec<(String, Rect)> = Vec::new();
    for (i, tb) in ocr.iter().enumerate() {
        if tb.text.trim().is_empty() {
            warnings.push(format!("ocr box {i}: empty text, skipped"));
            continue;
        }
        match tb.bbox.padded_within(config.text_box_pad, w, h).filter(|_| clip_to(tb.bbox, w, h).is_some()) {
            Some(b) => kept.push((tb.text.clone(), b)),
            None => warnings.push(format!("ocr box {i} ({:?}) lies outside the image, skipped", tb.text)),
        }
    }
    let boxes: Vec<Rect> = kept.iter().map(|(_, b)| *b).collect();
    let grouped = group_stroke_mask(&strokes, &boxes);

    let mut layers = Vec::new();
    let mut removal = Vec::new();
    for ((text, bbox), mask) in kept.into_iter().zip(grouped) {
        if mask.is_empty() {
            warnings.push(format!("ocr box {text:?} has no stroke pixels, skipped"));
            continue;
        }
        let pixels = cut_layer(image, bbox, &mask)?;
        layers.push(LayerImage::new("", LayerKind::Text, bbox, pixels, &text));
        removal.push((bbox, mask));
    }
    if removal.is_empty() {
        return Ok(TextExtraction { layers, text_removed: image.clone(), warnings });
    }
    let hole = union_mask(w, h, &removal).dilate(config.dilation_radius);
    let text_removed = clients.inpaint(image, &hole)?;
    Ok(TextExtraction { layers, text_removed, warnings })
}

#[derive(Debug, Clone)]
pub struct NonTextLayer {
    pub layer: LayerImage,
    pub mask: BinaryMask,
}

/// Non-text layers in detection order, ids unassigned. Segmentation of
/// non-rectangular detections may run in parallel; output order is fixed.
pub fn extract_nontext_layers(
    text_removed: &RgbaImage,
    clients: &ClientSet,
    warnings: &mut Vec<String>,
) -> Result<Vec<NonTextLayer>, DecomposeError> {
    let (w, h) = text_removed.dimensions();
    let detections = clients.detect(text_removed)?;
    let mut valid = Vec::new();
    for (i, d) in detections.into_iter().enumerate() {
        match clip_to(d.bbox, w, h) {
            Some(bbox) => valid.push(Detection { bbox, ..d }),
            None => warnings.push(format!("detection {i} ({:?}) lies outside the image, skipped", d.bbox)),
        }
    }
    valid
        .par_iter()
        .map(|d| {
            let mask = match d.kind {
                DetectionKind::Rectangular => BinaryMask::filled(d.bbox.w, d.bbox.h),
                DetectionKind::NonRectangular => clients.segment_mask(text_removed, d.bbox)?,
            };
            let pixels = cut_layer(text_removed, d.bbox, &mask)?;
            let caption = clients.caption(&pixels)?.unwrap_or_default();
            Ok(NonTextLayer { layer: LayerImage::new("", d.kind.into(), d.bbox, pixels, &caption), mask })
        })
        .collect()
}

/// Inpaints every non-background region out of the text-free image.
pub fn extract_background(
    text_removed: &RgbaImage,
    layer_masks: &[(Rect, BinaryMask)],
    clients: &ClientSet,
    config: &DecomposeConfig,
) -> Result<LayerImage, DecomposeError> {
    let (w, h) = text_removed.dimensions();
    let hole = union_mask(w, h, layer_masks).dilate(config.dilation_radius);
    let mut pixels = if hole.is_empty() { text_removed.clone() } else { clients.inpaint(text_removed, &hole)? };
    for px in pixels.pixels_mut() {
        px.0[3] = 255;
    }
    Ok(LayerImage::background(pixels))
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub document: LayeredDocument,
    pub warnings: Vec<String>,
}

/// Full decomposition: `[background, non-text (detection order), text (OCR order)]`.
///
/// The input's alpha channel is ignored; the image is treated as opaque.
pub fn decompose(image: &RgbaImage, clients: &ClientSet, config: &DecomposeConfig) -> Result<Decomposition, DecomposeError> {
    let (w, h) = image.dimensions();
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(DecomposeError::ImageTooSmall { width: w, height: h });
    }
    let mut opaque = image.clone();
    for px in opaque.pixels_mut() {
        px.0[3] = 255;
    }

    let text = extract_text_layers(&opaque, clients, config)?;
    let mut warnings = text.warnings;
    let nontext = extract_nontext_layers(&text.text_removed, clients, &mut warnings)?;
    let masks: Vec<(Rect, BinaryMask)> = nontext.iter().map(|n| (n.layer.bbox, n.mask.clone())).collect();
    let background = extract_background(&text.text_removed, &masks, clients, config)?;

    let mut document = LayeredDocument::new(w as i64, h as i64, background)?;
    for n in nontext {
        document.add_layer(n.layer)?;
    }
    for t in text.layers {
        document.add_layer(t)?;
    }
    Ok(Decomposition { document, warnings })
}
