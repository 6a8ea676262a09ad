//! Layered document model.
//!
//! A [`LayeredDocument`] is a fixed-size canvas plus an ordered stack of raster
//! layers. List order is z-order: index 0 is the background, and every text
//! layer sits above every non-text layer. Pixels are stored with straight alpha.
//!
//! Persistence goes through the manifest JSON ([`LayeredDocument::export_manifest`])
//! plus one PNG per layer. The HTML export is presentation-only and cannot be
//! read back.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Cursor;

use image::{ImageFormat, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{over_pixel, premultiply, unpremultiply_quantize, Rect, TRANSPARENT};

/// Longest caption kept, in bytes, including the truncation marker.
pub const MAX_CAPTION_BYTES: usize = 1024;
const TRUNCATION_MARKER: &str = "…";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DocumentError {
    #[error("invalid canvas size {width}x{height}")]
    InvalidCanvas { width: i64, height: i64 },
    #[error("background layer has a pixel with alpha < 255")]
    NonOpaqueBackground,
    #[error("background bbox {bbox:?} does not cover the {width}x{height} canvas")]
    BackgroundNotCanvas { bbox: Rect, width: u32, height: u32 },
    #[error("a document has exactly one background layer, at index 0")]
    MisplacedBackground,
    #[error("duplicate layer id `{0}`")]
    DuplicateId(String),
    #[error("layer id `{0}` does not match `layer_<n>`")]
    BadId(String),
    #[error("layer `{id}` bbox {bbox:?} is outside the canvas")]
    OutOfBounds { id: String, bbox: Rect },
    #[error("layer `{id}` pixels are {actual:?}, bbox needs {expected:?}")]
    PixelSizeMismatch { id: String, expected: (u32, u32), actual: (u32, u32) },
    #[error("text layer `{0}` is below a non-text layer")]
    TextBelowNonText(String),
    #[error("document has no layers")]
    Empty,
    #[error("manifest schema: {0}")]
    Schema(String),
    #[error("missing asset `{0}`")]
    MissingAsset(String),
    #[error("asset `{name}`: {detail}")]
    BadAsset { name: String, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Text,
    Rectangular,
    #[serde(rename = "nonrectangular")]
    NonRectangular,
    Background,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Text => "text",
            LayerKind::Rectangular => "rectangular",
            LayerKind::NonRectangular => "nonrectangular",
            LayerKind::Background => "background",
        }
    }

    pub fn is_text(self) -> bool {
        self == LayerKind::Text
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One raster layer. `pixels` is exactly `bbox.w × bbox.h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerImage {
    pub id: String,
    pub kind: LayerKind,
    pub bbox: Rect,
    pub pixels: RgbaImage,
    caption: String,
}

impl LayerImage {
    /// Builds a layer. An empty `id` asks the document to assign the next free one.
    pub fn new(id: impl Into<String>, kind: LayerKind, bbox: Rect, pixels: RgbaImage, caption: &str) -> Self {
        Self { id: id.into(), kind, bbox, pixels, caption: truncate_caption(caption) }
    }

    /// Background layer covering a canvas of the image's size.
    pub fn background(pixels: RgbaImage) -> Self {
        let bbox = Rect::new(0, 0, pixels.width(), pixels.height());
        Self::new("layer_0", LayerKind::Background, bbox, pixels, "")
    }

    pub fn caption(&self) -> &str {
        &self.caption
    }

    pub fn set_caption(&mut self, caption: &str) {
        self.caption = truncate_caption(caption);
    }

    fn check_shape(&self) -> Result<(), DocumentError> {
        if self.pixels.dimensions() != (self.bbox.w, self.bbox.h) {
            return Err(DocumentError::PixelSizeMismatch {
                id: self.id.clone(),
                expected: (self.bbox.w, self.bbox.h),
                actual: self.pixels.dimensions(),
            });
        }
        Ok(())
    }
}

fn truncate_caption(caption: &str) -> String {
    if caption.len() <= MAX_CAPTION_BYTES {
        return caption.to_owned();
    }
    let mut end = MAX_CAPTION_BYTES - TRUNCATION_MARKER.len();
    while !caption.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}{}", &caption[..end], TRUNCATION_MARKER)
}

fn id_number(id: &str) -> Option<u64> {
    let digits = id.strip_prefix("layer_")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) {
        return None;
    }
    digits.parse().ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredDocument {
    canvas: Canvas,
    layers: Vec<LayerImage>,
}

impl LayeredDocument {
    /// Creates a single-layer document. The background is renamed `layer_0`.
    pub fn new(width: i64, height: i64, mut background: LayerImage) -> Result<Self, DocumentError> {
        if width <= 0 || height <= 0 || width > u32::MAX as i64 || height > u32::MAX as i64 {
            return Err(DocumentError::InvalidCanvas { width, height });
        }
        let (width, height) = (width as u32, height as u32);
        background.id = "layer_0".into();
        background.kind = LayerKind::Background;
        if background.bbox != Rect::new(0, 0, width, height) {
            return Err(DocumentError::BackgroundNotCanvas { bbox: background.bbox, width, height });
        }
        background.check_shape()?;
        if background.pixels.pixels().any(|p| p.0[3] != 255) {
            return Err(DocumentError::NonOpaqueBackground);
        }
        Ok(Self { canvas: Canvas { width, height }, layers: vec![background] })
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas
    }

    pub fn layers(&self) -> &[LayerImage] {
        &self.layers
    }

    pub fn layer(&self, id: &str) -> Option<&LayerImage> {
        self.layers.iter().find(|l| l.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.id == id)
    }

    pub fn background(&self) -> &LayerImage {
        &self.layers[0]
    }

    /// Next unused `layer_<n>` id.
    pub fn next_id(&self) -> String {
        let n = self.layers.iter().filter_map(|l| id_number(&l.id)).max().map_or(0, |m| m + 1);
        format!("layer_{n}")
    }

    /// Inserts a layer and returns its id. Text layers go on top; non-text
    /// layers go directly below the lowest text layer.
    pub fn add_layer(&mut self, mut layer: LayerImage) -> Result<String, DocumentError> {
        if layer.id.is_empty() {
            layer.id = self.next_id();
        }
        if id_number(&layer.id).is_none() {
            return Err(DocumentError::BadId(layer.id));
        }
        if self.layers.iter().any(|l| l.id == layer.id) {
            return Err(DocumentError::DuplicateId(layer.id));
        }
        if layer.kind == LayerKind::Background {
            return Err(DocumentError::MisplacedBackground);
        }
        if !layer.bbox.within(self.canvas.width, self.canvas.height) {
            return Err(DocumentError::OutOfBounds { id: layer.id, bbox: layer.bbox });
        }
        layer.check_shape()?;
        let id = layer.id.clone();
        if layer.kind.is_text() {
            self.layers.push(layer);
        } else {
            let at = self.layers.iter().position(|l| l.kind.is_text()).unwrap_or(self.layers.len());
            self.layers.insert(at, layer);
        }
        Ok(id)
    }

    /// Re-checks every structural invariant.
    pub fn check(&self) -> Result<(), DocumentError> {
        let Some(bg) = self.layers.first() else {
            return Err(DocumentError::Empty);
        };
        if bg.kind != LayerKind::Background || self.layers[1..].iter().any(|l| l.kind == LayerKind::Background) {
            return Err(DocumentError::MisplacedBackground);
        }
        let Canvas { width, height } = self.canvas;
        if bg.bbox != Rect::new(0, 0, width, height) {
            return Err(DocumentError::BackgroundNotCanvas { bbox: bg.bbox, width, height });
        }
        if bg.pixels.pixels().any(|p| p.0[3] != 255) {
            return Err(DocumentError::NonOpaqueBackground);
        }
        let mut seen = HashSet::new();
        let mut text_seen = false;
        for layer in &self.layers {
            if id_number(&layer.id).is_none() {
                return Err(DocumentError::BadId(layer.id.clone()));
            }
            if !seen.insert(layer.id.as_str()) {
                return Err(DocumentError::DuplicateId(layer.id.clone()));
            }
            if !layer.bbox.within(width, height) {
                return Err(DocumentError::OutOfBounds { id: layer.id.clone(), bbox: layer.bbox });
            }
            layer.check_shape()?;
            if layer.kind.is_text() {
                text_seen = true;
            } else if text_seen {
                return Err(DocumentError::TextBelowNonText(layer.id.clone()));
            }
        }
        Ok(())
    }

    /// Back-to-front source-over of every layer at its bbox, no transforms.
    pub fn flatten(&self) -> RgbaImage {
        let Canvas { width, height } = self.canvas;
        let mut acc = vec![TRANSPARENT; width as usize * height as usize];
        for layer in &self.layers {
            let (ox, oy) = (layer.bbox.x as usize, layer.bbox.y as usize);
            for (lx, ly, px) in layer.pixels.enumerate_pixels() {
                let idx = (oy + ly as usize) * width as usize + ox + lx as usize;
                acc[idx] = over_pixel(premultiply(px.0), acc[idx]);
            }
        }
        let mut out = RgbaImage::new(width, height);
        for (dst, src) in out.pixels_mut().zip(acc) {
            dst.0 = unpremultiply_quantize(src);
        }
        out
    }

    /// `layer_<n>.png` asset name for a layer id.
    pub fn asset_name(id: &str) -> String {
        format!("{id}.png")
    }

    pub fn export_manifest(&self) -> String {
        let manifest = Manifest {
            canvas: self.canvas,
            layers: self
                .layers
                .iter()
                .map(|l| ManifestLayer {
                    id: l.id.clone(),
                    kind: l.kind,
                    bbox: l.bbox,
                    caption: l.caption.clone(),
                    asset: Self::asset_name(&l.id),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        text
    }

    /// PNG bytes for every layer, keyed by asset file name.
    pub fn export_assets(&self) -> BTreeMap<String, Vec<u8>> {
        self.layers.iter().map(|l| (Self::asset_name(&l.id), encode_png(&l.pixels))).collect()
    }

    pub fn import_manifest(json: &str, assets: &HashMap<String, Vec<u8>>) -> Result<Self, DocumentError> {
        let manifest: Manifest = serde_json::from_str(json).map_err(|e| DocumentError::Schema(e.to_string()))?;
        let mut seen = HashSet::new();
        let mut layers = Vec::with_capacity(manifest.layers.len());
        for entry in manifest.layers {
            if !seen.insert(entry.id.clone()) {
                return Err(DocumentError::DuplicateId(entry.id));
            }
            let bytes = assets.get(&entry.asset).ok_or_else(|| DocumentError::MissingAsset(entry.asset.clone()))?;
            let pixels = decode_png(bytes).map_err(|detail| DocumentError::BadAsset { name: entry.asset.clone(), detail })?;
            layers.push(LayerImage::new(entry.id, entry.kind, entry.bbox, pixels, &entry.caption));
        }
        let Canvas { width, height } = manifest.canvas;
        if width == 0 || height == 0 {
            return Err(DocumentError::InvalidCanvas { width: width as i64, height: height as i64 });
        }
        let doc = Self { canvas: manifest.canvas, layers };
        doc.check()?;
        Ok(doc)
    }

    /// Presentation HTML: one absolutely positioned `<img>` per layer in z-order.
    pub fn export_html(&self, asset_dir_name: &str) -> (String, BTreeMap<String, Vec<u8>>) {
        let Canvas { width, height } = self.canvas;
        let mut html = String::new();
        html.push_str("<!DOCTYPE html>\n");
        html.push_str("<html><head><meta charset=\"utf-8\"></head><body>\n");
        let _ = writeln!(html, "  <div id=\"canvas\" style=\"position:relative;width:{width}px;height:{height}px;overflow:hidden;\">");
        for layer in &self.layers {
            let Rect { x, y, w, h } = layer.bbox;
            let _ = writeln!(
                html,
                "    <img id=\"{}\" data-layer-type=\"{}\" data-caption=\"{}\" src=\"{}/{}\" style=\"position:absolute;left:{x}px;top:{y}px;width:{w}px;height:{h}px;\">",
                escape_attr(&layer.id),
                layer.kind,
                escape_attr(&layer.caption),
                escape_attr(asset_dir_name),
                Self::asset_name(&layer.id),
            );
        }
        html.push_str("  </div>\n");
        html.push_str("</body></html>\n");
        (html, self.export_assets())
    }
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '"' => out.push_str("&quot;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\n' => out.push_str("&#10;"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    canvas: Canvas,
    layers: Vec<ManifestLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLayer {
    id: String,
    kind: LayerKind,
    bbox: Rect,
    caption: String,
    asset: String,
}

pub fn encode_png(img: &RgbaImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).expect("in-memory PNG encode");
    buf.into_inner()
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbaImage, String> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png).map(|img| img.to_rgba8()).map_err(|e| e.to_string())
}
