//! Interfaces to the external models the pipeline depends on, plus
//! deterministic offline implementations.
//!
//! Every model role (OCR, stroke segmentation, layer detection, mask
//! segmentation, inpainting, captioning, chat LMM) is a trait. [`ClientSet`]
//! bundles one implementation per slot, checks outputs against the input
//! contracts, re-tags errors with the slot's stage, and serializes calls to
//! clients that declare themselves single-flight.

mod builtin;
pub mod config;
mod fixture;
pub mod http;
mod inpaint;
mod threshold;

use std::sync::{Arc, Mutex};

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decompose::{Detection, TextBox};
use crate::raster::{BinaryMask, Rect};

pub use builtin::{ColorKeySegmenter, ComponentDetector, NullOcr};
pub use fixture::{FixtureCaptioner, FixtureDetector, FixtureOcr, FixtureSegmenter, FixtureStrokes, ScriptedLmm, TranscriptEntry};
pub use inpaint::DiffusionInpainter;
pub use threshold::ThresholdStrokeSegmenter;

/// Which pipeline slot an error came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ocr,
    Stroke,
    Detect,
    Segment,
    Inpaint,
    Caption,
    Lmm,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ocr => "ocr",
            Stage::Stroke => "stroke",
            Stage::Detect => "detect",
            Stage::Segment => "segment",
            Stage::Inpaint => "inpaint",
            Stage::Caption => "caption",
            Stage::Lmm => "lmm",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientErrorKind {
    #[error("{0}")]
    Failed(String),
    #[error("timed out after {0} ms")]
    Timeout(u64),
    #[error("inpainting mask covers the whole image; nothing known to fill from")]
    DegenerateInpaint,
    #[error("no scripted response for turn {turn} (template `{template}`)")]
    UnknownTurn { turn: usize, template: String },
    #[error("no fixture registered for {0}")]
    NotFound(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("invalid output: {0}")]
    BadOutput(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage}: {kind}")]
pub struct ClientError {
    pub stage: Stage,
    pub kind: ClientErrorKind,
}

impl ClientError {
    pub fn new(stage: Stage, kind: ClientErrorKind) -> Self {
        Self { stage, kind }
    }

    pub fn failed(stage: Stage, detail: impl Into<String>) -> Self {
        Self::new(stage, ClientErrorKind::Failed(detail.into()))
    }
}

pub type ClientResult<T> = Result<T, ClientError>;

pub trait OcrClient: Send + Sync {
    fn recognize(&self, image: &RgbaImage) -> ClientResult<Vec<TextBox>>;
    fn single_flight(&self) -> bool {
        false
    }
}

pub trait StrokeSegmenter: Send + Sync {
    fn segment(&self, image: &RgbaImage) -> ClientResult<BinaryMask>;
    fn single_flight(&self) -> bool {
        false
    }
}

pub trait LayerDetector: Send + Sync {
    fn detect(&self, image: &RgbaImage) -> ClientResult<Vec<Detection>>;
    fn single_flight(&self) -> bool {
        false
    }
}

/// Returns a `bbox.w × bbox.h` mask for the object inside `bbox`.
pub trait MaskSegmenter: Send + Sync {
    fn segment(&self, image: &RgbaImage, bbox: Rect) -> ClientResult<BinaryMask>;
    fn single_flight(&self) -> bool {
        false
    }
}

/// Fills the pixels selected by an image-sized mask.
pub trait Inpainter: Send + Sync {
    fn inpaint(&self, image: &RgbaImage, mask: &BinaryMask) -> ClientResult<RgbaImage>;
    fn single_flight(&self) -> bool {
        false
    }
}

pub trait Captioner: Send + Sync {
    fn caption(&self, pixels: &RgbaImage) -> ClientResult<String>;
    fn single_flight(&self) -> bool {
        false
    }
}

pub trait LmmClient: Send + Sync {
    fn chat(&self, history: &[ChatMessage]) -> ClientResult<String>;
    fn single_flight(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChatPart {
    Text(String),
    /// PNG bytes plus a display name ("image 1").
    Image {
        name: String,
        png: Arc<Vec<u8>>,
    },
}

/// One chat turn. Constructors guarantee at least one part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: Role,
    parts: Vec<ChatPart>,
    /// Prompt template that produced this message, if any. Scripted clients
    /// key their replies on it; network clients ignore it.
    pub template: Option<String>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self { role, parts: vec![ChatPart::Text(text.into())], template: None }
    }

    pub fn with_template(mut self, template: &str) -> Self {
        self.template = Some(template.to_owned());
        self
    }

    /// Inserts an image ahead of the existing parts.
    pub fn with_image(mut self, name: &str, png: Vec<u8>) -> Self {
        self.parts.insert(0, ChatPart::Image { name: name.to_owned(), png: Arc::new(png) });
        self
    }

    pub fn parts(&self) -> &[ChatPart] {
        &self.parts
    }

    /// Concatenated text parts.
    pub fn text_content(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ChatPart::Text(t) => Some(t.as_str()),
                ChatPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Content key for fixture lookup: SHA-256 over dimensions and raw RGBA bytes.
pub fn image_key(img: &RgbaImage) -> String {
    let mut h = Sha256::new();
    h.update(img.width().to_le_bytes());
    h.update(img.height().to_le_bytes());
    h.update(img.as_raw());
    hex::encode(h.finalize())
}

struct Slot<T: ?Sized> {
    client: Arc<T>,
    gate: Option<Mutex<()>>,
}

impl<T: ?Sized> Slot<T> {
    fn new(client: Arc<T>, single_flight: bool) -> Self {
        Self { client, gate: single_flight.then(|| Mutex::new(())) }
    }

    fn call<R>(&self, stage: Stage, f: impl FnOnce(&T) -> ClientResult<R>) -> ClientResult<R> {
        let _guard = self.gate.as_ref().map(|g| g.lock().unwrap_or_else(|e| e.into_inner()));
        f(&self.client).map_err(|e| ClientError { stage, kind: e.kind })
    }
}

/// One client per model slot. Captioner and LMM are optional.
pub struct ClientSet {
    ocr: Slot<dyn OcrClient>,
    strokes: Slot<dyn StrokeSegmenter>,
    detector: Slot<dyn LayerDetector>,
    segmenter: Slot<dyn MaskSegmenter>,
    inpainter: Slot<dyn Inpainter>,
    captioner: Option<Slot<dyn Captioner>>,
    lmm: Option<Slot<dyn LmmClient>>,
}

impl ClientSet {
    pub fn new(
        ocr: Arc<dyn OcrClient>,
        strokes: Arc<dyn StrokeSegmenter>,
        detector: Arc<dyn LayerDetector>,
        segmenter: Arc<dyn MaskSegmenter>,
        inpainter: Arc<dyn Inpainter>,
    ) -> Self {
        Self {
            ocr: Slot::new(ocr.clone(), ocr.single_flight()),
            strokes: Slot::new(strokes.clone(), strokes.single_flight()),
            detector: Slot::new(detector.clone(), detector.single_flight()),
            segmenter: Slot::new(segmenter.clone(), segmenter.single_flight()),
            inpainter: Slot::new(inpainter.clone(), inpainter.single_flight()),
            captioner: None,
            lmm: None,
        }
    }

    /// Offline defaults: no OCR, threshold strokes, connected-component
    /// detection, color-key segmentation, diffusion inpainting.
    pub fn builtin() -> Self {
        Self::new(
            Arc::new(NullOcr),
            Arc::new(ThresholdStrokeSegmenter::default()),
            Arc::new(ComponentDetector::default()),
            Arc::new(ColorKeySegmenter::default()),
            Arc::new(DiffusionInpainter::default()),
        )
    }

    pub fn with_captioner(mut self, captioner: Arc<dyn Captioner>) -> Self {
        let sf = captioner.single_flight();
        self.captioner = Some(Slot::new(captioner, sf));
        self
    }

    pub fn with_lmm(mut self, lmm: Arc<dyn LmmClient>) -> Self {
        let sf = lmm.single_flight();
        self.lmm = Some(Slot::new(lmm, sf));
        self
    }

    pub fn has_captioner(&self) -> bool {
        self.captioner.is_some()
    }

    pub fn has_lmm(&self) -> bool {
        self.lmm.is_some()
    }

    pub fn recognize(&self, image: &RgbaImage) -> ClientResult<Vec<TextBox>> {
        self.ocr.call(Stage::Ocr, |c| c.recognize(image))
    }

    pub fn segment_strokes(&self, image: &RgbaImage) -> ClientResult<BinaryMask> {
        let mask = self.strokes.call(Stage::Stroke, |c| c.segment(image))?;
        if mask.dimensions() != image.dimensions() {
            return Err(ClientError::new(
                Stage::Stroke,
                ClientErrorKind::BadOutput(format!("stroke mask is {:?}, image is {:?}", mask.dimensions(), image.dimensions())),
            ));
        }
        Ok(mask)
    }

    pub fn detect(&self, image: &RgbaImage) -> ClientResult<Vec<Detection>> {
        self.detector.call(Stage::Detect, |c| c.detect(image))
    }

    pub fn segment_mask(&self, image: &RgbaImage, bbox: Rect) -> ClientResult<BinaryMask> {
        if !bbox.within(image.width(), image.height()) {
            return Err(ClientError::new(Stage::Segment, ClientErrorKind::BadInput(format!("bbox {bbox:?} outside image"))));
        }
        let mask = self.segmenter.call(Stage::Segment, |c| c.segment(image, bbox))?;
        if mask.dimensions() != (bbox.w, bbox.h) {
            return Err(ClientError::new(
                Stage::Segment,
                ClientErrorKind::BadOutput(format!("mask is {:?}, bbox is {}x{}", mask.dimensions(), bbox.w, bbox.h)),
            ));
        }
        Ok(mask)
    }

    pub fn inpaint(&self, image: &RgbaImage, mask: &BinaryMask) -> ClientResult<RgbaImage> {
        if mask.dimensions() != image.dimensions() {
            return Err(ClientError::new(Stage::Inpaint, ClientErrorKind::BadInput("mask is not image-sized".into())));
        }
        if mask.is_full() {
            return Err(ClientError::new(Stage::Inpaint, ClientErrorKind::DegenerateInpaint));
        }
        let out = self.inpainter.call(Stage::Inpaint, |c| c.inpaint(image, mask))?;
        if out.dimensions() != image.dimensions() {
            return Err(ClientError::new(Stage::Inpaint, ClientErrorKind::BadOutput("inpainted image changed size".into())));
        }
        Ok(out)
    }

    /// `Ok(None)` when no captioner is configured.
    pub fn caption(&self, pixels: &RgbaImage) -> ClientResult<Option<String>> {
        match &self.captioner {
            Some(slot) => slot.call(Stage::Caption, |c| c.caption(pixels)).map(Some),
            None => Ok(None),
        }
    }

    pub fn chat(&self, history: &[ChatMessage]) -> ClientResult<String> {
        match &self.lmm {
            Some(slot) => slot.call(Stage::Lmm, |c| c.chat(history)),
            None => Err(ClientError::failed(Stage::Lmm, "no LMM client configured")),
        }
    }
}
