//! JSON-over-HTTP adapters for hosted model backends.
//!
//! Each client POSTs one JSON document per call. Images and masks travel as
//! base64 PNG. Request and response bodies are listed in `docs/formats.md`.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use image::RgbaImage;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    Captioner, ChatMessage, ChatPart, ClientError, ClientErrorKind, ClientResult, Inpainter, LayerDetector, LmmClient, MaskSegmenter,
    OcrClient, Stage, StrokeSegmenter,
};
use crate::decompose::{Detection, TextBox};
use crate::document::{decode_png, encode_png};
use crate::raster::{BinaryMask, Rect};

/// Default request timeout for chat backends.
pub const LMM_TIMEOUT_MS: u64 = 120_000;
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    pub url: String,
    /// `(header name, header value)`, e.g. `("Authorization", "Bearer …")`.
    pub auth: Option<(String, String)>,
    pub timeout_ms: u64,
    /// Extra attempts after a failed request (0 or 1 in practice).
    pub retries: u32,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Self {
        Self { url: url.into(), auth: None, timeout_ms, retries: 0 }
    }

    fn post(&self, stage: Stage, body: &Value) -> ClientResult<Value> {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(Duration::from_millis(self.timeout_ms))).build().into();
        let mut last = None;
        for _ in 0..=self.retries {
            let mut req = agent.post(&self.url);
            if let Some((name, value)) = &self.auth {
                req = req.header(name.as_str(), value.as_str());
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    return resp
                        .body_mut()
                        .read_json::<Value>()
                        .map_err(|e| ClientError::new(stage, ClientErrorKind::BadOutput(e.to_string())));
                }
                Err(ureq::Error::Timeout(_)) => last = Some(ClientError::new(stage, ClientErrorKind::Timeout(self.timeout_ms))),
                Err(e) => last = Some(ClientError::failed(stage, e.to_string())),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}

fn png_b64(img: &RgbaImage) -> String {
    B64.encode(encode_png(img))
}

fn mask_b64(mask: &BinaryMask) -> String {
    let mut buf = std::io::Cursor::new(Vec::new());
    mask.to_luma().write_to(&mut buf, image::ImageFormat::Png).expect("in-memory PNG encode");
    B64.encode(buf.into_inner())
}

fn field<T: for<'de> Deserialize<'de>>(stage: Stage, v: &Value, key: &str) -> ClientResult<T> {
    let raw = v.get(key).ok_or_else(|| ClientError::new(stage, ClientErrorKind::BadOutput(format!("missing `{key}`"))))?;
    serde_json::from_value(raw.clone()).map_err(|e| ClientError::new(stage, ClientErrorKind::BadOutput(format!("`{key}`: {e}"))))
}

fn decode_b64_png(stage: Stage, data: &str) -> ClientResult<RgbaImage> {
    let bytes = B64.decode(data).map_err(|e| ClientError::new(stage, ClientErrorKind::BadOutput(e.to_string())))?;
    decode_png(&bytes).map_err(|e| ClientError::new(stage, ClientErrorKind::BadOutput(e)))
}

fn decode_b64_mask(stage: Stage, data: &str) -> ClientResult<BinaryMask> {
    let bytes = B64.decode(data).map_err(|e| ClientError::new(stage, ClientErrorKind::BadOutput(e.to_string())))?;
    let img = image::load_from_memory(&bytes).map_err(|e| ClientError::new(stage, ClientErrorKind::BadOutput(e.to_string())))?;
    Ok(BinaryMask::from_luma(&img.to_luma8()))
}

#[derive(Debug, Clone)]
pub struct HttpOcr(pub HttpEndpoint);

impl OcrClient for HttpOcr {
    fn recognize(&self, image: &RgbaImage) -> ClientResult<Vec<TextBox>> {
        let resp = self.0.post(Stage::Ocr, &json!({ "image_png_base64": png_b64(image) }))?;
        field(Stage::Ocr, &resp, "boxes")
    }
}

#[derive(Debug, Clone)]
pub struct HttpStrokes(pub HttpEndpoint);

impl StrokeSegmenter for HttpStrokes {
    fn segment(&self, image: &RgbaImage) -> ClientResult<BinaryMask> {
        let resp = self.0.post(Stage::Stroke, &json!({ "image_png_base64": png_b64(image) }))?;
        decode_b64_mask(Stage::Stroke, &field::<String>(Stage::Stroke, &resp, "mask_png_base64")?)
    }
}

#[derive(Debug, Clone)]
pub struct HttpDetector(pub HttpEndpoint);

impl LayerDetector for HttpDetector {
    fn detect(&self, image: &RgbaImage) -> ClientResult<Vec<Detection>> {
        let resp = self.0.post(Stage::Detect, &json!({ "image_png_base64": png_b64(image) }))?;
        field(Stage::Detect, &resp, "detections")
    }
}

#[derive(Debug, Clone)]
pub struct HttpSegmenter(pub HttpEndpoint);

impl MaskSegmenter for HttpSegmenter {
    fn segment(&self, image: &RgbaImage, bbox: Rect) -> ClientResult<BinaryMask> {
        let resp = self.0.post(Stage::Segment, &json!({ "image_png_base64": png_b64(image), "bbox": bbox }))?;
        decode_b64_mask(Stage::Segment, &field::<String>(Stage::Segment, &resp, "mask_png_base64")?)
    }
}

#[derive(Debug, Clone)]
pub struct HttpInpainter(pub HttpEndpoint);

impl Inpainter for HttpInpainter {
    fn inpaint(&self, image: &RgbaImage, mask: &BinaryMask) -> ClientResult<RgbaImage> {
        let body = json!({ "image_png_base64": png_b64(image), "mask_png_base64": mask_b64(mask) });
        let resp = self.0.post(Stage::Inpaint, &body)?;
        decode_b64_png(Stage::Inpaint, &field::<String>(Stage::Inpaint, &resp, "image_png_base64")?)
    }
}

#[derive(Debug, Clone)]
pub struct HttpCaptioner(pub HttpEndpoint);

impl Captioner for HttpCaptioner {
    fn caption(&self, pixels: &RgbaImage) -> ClientResult<String> {
        let resp = self.0.post(Stage::Caption, &json!({ "image_png_base64": png_b64(pixels) }))?;
        field(Stage::Caption, &resp, "caption")
    }
}

#[derive(Debug, Clone)]
pub struct HttpLmm(pub HttpEndpoint);

/// Wire form of a chat history.
pub fn chat_request(history: &[ChatMessage]) -> Value {
    let messages: Vec<Value> = history
        .iter()
        .map(|m| {
            let parts: Vec<Value> = m
                .parts()
                .iter()
                .map(|p| match p {
                    ChatPart::Text(t) => json!({ "text": t }),
                    ChatPart::Image { name, png } => json!({ "image_name": name, "image_png_base64": B64.encode(png.as_slice()) }),
                })
                .collect();
            json!({ "role": m.role, "parts": parts })
        })
        .collect();
    json!({ "messages": messages })
}

impl LmmClient for HttpLmm {
    fn chat(&self, history: &[ChatMessage]) -> ClientResult<String> {
        let resp = self.0.post(Stage::Lmm, &chat_request(history))?;
        field(Stage::Lmm, &resp, "text")
    }
}
