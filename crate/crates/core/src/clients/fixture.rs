//! File-backed stubs. Lookups are keyed by [`image_key`](super::image_key);
//! the key `*` matches any image.

use std::collections::HashMap;
use std::path::Path;

use image::RgbaImage;
use serde::{Deserialize, Serialize};

use super::{
    image_key, Captioner, ChatMessage, ClientError, ClientErrorKind, ClientResult, LayerDetector, LmmClient, MaskSegmenter, OcrClient,
    Role, Stage, StrokeSegmenter,
};
use crate::decompose::{Detection, TextBox};
use crate::raster::{BinaryMask, Rect};

const ANY: &str = "*";

fn lookup<'a, T>(map: &'a HashMap<String, T>, img: &RgbaImage) -> Option<&'a T> {
    map.get(&image_key(img)).or_else(|| map.get(ANY))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, stage: Stage) -> ClientResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| ClientError::failed(stage, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ClientError::failed(stage, format!("{}: {e}", path.display())))
}

fn read_mask(path: &Path, stage: Stage) -> ClientResult<BinaryMask> {
    let img = image::open(path).map_err(|e| ClientError::failed(stage, format!("{}: {e}", path.display())))?;
    Ok(BinaryMask::from_luma(&img.to_luma8()))
}

/// OCR results from JSON: `{ "<image key>|*": [ {"text": str, "bbox": [x,y,w,h]} ] }`.
#[derive(Debug, Clone, Default)]
pub struct FixtureOcr {
    entries: HashMap<String, Vec<TextBox>>,
}

impl FixtureOcr {
    pub fn new(entries: HashMap<String, Vec<TextBox>>) -> Self {
        Self { entries }
    }

    pub fn any(boxes: Vec<TextBox>) -> Self {
        Self::new(HashMap::from([(ANY.to_owned(), boxes)]))
    }

    pub fn from_file(path: &Path) -> ClientResult<Self> {
        read_json(path, Stage::Ocr).map(Self::new)
    }
}

impl OcrClient for FixtureOcr {
    fn recognize(&self, image: &RgbaImage) -> ClientResult<Vec<TextBox>> {
        lookup(&self.entries, image)
            .cloned()
            .ok_or_else(|| ClientError::new(Stage::Ocr, ClientErrorKind::NotFound(format!("image {}", image_key(image)))))
    }
}

/// Detections from JSON: `{ "<image key>|*": [ {"bbox": [..], "kind": "rectangular"|"nonrectangular"} ] }`.
#[derive(Debug, Clone, Default)]
pub struct FixtureDetector {
    entries: HashMap<String, Vec<Detection>>,
}

impl FixtureDetector {
    pub fn new(entries: HashMap<String, Vec<Detection>>) -> Self {
        Self { entries }
    }

    pub fn any(dets: Vec<Detection>) -> Self {
        Self::new(HashMap::from([(ANY.to_owned(), dets)]))
    }

    pub fn from_file(path: &Path) -> ClientResult<Self> {
        read_json(path, Stage::Detect).map(Self::new)
    }
}

impl LayerDetector for FixtureDetector {
    fn detect(&self, image: &RgbaImage) -> ClientResult<Vec<Detection>> {
        lookup(&self.entries, image)
            .cloned()
            .ok_or_else(|| ClientError::new(Stage::Detect, ClientErrorKind::NotFound(format!("image {}", image_key(image)))))
    }
}

/// Stroke masks from PNG. A file path applies to every image; a directory is
/// searched for `<image key>.png`.
#[derive(Debug, Clone, Default)]
pub struct FixtureStrokes {
    entries: HashMap<String, BinaryMask>,
}

impl FixtureStrokes {
    pub fn new(entries: HashMap<String, BinaryMask>) -> Self {
        Self { entries }
    }

    pub fn any(mask: BinaryMask) -> Self {
        Self::new(HashMap::from([(ANY.to_owned(), mask)]))
    }

    pub fn from_path(path: &Path) -> ClientResult<Self> {
        if path.is_file() {
            return read_mask(path, Stage::Stroke).map(Self::any);
        }
        let mut entries = HashMap::new();
        let dir = std::fs::read_dir(path).map_err(|e| ClientError::failed(Stage::Stroke, format!("{}: {e}", path.display())))?;
        for entry in dir.flatten() {
            let p = entry.path();
            if p.extension().is_some_and(|e| e == "png") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    entries.insert(stem.to_owned(), read_mask(&p, Stage::Stroke)?);
                }
            }
        }
        Ok(Self::new(entries))
    }
}

impl StrokeSegmenter for FixtureStrokes {
    fn segment(&self, image: &RgbaImage) -> ClientResult<BinaryMask> {
        lookup(&self.entries, image)
            .cloned()
            .ok_or_else(|| ClientError::new(Stage::Stroke, ClientErrorKind::NotFound(format!("image {}", image_key(image)))))
    }
}

/// Object masks keyed by bbox; on disk, `<x>_<y>_<w>_<h>.png` files in a directory.
#[derive(Debug, Clone, Default)]
pub struct FixtureSegmenter {
    entries: HashMap<Rect, BinaryMask>,
}

impl FixtureSegmenter {
    pub fn new(entries: HashMap<Rect, BinaryMask>) -> Self {
        Self { entries }
    }

    pub fn file_name(bbox: Rect) -> String {
        format!("{}_{}_{}_{}.png", bbox.x, bbox.y, bbox.w, bbox.h)
    }

    pub fn from_dir(dir: &Path) -> ClientResult<Self> {
        let mut entries = HashMap::new();
        let listing = std::fs::read_dir(dir).map_err(|e| ClientError::failed(Stage::Segment, format!("{}: {e}", dir.display())))?;
        for entry in listing.flatten() {
            let p = entry.path();
            let Some(stem) = p.file_stem().and_then(|s| s.to_str()) else { continue };
            let nums: Vec<i64> = stem.split('_').filter_map(|s| s.parse().ok()).collect();
            if p.extension().is_some_and(|e| e == "png") && nums.len() == 4 {
                let Ok(bbox) = Rect::try_from([nums[0], nums[1], nums[2], nums[3]]) else { continue };
                entries.insert(bbox, read_mask(&p, Stage::Segment)?);
            }
        }
        Ok(Self::new(entries))
    }
}

impl MaskSegmenter for FixtureSegmenter {
    fn segment(&self, _image: &RgbaImage, bbox: Rect) -> ClientResult<BinaryMask> {
        self.entries
            .get(&bbox)
            .cloned()
            .ok_or_else(|| ClientError::new(Stage::Segment, ClientErrorKind::NotFound(format!("bbox {bbox:?}"))))
    }
}

/// Captions from JSON: `{ "<layer pixel key>|*": "caption" }`.
#[derive(Debug, Clone, Default)]
pub struct FixtureCaptioner {
    entries: HashMap<String, String>,
}

impl FixtureCaptioner {
    pub fn new(entries: HashMap<String, String>) -> Self {
        Self { entries }
    }

    pub fn from_file(path: &Path) -> ClientResult<Self> {
        read_json(path, Stage::Caption).map(Self::new)
    }
}

impl Captioner for FixtureCaptioner {
    fn caption(&self, pixels: &RgbaImage) -> ClientResult<String> {
        lookup(&self.entries, pixels)
            .cloned()
            .ok_or_else(|| ClientError::new(Stage::Caption, ClientErrorKind::NotFound(format!("layer {}", image_key(pixels)))))
    }
}

/// One canned LMM reply. `turn` counts user messages, starting at 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: usize,
    pub template: String,
    pub response: String,
}

/// Replays canned replies keyed by (turn, prompt template id).
#[derive(Debug, Clone, Default)]
pub struct ScriptedLmm {
    replies: HashMap<(usize, String), String>,
}

impl ScriptedLmm {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        Self { replies: entries.into_iter().map(|e| ((e.turn, e.template), e.response)).collect() }
    }

    /// One JSON [`TranscriptEntry`] per non-blank line.
    pub fn from_jsonl(text: &str) -> ClientResult<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry =
                serde_json::from_str(line).map_err(|e| ClientError::failed(Stage::Lmm, format!("transcript line {}: {e}", i + 1)))?;
            entries.push(e);
        }
        Ok(Self::new(entries))
    }

    pub fn from_file(path: &Path) -> ClientResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ClientError::failed(Stage::Lmm, format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }
}

impl LmmClient for ScriptedLmm {
    fn chat(&self, history: &[ChatMessage]) -> ClientResult<String> {
        let turn = history.iter().filter(|m| m.role == Role::User).count();
        let template = history.iter().rev().find(|m| m.role == Role::User).and_then(|m| m.template.clone()).unwrap_or_default();
        self.replies
            .get(&(turn, template.clone()))
            .cloned()
            .ok_or(ClientError::new(Stage::Lmm, ClientErrorKind::UnknownTurn { turn, template }))
    }

    fn single_flight(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    #[test]
    fn fixture_ocr_matches_key_before_wildcard() {
        let img = RgbaImage::from_pixel(4, 4, Rgba([1, 2, 3, 255]));
        let other = RgbaImage::new(4, 4);
        let specific = vec![TextBox { text: "hi".into(), bbox: Rect::new(0, 0, 2, 2) }];
        let mut map = HashMap::new();
        map.insert(image_key(&img), specific.clone());
        let ocr = FixtureOcr::new(map.clone());
        assert_eq!(ocr.recognize(&img).unwrap(), specific);
        assert!(matches!(ocr.recognize(&other).unwrap_err().kind, ClientErrorKind::NotFound(_)));
        map.insert(ANY.into(), vec![]);
        assert!(FixtureOcr::new(map).recognize(&other).unwrap().is_empty());
    }

    #[test]
    fn fixture_ocr_reads_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ocr.json");
        std::fs::write(&path, r#"{"*": [{"text": "SALE", "bbox": [1, 2, 30, 10]}]}"#).unwrap();
        let boxes = FixtureOcr::from_file(&path).unwrap().recognize(&RgbaImage::new(40, 40)).unwrap();
        assert_eq!(boxes, vec![TextBox { text: "SALE".into(), bbox: Rect::new(1, 2, 30, 10) }]);
    }

    #[test]
    fn segmenter_fixture_round_trips_through_png_dir() {
        let dir = tempfile::tempdir().unwrap();
        let bbox = Rect::new(3, 4, 5, 6);
        let mask = BinaryMask::from_fn(5, 6, |x, y| (x + y) % 2 == 0);
        mask.to_luma().save(dir.path().join(FixtureSegmenter::file_name(bbox))).unwrap();
        let seg = FixtureSegmenter::from_dir(dir.path()).unwrap();
        assert_eq!(seg.segment(&RgbaImage::new(20, 20), bbox).unwrap(), mask);
    }

    #[test]
    fn scripted_lmm_replays_by_turn_and_template() {
        let lmm = ScriptedLmm::from_jsonl(
            "{\"turn\":1,\"template\":\"grouping\",\"response\":\"[]\"}\n\n{\"turn\":2,\"template\":\"planning\",\"response\":\"plan\"}\n",
        )
        .unwrap();
        let mut history = vec![ChatMessage::text(Role::User, "q1").with_template("grouping")];
        assert_eq!(lmm.chat(&history).unwrap(), "[]");
        history.push(ChatMessage::text(Role::Assistant, "[]"));
        history.push(ChatMessage::text(Role::User, "q2").with_template("coding"));
        let err = lmm.chat(&history).unwrap_err();
        assert_eq!(err.kind, ClientErrorKind::UnknownTurn { turn: 2, template: "coding".into() });
    }
}
