//! Software compositor and frame encoders.
//!
//! Layers are premultiplied once, transformed per frame by inverse-mapped
//! bilinear sampling, and blended source-over in `f32`. Each frame is
//! quantized exactly once at the end.
//!
//! Transform order for a layer with bbox center `c`: scale about `c`, rotate
//! about `c` (degrees, clockwise on screen), then translate by `(tx, ty)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::RgbaImage;
use rayon::prelude::*;
use thiserror::Error;

use crate::document::{Canvas, LayerImage, LayeredDocument};
use crate::raster::{over_pixel, unpremultiply_quantize, Premul, PremulRaster, Rect, TRANSPARENT};
use crate::timeline::{PropertyState, Timeline};

#[derive(Debug, Error)]
pub enum CompositorError {
    #[error("raster sizes differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("no frames to encode")]
    EmptySequence,
    #[error("y4m needs an integer frame rate, got {0}")]
    NonIntegerFps(f64),
    #[error("frame is {actual:?}, stream is {expected:?}")]
    FrameSize { expected: (u32, u32), actual: (u32, u32) },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {detail}")]
    Png { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub image: RgbaImage,
    pub timestamp_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub fps: f64,
    pub frames: Vec<Frame>,
}

/// A layer placed on the canvas: premultiplied pixels for `rect`, which is
/// already clipped to the canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub rect: Rect,
    pub pixels: PremulRaster,
}

/// Inverse mapping from destination pixel index to continuous source texel
/// coordinates (texel centers at integers).
#[derive(Debug, Clone, Copy)]
struct InverseMap {
    cos: f64,
    sin: f64,
    inv_scale: f64,
    // Destination-space anchor: bbox center plus translation.
    ax: f64,
    ay: f64,
    half_w: f64,
    half_h: f64,
}

impl InverseMap {
    fn new(bbox: Rect, state: &PropertyState) -> Self {
        let (cx, cy) = bbox.center();
        let theta = state.rotate.to_radians();
        let (sin, cos) = if state.rotate % 360.0 == 0.0 { (0.0, 1.0) } else { theta.sin_cos() };
        Self {
            cos,
            sin,
            inv_scale: 1.0 / state.scale,
            ax: cx + state.tx,
            ay: cy + state.ty,
            half_w: bbox.w as f64 / 2.0,
            half_h: bbox.h as f64 / 2.0,
        }
    }

    #[inline]
    fn source(&self, x: u32, y: u32) -> (f64, f64) {
        let qx = x as f64 + 0.5 - self.ax;
        let qy = y as f64 + 0.5 - self.ay;
        let rx = (self.cos * qx + self.sin * qy) * self.inv_scale;
        let ry = (self.cos * qy - self.sin * qx) * self.inv_scale;
        (rx + self.half_w - 0.5, ry + self.half_h - 0.5)
    }
}

/// Canvas-space bounding rect of the transformed layer, grown by one pixel
/// for the bilinear fringe and clipped to the canvas.
fn destination_rect(bbox: Rect, state: &PropertyState, canvas: Canvas) -> Option<Rect> {
    let (cx, cy) = bbox.center();
    let (sin, cos) = state.rotate.to_radians().sin_cos();
    let (hw, hh) = (bbox.w as f64 / 2.0 * state.scale, bbox.h as f64 / 2.0 * state.scale);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (dx, dy) in [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)] {
        let px = cx + state.tx + cos * dx - sin * dy;
        let py = cy + state.ty + sin * dx + cos * dy;
        x0 = x0.min(px);
        y0 = y0.min(py);
        x1 = x1.max(px);
        y1 = y1.max(py);
    }
    let x0 = (x0.floor() - 1.0).max(0.0);
    let y0 = (y0.floor() - 1.0).max(0.0);
    let x1 = (x1.ceil() + 1.0).min(canvas.width as f64);
    let y1 = (y1.ceil() + 1.0).min(canvas.height as f64);
    (x1 > x0 && y1 > y0).then(|| Rect::new(x0 as i32, y0 as i32, (x1 - x0) as u32, (y1 - y0) as u32))
}

#[inline]
fn texel(src: &PremulRaster, x: i64, y: i64) -> Premul {
    if x < 0 || y < 0 || x >= src.width as i64 || y >= src.height as i64 {
        TRANSPARENT
    } else {
        src.data[y as usize * src.width as usize + x as usize]
    }
}

#[inline]
fn bilinear(src: &PremulRaster, u: f64, v: f64) -> Premul {
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = (u - x0) as f32;
    let fy = (v - y0) as f32;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let p00 = texel(src, x0, y0);
    let p10 = texel(src, x0 + 1, y0);
    let p01 = texel(src, x0, y0 + 1);
    let p11 = texel(src, x0 + 1, y0 + 1);
    let mut out = [0.0f32; 4];
    for c in 0..4 {
        let top = p00[c] * (1.0 - fx) + p10[c] * fx;
        let bottom = p01[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

fn is_visible(state: &PropertyState) -> bool {
    state.opacity > 0.0
        && state.scale.is_finite()
        && state.scale > 1e-9
        && state.tx.is_finite()
        && state.ty.is_finite()
        && state.rotate.is_finite()
}

/// Calls `f(x, y, premultiplied)` for every canvas pixel the transformed layer touches.
fn for_each_placed(
    src: &PremulRaster,
    bbox: Rect,
    state: &PropertyState,
    canvas: Canvas,
    mut f: impl FnMut(u32, u32, Premul),
) -> Option<Rect> {
    if !is_visible(state) {
        return None;
    }
    let rect = destination_rect(bbox, state, canvas)?;
    let map = InverseMap::new(bbox, state);
    let opacity = state.opacity as f32;
    for y in rect.y as u32..rect.bottom() as u32 {
        for x in rect.x as u32..rect.right() as u32 {
            let (u, v) = map.source(x, y);
            let mut px = bilinear(src, u, v);
            if opacity != 1.0 {
                for c in &mut px {
                    *c *= opacity;
                }
            }
            f(x, y, px);
        }
    }
    Some(rect)
}

/// Transforms one layer onto the canvas. `None` when nothing lands on it.
pub fn place_layer(layer: &LayerImage, state: &PropertyState, canvas: Canvas) -> Option<Placement> {
    let src = PremulRaster::from_straight(&layer.pixels);
    let rect = destination_rect(layer.bbox, state, canvas)?;
    let mut pixels = PremulRaster::new(rect.w, rect.h);
    for_each_placed(&src, layer.bbox, state, canvas, |x, y, px| {
        let idx = (y - rect.y as u32) as usize * rect.w as usize + (x - rect.x as u32) as usize;
        pixels.data[idx] = px;
    })?;
    Some(Placement { rect, pixels })
}

/// Source-over of two equal-sized premultiplied rasters.
pub fn over(top: &PremulRaster, bottom: &PremulRaster) -> Result<PremulRaster, CompositorError> {
    if (top.width, top.height) != (bottom.width, bottom.height) {
        return Err(CompositorError::DimensionMismatch((top.width, top.height), (bottom.width, bottom.height)));
    }
    Ok(PremulRaster {
        width: top.width,
        height: top.height,
        data: top.data.iter().zip(&bottom.data).map(|(t, b)| over_pixel(*t, *b)).collect(),
    })
}

/// A document with every layer premultiplied once, for repeated compositing.
pub struct PreparedDocument<'a> {
    doc: &'a LayeredDocument,
    layers: Vec<PremulRaster>,
}

impl<'a> PreparedDocument<'a> {
    pub fn new(doc: &'a LayeredDocument) -> Self {
        Self { doc, layers: doc.layers().iter().map(|l| PremulRaster::from_straight(&l.pixels)).collect() }
    }

    /// Composites with `states[i]` applied to layer `i`; missing states are identity.
    pub fn composite(&self, states: &[PropertyState], timestamp_ms: f64) -> Frame {
        let canvas = self.doc.canvas();
        let width = canvas.width as usize;
        let mut acc = vec![TRANSPARENT; width * canvas.height as usize];
        for (i, (layer, src)) in self.doc.layers().iter().zip(&self.layers).enumerate() {
            let state = states.get(i).copied().unwrap_or(PropertyState::IDENTITY);
            for_each_placed(src, layer.bbox, &state, canvas, |x, y, px| {
                if px[3] != 0.0 {
                    let idx = y as usize * width + x as usize;
                    acc[idx] = over_pixel(px, acc[idx]);
                }
            });
        }
        let mut image = RgbaImage::new(canvas.width, canvas.height);
        for (dst, src) in image.pixels_mut().zip(acc) {
            dst.0 = unpremultiply_quantize(src);
        }
        Frame { image, timestamp_ms }
    }
}

pub fn composite(doc: &LayeredDocument, states: &[PropertyState]) -> Frame {
    PreparedDocument::new(doc).composite(states, 0.0)
}

/// Renders every frame of the timeline into memory.
pub fn render(doc: &LayeredDocument, timeline: &Timeline, fps: f64) -> FrameSequence {
    let prepared = PreparedDocument::new(doc);
    let frames = timeline.frame_times(fps).into_par_iter().map(|t| prepared.composite(&timeline.sample(t), t)).collect();
    FrameSequence { fps, frames }
}

/// Renders in parallel batches and hands frames to `sink` in order, so only
/// one batch is held in memory. Returns the frame count.
pub fn render_streaming<E>(
    doc: &LayeredDocument,
    timeline: &Timeline,
    fps: f64,
    mut sink: impl FnMut(&Frame) -> Result<(), E>,
) -> Result<usize, E> {
    let prepared = PreparedDocument::new(doc);
    let times = timeline.frame_times(fps);
    let batch = (rayon::current_num_threads() * 2).max(1);
    for chunk in times.chunks(batch) {
        let frames: Vec<Frame> = chunk.par_iter().map(|&t| prepared.composite(&timeline.sample(t), t)).collect();
        for f in &frames {
            sink(f)?;
        }
    }
    Ok(times.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    PngSeq,
    Y4m,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "png_seq" => Ok(OutputFormat::PngSeq),
            "y4m" => Ok(OutputFormat::Y4m),
            other => Err(format!("unknown format `{other}` (want png_seq or y4m)")),
        }
    }
}

/// Full-range BT.601 conversion, rounded half-up.
pub fn rgb_to_ycbcr(r: u8, g: u8, b: u8) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    [y, cb, cr].map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
}

/// Streaming YUV4MPEG2 writer, 8-bit 4:4:4.
pub struct Y4mWriter<W: Write> {
    out: W,
    width: u32,
    height: u32,
    planes: Vec<u8>,
}

impl<W: Write> Y4mWriter<W> {
    pub fn new(mut out: W, width: u32, height: u32, fps: f64) -> Result<Self, EncodeError> {
        if fps.fract() != 0.0 || fps < 1.0 {
            return Err(EncodeError::NonIntegerFps(fps));
        }
        writeln!(out, "YUV4MPEG2 W{width} H{height} F{}:1 Ip A1:1 C444", fps as u64)
            .map_err(|source| EncodeError::Io { path: PathBuf::from("<y4m>"), source })?;
        Ok(Self { out, width, height, planes: vec![0; width as usize * height as usize * 3] })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), EncodeError> {
        if frame.image.dimensions() != (self.width, self.height) {
            return Err(EncodeError::FrameSize { expected: (self.width, self.height), actual: frame.image.dimensions() });
        }
        let n = self.width as usize * self.height as usize;
        for (i, px) in frame.image.pixels().enumerate() {
            let [y, cb, cr] = rgb_to_ycbcr(px.0[0], px.0[1], px.0[2]);
            self.planes[i] = y;
            self.planes[n + i] = cb;
            self.planes[2 * n + i] = cr;
        }
        let io = |source| EncodeError::Io { path: PathBuf::from("<y4m>"), source };
        self.out.write_all(b"FRAME\n").map_err(io)?;
        self.out.write_all(&self.planes).map_err(io)
    }

    pub fn finish(mut self) -> Result<W, EncodeError> {
        self.out.flush().map_err(|source| EncodeError::Io { path: PathBuf::from("<y4m>"), source })?;
        Ok(self.out)
    }
}

pub fn png_frame_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

/// Writes `frame_%05d.png` files into a directory.
pub struct PngSequenceWriter {
    dir: PathBuf,
    next: usize,
    written: Vec<PathBuf>,
}

impl PngSequenceWriter {
    pub fn new(dir: &Path) -> Result<Self, EncodeError> {
        std::fs::create_dir_all(dir).map_err(|source| EncodeError::Io { path: dir.to_owned(), source })?;
        Ok(Self { dir: dir.to_owned(), next: 0, written: Vec::new() })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<(), EncodeError> {
        let path = self.dir.join(png_frame_name(self.next));
        frame.image.save(&path).map_err(|e| EncodeError::Png { path: path.clone(), detail: e.to_string() })?;
        self.next += 1;
        self.written.push(path);
        Ok(())
    }

    pub fn finish(self) -> Vec<PathBuf> {
        self.written
    }
}

pub const Y4M_FILE_NAME: &str = "video.y4m";

/// Writes a frame sequence into `out_dir` as PNGs or as `video.y4m`.
pub fn encode(seq: &FrameSequence, format: OutputFormat, out_dir: &Path) -> Result<Vec<PathBuf>, EncodeError> {
    let first = seq.frames.first().ok_or(EncodeError::EmptySequence)?;
    match format {
        OutputFormat::PngSeq => {
            let mut w = PngSequenceWriter::new(out_dir)?;
            for f in &seq.frames {
                w.write_frame(f)?;
            }
            Ok(w.finish())
        }
        OutputFormat::Y4m => {
            std::fs::create_dir_all(out_dir).map_err(|source| EncodeError::Io { path: out_dir.to_owned(), source })?;
            let path = out_dir.join(Y4M_FILE_NAME);
            let file = File::create(&path).map_err(|source| EncodeError::Io { path: path.clone(), source })?;
            let (w, h) = first.image.dimensions();
            let mut writer = Y4mWriter::new(BufWriter::new(file), w, h, seq.fps)?;
            for f in &seq.frames {
                writer.write_frame(f)?;
            }
            writer.finish()?;
            Ok(vec![path])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::LayerKind;
    use crate::raster::premultiply;
    use image::Rgba;

    fn doc_with(layer: LayerImage) -> LayeredDocument {
        let bg = RgbaImage::from_fn(40, 30, |x, y| Rgba([(x * 6) as u8, (y * 8) as u8, 90, 255]));
        let mut d = LayeredDocument::new(40, 30, LayerImage::background(bg)).unwrap();
        d.add_layer(layer).unwrap();
        d
    }

    fn patterned(bbox: Rect) -> LayerImage {
        let px = RgbaImage::from_fn(bbox.w, bbox.h, |x, y| Rgba([200, (x * 20) as u8, (y * 20) as u8, 255]));
        LayerImage::new("", LayerKind::Rectangular, bbox, px, "")
    }

    #[test]
    fn identity_placement_copies_pixels() {
        let layer = patterned(Rect::new(5, 6, 8, 7));
        let canvas = Canvas { width: 40, height: 30 };
        let p = place_layer(&layer, &PropertyState::IDENTITY, canvas).unwrap();
        for y in 0..7 {
            for x in 0..8 {
                let gx = (5 + x - p.rect.x) as u32;
                let gy = (6 + y - p.rect.y) as u32;
                assert_eq!(p.pixels.get(gx, gy), premultiply(layer.pixels.get_pixel(x as u32, y as u32).0));
            }
        }
    }

    #[test]
    fn half_opacity_alpha_rounds_to_127_or_128() {
        let layer = patterned(Rect::new(5, 6, 8, 7));
        let state = PropertyState { opacity: 0.5, ..PropertyState::IDENTITY };
        let p = place_layer(&layer, &state, Canvas { width: 40, height: 30 }).unwrap();
        let q = p.pixels.to_straight();
        for y in 0..7 {
            for x in 0..8 {
                let a = q.get_pixel((5 + x - p.rect.x) as u32, (6 + y - p.rect.y) as u32).0[3];
                assert!(a == 127 || a == 128, "alpha {a}");
            }
        }
    }

    #[test]
    fn full_turn_matches_identity() {
        let layer = patterned(Rect::new(10, 8, 12, 9));
        let d = doc_with(layer);
        let still = composite(&d, &[]);
        let turned = composite(&d, &[PropertyState::IDENTITY, PropertyState { rotate: 360.0, ..PropertyState::IDENTITY }]);
        assert_eq!(crate::raster::fraction_within(&still.image, &turned.image, 2), 1.0);
        let turned = composite(&d, &[PropertyState::IDENTITY, PropertyState { rotate: 360.0 + 1e-9, ..PropertyState::IDENTITY }]);
        assert_eq!(crate::raster::fraction_within(&still.image, &turned.image, 2), 1.0);
    }

    #[test]
    fn over_formula() {
        let red = PremulRaster { width: 1, height: 1, data: vec![[0.5, 0.0, 0.0, 0.5]] };
        let blue = PremulRaster { width: 1, height: 1, data: vec![[0.0, 0.0, 1.0, 1.0]] };
        assert_eq!(over(&red, &blue).unwrap().data[0], [0.5, 0.0, 0.5, 1.0]);
        let opaque = PremulRaster { width: 1, height: 1, data: vec![[0.1, 0.2, 0.3, 1.0]] };
        assert_eq!(over(&opaque, &blue).unwrap().data[0], opaque.data[0]);
        let clear = PremulRaster::new(1, 1);
        assert_eq!(over(&clear, &blue).unwrap().data[0], blue.data[0]);
        assert!(over(&clear, &PremulRaster::new(2, 1)).is_err());
    }

    #[test]
    fn composite_matches_flatten_and_clips() {
        let d = doc_with(patterned(Rect::new(3, 4, 10, 10)));
        assert_eq!(composite(&d, &[]).image, d.flatten());
        let hidden = [PropertyState::IDENTITY, PropertyState { opacity: 0.0, ..PropertyState::IDENTITY }];
        assert_eq!(composite(&d, &hidden).image, d.background().pixels);
        let away = [PropertyState::IDENTITY, PropertyState { tx: -500.0, ..PropertyState::IDENTITY }];
        assert_eq!(composite(&d, &away).image, d.background().pixels);
    }

    #[test]
    fn white_is_full_luma_neutral_chroma() {
        assert_eq!(rgb_to_ycbcr(255, 255, 255), [255, 128, 128]);
        assert_eq!(rgb_to_ycbcr(0, 0, 0), [0, 128, 128]);
    }

    #[test]
    fn y4m_stream_layout() {
        let frame = Frame { image: RgbaImage::from_pixel(2, 2, Rgba([255, 255, 255, 255])), timestamp_ms: 0.0 };
        let mut w = Y4mWriter::new(Vec::new(), 2, 2, 25.0).unwrap();
        w.write_frame(&frame).unwrap();
        let bytes = w.finish().unwrap();
        let header = b"YUV4MPEG2 W2 H2 F25:1 Ip A1:1 C444\nFRAME\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[255, 255, 255, 255, 128, 128, 128, 128, 128, 128, 128, 128]);
        assert!(matches!(Y4mWriter::new(Vec::new(), 2, 2, 29.97), Err(EncodeError::NonIntegerFps(_))));
    }

    #[test]
    fn encode_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let empty = FrameSequence { fps: 25.0, frames: vec![] };
        assert!(matches!(encode(&empty, OutputFormat::PngSeq, dir.path()), Err(EncodeError::EmptySequence)));
        let frame = Frame { image: RgbaImage::from_pixel(3, 2, Rgba([1, 2, 3, 255])), timestamp_ms: 0.0 };
        let seq = FrameSequence { fps: 25.0, frames: vec![frame.clone(), frame.clone(), frame] };
        let files = encode(&seq, OutputFormat::PngSeq, dir.path()).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_owned()).collect();
        assert_eq!(names, ["frame_00000.png", "frame_00001.png", "frame_00002.png"]);
        let y4m = encode(&seq, OutputFormat::Y4m, dir.path()).unwrap();
        let len = std::fs::metadata(&y4m[0]).unwrap().len() as usize;
        assert_eq!(len, "YUV4MPEG2 W3 H2 F25:1 Ip A1:1 C444\n".len() + 3 * ("FRAME\n".len() + 3 * 2 * 3));
    }
}
