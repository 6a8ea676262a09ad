use std::time::Instant;

use anyhow::anyhow;
use clap::Args;
use image::{Rgba, RgbaImage};
use mggen_core::animdsl::{validate, Easing, Entry, Offset, Property, Script};
use mggen_core::compositor::render_streaming;
use mggen_core::timeline::compile;
use mggen_core::{LayerImage, LayerKind, LayeredDocument, Rect};

use crate::exit::Failure;

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1280)]
    width: u32,
    #[arg(long, default_value_t = 720)]
    height: u32,
    /// Animated layers on top of the background.
    #[arg(long, default_value_t = 8)]
    layers: u32,
    #[arg(long, default_value_t = 5000)]
    duration_ms: u64,
    #[arg(long, default_value_t = 25)]
    fps: u32,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Wall-clock budget the run is compared against.
    #[arg(long, default_value_t = 10.0)]
    budget_s: f64,
}

fn bench_document(w: u32, h: u32, layers: u32) -> LayeredDocument {
    let bg = RgbaImage::from_fn(w, h, |x, y| Rgba([(x * 255 / w) as u8, (y * 255 / h) as u8, 96, 255]));
    let mut doc = LayeredDocument::new(w as i64, h as i64, LayerImage::background(bg)).expect("valid canvas");
    for k in 0..layers {
        let (lw, lh) = ((w / 4 + k * 23 % 97).min(w), (h / 4 + k * 31 % 89).min(h));
        let x = ((k * 157) % (w - lw + 1)) as i32;
        let y = ((k * 89) % (h - lh + 1)) as i32;
        let kind = if k % 3 == 0 { LayerKind::Text } else { LayerKind::NonRectangular };
        let pixels = RgbaImage::from_fn(lw, lh, |px, py| {
            let a = if (px / 8 + py / 8 + k) % 4 == 0 { 0 } else { 200 + (k * 7 % 55) as u8 };
            Rgba([(px * 3 + k * 40) as u8, (py * 5) as u8, (k * 70) as u8, a])
        });
        doc.add_layer(LayerImage::new("", kind, Rect::new(x, y, lw, lh), pixels, "")).expect("layer fits");
    }
    doc
}

fn bench_script(doc: &LayeredDocument, total_ms: u64) -> Script {
    let ids: Vec<String> = doc.layers().iter().skip(1).map(|l| format!("#{}", l.id)).collect();
    let step = total_ms / (ids.len() as u64 + 1);
    let entries = ids
        .into_iter()
        .enumerate()
        .map(|(k, id)| {
            let start = k as u64 * step;
            let e = Entry::new(id, (total_ms - start) as f64).offset(Offset::Absolute(start)).easing(Easing::EaseInOutCubic);
            match k % 3 {
                0 => e.track(Property::TranslateX, -200.0, 0.0).track(Property::Opacity, 0.0, 1.0),
                1 => e.track(Property::Scale, 0.3, 1.0).track(Property::Rotate, -90.0, 0.0),
                _ => e.track(Property::TranslateY, 150.0, 0.0).track(Property::Rotate, 45.0, 0.0).track(Property::Opacity, 0.2, 1.0),
            }
        })
        .collect();
    Script { entries, ..Default::default() }
}

pub fn run(args: &BenchArgs) -> Result<(), Failure> {
    if args.width < 16 || args.height < 16 || args.fps == 0 || args.threads == 0 {
        return Err(Failure::input(anyhow!("bench needs width, height >= 16 and fps, threads >= 1")));
    }
    let doc = bench_document(args.width, args.height, args.layers);
    let script = bench_script(&doc, args.duration_ms);
    let checked = validate(&script, &doc).map_err(|e| Failure::validation(anyhow!("{e}")))?;
    let timeline = compile(&checked);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.threads).build().map_err(Failure::input)?;

    let started = Instant::now();
    let mut checksum = 0u64;
    let frames = pool
        .install(|| {
            render_streaming(&doc, &timeline, args.fps as f64, |f| {
                checksum = checksum.wrapping_add(f.image.as_raw().iter().map(|&b| b as u64).sum::<u64>());
                Ok::<_, ()>(())
            })
        })
        .expect("sink never fails");
    let secs = started.elapsed().as_secs_f64();
    let verdict = if secs <= args.budget_s { "PASS" } else { "FAIL" };
    println!(
        "bench: {frames} frames {}x{} layers={} threads={} time={secs:.2}s fps={:.1} budget={}s {verdict} checksum={checksum:x}",
        args.width,
        args.height,
        args.layers,
        args.threads,
        frames as f64 / secs,
        args.budget_s,
    );
    Ok(())
}
