//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the report is always printed; exits non-zero on any failure.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use image::{Rgba, RgbaImage};
use mggen_core::animdsl::{
    parse, print, validate, validate_complete, Easing, Entry, Offset, Property, Script, Sign, TimelineParams, Track,
};
use mggen_core::clients::{ClientSet, ScriptedLmm, TranscriptEntry};
use mggen_core::compositor::render_streaming;
use mggen_core::decompose::{decompose, group_stroke_mask, DecomposeConfig};
use mggen_core::planner::{lmm_pipeline, rule_pipeline};
use mggen_core::raster::{fraction_within, over_pixel, Premul};
use mggen_core::synth::{generate, SynthConfig, SynthDesign};
use mggen_core::timeline::{compile, ease};
use mggen_core::{BinaryMask, LayerImage, LayerKind, LayeredDocument, Rect};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: u64 = 50;

struct Report {
    failed: Vec<u8>,
}

impl Report {
    fn line(&mut self, n: u8, name: &str, pass: bool, detail: String) {
        println!("criterion {n} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(n);
        }
    }
}

fn runner(cases: u32, seed: u8) -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    )
}

fn corpus() -> Vec<SynthDesign> {
    (0..CORPUS).map(|seed| generate(1000 + seed, &SynthConfig::default())).collect()
}

fn criterion_1(report: &mut Report, designs: &[SynthDesign]) -> Vec<LayeredDocument> {
    let mut docs = Vec::new();
    let (mut worst, mut slowest, mut ok) = (1.0f64, 0.0f64, true);
    for d in designs {
        let started = Instant::now();
        match decompose(&d.image, &d.clients(), &DecomposeConfig::default()) {
            Ok(out) => {
                let secs = started.elapsed().as_secs_f64();
                let frac = fraction_within(&out.document.flatten(), &d.image, 2);
                worst = worst.min(frac);
                slowest = slowest.max(secs);
                ok &= frac >= 0.99 && secs < 5.0;
                docs.push(out.document);
            }
            Err(e) => {
                println!("  seed {}: {e}", d.seed);
                ok = false;
            }
        }
    }
    report.line(
        1,
        "decompose round-trip",
        ok && docs.len() == designs.len(),
        format!("{} designs, worst {:.4} of pixels within 2/255, slowest {slowest:.2} s", designs.len(), worst),
    );
    docs
}

fn criterion_2(report: &mut Report, docs: &[LayeredDocument]) {
    let mut worst = 1.0f64;
    for doc in docs {
        let out = rule_pipeline(doc, None);
        let Ok(checked) = parse(&out.script).map_err(|e| e.to_string()).and_then(|s| validate_complete(&s, doc).map_err(|e| e.to_string()))
        else {
            worst = 0.0;
            continue;
        };
        let timeline = compile(&checked);
        let mut last = None;
        render_streaming(doc, &timeline, 25.0, |f| {
            last = Some(f.image.clone());
            Ok::<_, ()>(())
        })
        .expect("sink never fails");
        worst = worst.min(fraction_within(&last.expect("at least one frame"), &doc.flatten(), 2));
    }
    report.line(2, "final-frame fidelity", worst >= 0.999, format!("{} renders, worst {worst:.5} of pixels within 2/255", docs.len()));
}

fn conforms(text: &str, doc: &LayeredDocument) -> Result<(), String> {
    let script = parse(text).map_err(|e| e.to_string())?;
    if script.params.loop_ || !script.params.autoplay {
        return Err("timeline params".into());
    }
    let checked = validate_complete(&script, doc).map_err(|e| e.to_string())?;
    let mut hits = vec![0usize; doc.layers().len()];
    for &i in &checked.layer_indices {
        hits[i] += 1;
    }
    if hits[0] != 0 || hits[1..].iter().any(|&h| h != 1) {
        return Err(format!("entry counts {hits:?}"));
    }
    Ok(())
}

fn transcript(entries: &[(usize, &str, String)]) -> ClientSet {
    let lmm = ScriptedLmm::new(entries.iter().map(|(turn, template, response)| TranscriptEntry {
        turn: *turn,
        template: (*template).into(),
        response: response.clone(),
    }));
    ClientSet::builtin().with_lmm(Arc::new(lmm))
}

fn criterion_3(report: &mut Report, docs: &[LayeredDocument]) {
    let directions = [None, Some("text slides in from the left"), Some("the logo pops and the title fades"), Some("spin everything")];
    let mut checked = 0;
    let mut failures = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        for dir in directions {
            checked += 1;
            if let Err(e) = conforms(&rule_pipeline(doc, dir).script, doc) {
                failures.push(format!("rules doc {i}: {e}"));
            }
        }
        // LMM path: one accepted first try, one after repair, one fallback.
        let groups = serde_json::json!([{"group": "all", "layers": doc.layers().iter().skip(1).map(|l| l.id.clone()).collect::<Vec<_>>()}])
            .to_string();
        let good = format!("```\n{}```", rule_pipeline(doc, Some("everything fades")).script);
        let bad = "```\ntimeline(loop=true, autoplay=true) {\n}\n```".to_owned();
        let cases = [
            vec![(1, "grouping", groups.clone()), (2, "planning", "plan".into()), (3, "coding", good.clone())],
            vec![(1, "grouping", groups.clone()), (2, "planning", "plan".into()), (3, "coding", bad.clone()), (4, "repair", good)],
            vec![(1, "grouping", groups), (2, "planning", "plan".into()), (3, "coding", bad.clone()), (4, "repair", bad)],
        ];
        for (k, case) in cases.iter().enumerate() {
            checked += 1;
            match lmm_pipeline(doc, None, &transcript(case)) {
                Ok(out) => {
                    if let Err(e) = conforms(&out.script, doc) {
                        failures.push(format!("lmm doc {i} case {k}: {e}"));
                    }
                }
                Err(e) => failures.push(format!("lmm doc {i} case {k}: {e}")),
            }
        }
    }
    for f in failures.iter().take(5) {
        println!("  {f}");
    }
    report.line(3, "coding-constraint conformance", failures.is_empty(), format!("{checked} scripts, {} violations", failures.len()));
}

fn criterion_4(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bg = RgbaImage::from_pixel(16, 16, Rgba([0, 0, 0, 255]));
    let mut mismatches = 0;
    for _ in 0..100 {
        let layers = rng.random_range(1..=4usize);
        let mut doc = LayeredDocument::new(16, 16, LayerImage::background(bg.clone())).unwrap();
        for _ in 0..layers {
            doc.add_layer(LayerImage::new(
                "",
                LayerKind::Rectangular,
                Rect::new(4, 4, 4, 4),
                RgbaImage::from_pixel(4, 4, Rgba([255, 0, 0, 255])),
                "",
            ))
            .unwrap();
        }
        let entries = (1..=layers)
            .map(|i| {
                let offset = match rng.random_range(0..3) {
                    0 => Offset::AfterPrevious,
                    1 => Offset::Absolute(rng.random_range(0..3000)),
                    _ => Offset::Relative(if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus }, rng.random_range(0..1500)),
                };
                Entry::new(format!("#layer_{i}"), rng.random_range(1.0..2500.0))
                    .delay(if rng.random_bool(0.3) { rng.random_range(0.0..400.0) } else { 0.0 })
                    .offset(offset)
                    .track(Property::Opacity, 0.0, 1.0)
            })
            .collect();
        let timeline = compile(&validate(&Script { entries, ..Default::default() }, &doc).unwrap());
        let total = timeline.total_duration;
        let grid = (total / 40.0).floor() as usize + 1;
        let expected = if ((grid - 1) as f64) * 40.0 < total { grid + 1 } else { grid };
        let rendered = render_streaming(&doc, &timeline, 25.0, |_| Ok::<_, ()>(())).unwrap();
        if rendered != expected {
            mismatches += 1;
        }
    }
    report.line(4, "frame-count law", mismatches == 0, format!("100 timelines at 25 fps, {mismatches} mismatches"));
}

fn dsl_value(p: Property) -> BoxedStrategy<f64> {
    match p {
        Property::Opacity => (0.0..=1.0f64).boxed(),
        Property::Scale => (1e-4..100.0f64).boxed(),
        _ => prop_oneof![-1e5..1e5f64, (-2000i32..2000).prop_map(f64::from)].boxed(),
    }
}

fn dsl_script() -> impl Strategy<Value = Script> {
    let tracks = proptest::sample::subsequence(Property::ALL.to_vec(), 1..=5).prop_flat_map(|ps| {
        ps.into_iter().map(|p| (dsl_value(p), dsl_value(p)).prop_map(move |(from, to)| (p, Track { from, to }))).collect::<Vec<_>>()
    });
    let offset = prop_oneof![
        Just(Offset::AfterPrevious),
        any::<u32>().prop_map(|n| Offset::Absolute(n.into())),
        (any::<bool>(), any::<u32>()).prop_map(|(p, n)| Offset::Relative(if p { Sign::Plus } else { Sign::Minus }, n.into())),
    ];
    let entry =
        ("[ -~]{0,10}", tracks, 1e-2..1e5f64, prop_oneof![Just(0.0), 0.0..5e3f64], proptest::sample::select(Easing::ALL.to_vec()), offset)
            .prop_map(|(target, tracks, duration, delay, easing, offset)| {
                tracks
                    .into_iter()
                    .fold(Entry::new(target, duration).delay(delay).easing(easing).offset(offset), |e, (p, t)| e.track(p, t.from, t.to))
            });
    (any::<bool>(), any::<bool>(), proptest::collection::vec(entry, 0..6))
        .prop_map(|(loop_, autoplay, entries)| Script { params: TimelineParams { loop_, autoplay }, entries })
}

fn criterion_5(report: &mut Report) {
    let failures = std::cell::Cell::new(0u32);
    let result = runner(1000, 5).run(&dsl_script(), |ast| {
        if !parse(&print(&ast)).is_ok_and(|back| back == ast) {
            failures.set(failures.get() + 1);
        }
        Ok(())
    });
    let failures = failures.get();
    report.line(5, "DSL round-trip", result.is_ok() && failures == 0, format!("1000 generated scripts, {failures} failures"));
}

fn criterion_6(report: &mut Report) {
    let monotone = [
        Easing::Linear,
        Easing::EaseInQuad,
        Easing::EaseOutQuad,
        Easing::EaseInOutQuad,
        Easing::EaseInCubic,
        Easing::EaseOutCubic,
        Easing::EaseInOutCubic,
    ];
    let endpoints = Easing::ALL.iter().all(|&e| ease(e, 0.0).abs() < 1e-12 && (ease(e, 1.0) - 1.0).abs() < 1e-12);
    let monotonic = monotone.iter().all(|&e| (1..=10_000).all(|i| ease(e, i as f64 / 1e4) >= ease(e, (i - 1) as f64 / 1e4)));

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pixel = || -> Premul {
        let a: f32 = rng.random();
        [rng.random::<f32>() * a, rng.random::<f32>() * a, rng.random::<f32>() * a, a]
    };
    let mut worst = 0.0f32;
    for _ in 0..100_000 {
        let (a, b, c) = (pixel(), pixel(), pixel());
        let l = over_pixel(over_pixel(a, b), c);
        let r = over_pixel(a, over_pixel(b, c));
        worst = (0..4).map(|i| (l[i] - r[i]).abs()).fold(worst, f32::max);
    }
    report.line(
        6,
        "easing and compositing oracles",
        endpoints && monotonic && worst < 1e-6,
        format!("endpoints {endpoints}, monotone {monotonic}, associativity max deviation {worst:e} over 1e5 triples"),
    );
}

fn grouping_oracle(mask: &BinaryMask, boxes: &[Rect]) -> Vec<BinaryMask> {
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            BinaryMask::from_fn(b.w, b.h, |lx, ly| {
                let (x, y) = (b.x as i64 + lx as i64, b.y as i64 + ly as i64);
                let inside = x >= 0 && y >= 0 && x < mask.width() as i64 && y < mask.height() as i64;
                inside
                    && mask.get(x as u32, y as u32)
                    && boxes.iter().enumerate().filter(|(_, c)| c.contains(x, y)).min_by_key(|(j, c)| (c.area(), *j)).map(|(j, _)| j)
                        == Some(i)
            })
        })
        .collect()
}

fn criterion_7(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..200 {
        let (w, h) = (rng.random_range(1..=32u32), rng.random_range(1..=32u32));
        let density: f64 = rng.random();
        let mask = BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density));
        let boxes: Vec<Rect> = (0..rng.random_range(0..=4))
            .map(|_| {
                Rect::new(
                    rng.random_range(-2..w as i32),
                    rng.random_range(-2..h as i32),
                    rng.random_range(1..=16),
                    rng.random_range(1..=16),
                )
            })
            .collect();
        if group_stroke_mask(&mask, &boxes) != grouping_oracle(&mask, &boxes) {
            mismatches += 1;
        }
    }
    report.line(7, "stroke-grouping oracle", mismatches == 0, format!("200 masks up to 32x32 with up to 4 boxes, {mismatches} mismatches"));
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8(report: &mut Report) {
    let t = tempfile::tempdir().unwrap();
    let fx = t.path().join("fx");
    generate(8, &SynthConfig::default()).write_fixtures(&fx).unwrap();
    let run = |name: &str| {
        let out = t.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_mggen"))
            .args(["pipeline", "--mode", "rules", "--format", "png_seq", "--format", "y4m", "--clients"])
            .arg(fx.join("clients.toml"))
            .arg(fx.join("image.png"))
            .arg("-o")
            .arg(&out)
            .output()
            .unwrap();
        (status.status.success(), tree(&out))
    };
    let (ok_a, a) = run("a");
    let (ok_b, b) = run("b");
    let identical = ok_a && ok_b && a == b;
    let needed = ["document/manifest.json", "script.anim", "frames/frame_00000.png", "frames/video.y4m"];
    let complete = needed.iter().all(|k| a.contains_key(*k));
    report.line(8, "determinism", identical && complete, format!("{} files compared byte for byte", a.len()));
}

fn criterion_9() {
    if cfg!(debug_assertions) {
        println!("criterion 9 performance: SKIP (report-only; run `cargo test --release --test acceptance` or `mggen bench`)");
        return;
    }
    let out = Command::new(env!("CARGO_BIN_EXE_mggen")).args(["bench", "--threads", "1"]).output().unwrap();
    let line = String::from_utf8_lossy(&out.stdout).trim().to_owned();
    let verdict = if line.contains(" PASS ") { "PASS" } else { "FAIL" };
    println!("criterion 9 performance: {verdict} (report-only; {line})");
}

fn main() {
    let mut report = Report { failed: Vec::new() };
    let designs = corpus();
    let docs = criterion_1(&mut report, &designs);
    criterion_2(&mut report, &docs);
    criterion_3(&mut report, &docs);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_9();
    if !report.failed.is_empty() {
        eprintln!("failed criteria: {:?}", report.failed);
        std::process::exit(1);
    }
}
