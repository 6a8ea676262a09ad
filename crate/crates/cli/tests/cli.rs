use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgba, RgbaImage};
use mggen_core::raster::fraction_within;
use mggen_core::synth::{generate, SynthConfig};

fn mggen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mggen")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic design fixtures: image.png plus clients.toml.
fn fixture(dir: &Path, seed: u64) -> (PathBuf, PathBuf) {
    let fx = dir.join(format!("fx{seed}"));
    generate(seed, &SynthConfig::default()).write_fixtures(&fx).unwrap();
    (fx.join("image.png"), fx.join("clients.toml"))
}

fn png_count(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count()
}

#[test]
fn decompose_writes_bundle() {
    let t = tempfile::tempdir().unwrap();
    let (image, clients) = fixture(t.path(), 5);
    let out = t.path().join("doc");
    let r = mggen(&["decompose", s(&image), "--clients", s(&clients), "-o", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let design = generate(5, &SynthConfig::default());
    assert_eq!(png_count(&out.join("assets")), 1 + design.element_count());
    let html = std::fs::read_to_string(out.join("index.html")).unwrap();
    assert!(html.contains("src=\"assets/layer_0.png\""));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["layers"][0]["kind"], "background");
}

#[test]
fn decompose_input_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let r = mggen(&["decompose", s(&t.path().join("missing.png")), "-o", s(&t.path().join("o"))]);
    assert_eq!(code(&r), 2);
    let tiny = t.path().join("tiny.png");
    RgbaImage::from_pixel(8, 8, Rgba([1, 2, 3, 255])).save(&tiny).unwrap();
    let r = mggen(&["decompose", s(&tiny), "-o", s(&t.path().join("o"))]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("at least 16"));
}

#[test]
fn plan_rules_is_deterministic_and_missing_manifest_fails() {
    let t = tempfile::tempdir().unwrap();
    let (image, clients) = fixture(t.path(), 9);
    let doc = t.path().join("doc");
    assert_eq!(code(&mggen(&["decompose", s(&image), "--clients", s(&clients), "-o", s(&doc)])), 0);
    let manifest = doc.join("manifest.json");
    let (a, b) = (t.path().join("a.anim"), t.path().join("b.anim"));
    assert_eq!(code(&mggen(&["plan", s(&manifest), "-o", s(&a)])), 0);
    assert_eq!(code(&mggen(&["plan", s(&manifest), "--mode", "rules", "-o", s(&b)])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(std::fs::read_to_string(&a).unwrap().starts_with("timeline(loop=false, autoplay=true) {\n"));

    let r = mggen(&["plan", s(&t.path().join("nope.json")), "-o", s(&a)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn plan_lmm_replays_transcript() {
    let t = tempfile::tempdir().unwrap();
    let bg = RgbaImage::from_pixel(40, 30, Rgba([240, 240, 240, 255]));
    let mut img = bg.clone();
    for y in 5..15 {
        for x in 5..20 {
            img.put_pixel(x, y, Rgba([200, 10, 10, 255]));
        }
    }
    let image = t.path().join("in.png");
    img.save(&image).unwrap();
    let doc = t.path().join("doc");
    assert_eq!(code(&mggen(&["decompose", s(&image), "-o", s(&doc)])), 0);

    let script = "timeline(loop=false, autoplay=true) {\n  add(\"#layer_1\", {opacity: [0, 1]}, duration=400);\n}\n";
    let lines = [
        serde_json::json!({"turn": 1, "template": "grouping", "response": "[{\"group\": \"box\", \"layers\": [\"layer_1\"]}]"}),
        serde_json::json!({"turn": 2, "template": "planning", "response": "Fade the box in."}),
        serde_json::json!({"turn": 3, "template": "coding", "response": format!("```\n{script}```\n")}),
    ];
    let transcript: String = lines.iter().map(|l| l.to_string() + "\n").collect();
    std::fs::write(t.path().join("lmm.jsonl"), transcript).unwrap();
    std::fs::write(t.path().join("clients.toml"), "[lmm]\nkind = \"fixture\"\npath = \"lmm.jsonl\"\n").unwrap();

    let out = t.path().join("s.anim");
    let r = mggen(&["plan", s(&doc.join("manifest.json")), "--mode", "lmm", "--clients", s(&t.path().join("clients.toml")), "-o", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), script);
}

#[test]
fn render_counts_formats_and_validation() {
    let t = tempfile::tempdir().unwrap();
    let (image, clients) = fixture(t.path(), 2);
    let doc = t.path().join("doc");
    assert_eq!(code(&mggen(&["decompose", s(&image), "--clients", s(&clients), "-o", s(&doc)])), 0);
    let manifest = doc.join("manifest.json");

    let script = t.path().join("two_seconds.anim");
    std::fs::write(&script, "timeline(loop=false, autoplay=true) {\n  add(\"#layer_1\", {opacity: [0, 1]}, duration=2000);\n}\n").unwrap();
    let frames = t.path().join("frames");
    let r = mggen(&["render", s(&manifest), s(&script), "-o", s(&frames), "--format", "png_seq", "--format", "y4m"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(png_count(&frames), 51);
    let y4m = std::fs::read(frames.join("video.y4m")).unwrap();
    let header = String::from_utf8_lossy(&y4m[..y4m.iter().position(|&b| b == b'\n').unwrap()]).into_owned();
    assert!(header.starts_with("YUV4MPEG2 W") && header.contains(" F25:1 Ip A1:1 C444"), "{header}");

    let bad = t.path().join("bad.anim");
    std::fs::write(&bad, "timeline(loop=false, autoplay=true) {\n  add(\"#layer_99\", {opacity: [0, 1]}, duration=200);\n}\n").unwrap();
    let r = mggen(&["render", s(&manifest), s(&bad), "-o", s(&frames)]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("entry 0"));

    std::fs::write(&bad, "timeline(loop=false, autoplay=true) {\n  add(\"#layer_1\", {opacity: [0, 1]}, duration=0);\n}\n").unwrap();
    assert_eq!(code(&mggen(&["render", s(&manifest), s(&bad), "-o", s(&frames)])), 3);
}

#[test]
fn pipeline_end_to_end() {
    let t = tempfile::tempdir().unwrap();
    let (image, clients) = fixture(t.path(), 11);
    let out = t.path().join("run");
    let r = mggen(&["pipeline", s(&image), "--clients", s(&clients), "--direction", "everything fades in", "-o", s(&out)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let frames = out.join("frames");
    let n = png_count(&frames);
    let last = image::open(frames.join(format!("frame_{:05}.png", n - 1))).unwrap().to_rgba8();
    let source = image::open(&image).unwrap().to_rgba8();
    assert!(fraction_within(&last, &source, 2) >= 0.99);

    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("plan.json")).unwrap()).unwrap();
    let notes = plan["plan"]["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("\"fade\"")), "{notes:?}");
    assert!(out.join("document/manifest.json").exists() && out.join("script.anim").exists());
}

#[test]
fn pipeline_lmm_without_clients_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let (image, _) = fixture(t.path(), 1);
    let r = mggen(&["pipeline", s(&image), "--mode", "lmm", "-o", s(&t.path().join("o"))]);
    assert_eq!(code(&r), 2);
}
