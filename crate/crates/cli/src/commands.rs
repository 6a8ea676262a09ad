use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use mggen_core::animdsl::{parse, validate, validate_complete};
use mggen_core::clients::config::ClientsConfig;
use mggen_core::clients::ClientSet;
use mggen_core::compositor::{render_streaming, EncodeError, OutputFormat, PngSequenceWriter, Y4mWriter, Y4M_FILE_NAME};
use mggen_core::decompose::{decompose as run_decompose, DecomposeConfig};
use mggen_core::planner::{lmm_pipeline, rule_pipeline, PlannerError};
use mggen_core::synth::{generate, SynthConfig};
use mggen_core::timeline::compile;
use mggen_core::LayeredDocument;
use serde_json::json;

use crate::bundle;
use crate::exit::{Failure, OrExit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Rules,
    Lmm,
}

fn load_clients(path: Option<&Path>) -> Result<ClientSet, Failure> {
    match path {
        Some(p) => ClientsConfig::load(p).or_input(format!("client config {}", p.display())),
        None => Ok(ClientSet::builtin()),
    }
}

fn decompose_image(image: &Path, clients: &ClientSet) -> Result<LayeredDocument, Failure> {
    let img = image::open(image).or_input(format!("reading {}", image.display()))?.to_rgba8();
    let out = run_decompose(&img, clients, &DecomposeConfig::default()).map_err(|e| Failure::input(anyhow!("[{}] {e}", e.stage())))?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    Ok(out.document)
}

pub fn decompose(image: &Path, out: &Path, clients: Option<&Path>) -> Result<(), Failure> {
    let clients = load_clients(clients)?;
    let doc = decompose_image(image, &clients)?;
    bundle::write(&doc, out).or_input("writing document bundle")?;
    println!("{} layers -> {}", doc.layers().len(), out.join(bundle::MANIFEST).display());
    Ok(())
}

struct Planned {
    script: String,
    report: serde_json::Value,
}

fn plan_document(doc: &LayeredDocument, direction: Option<&str>, mode: Mode, clients: Option<&Path>) -> Result<Planned, Failure> {
    let planned = match mode {
        Mode::Rules => {
            let out = rule_pipeline(doc, direction);
            for note in &out.plan.notes {
                log::info!("{note}");
            }
            let report = json!({"mode": "rules", "groups": out.groups, "plan": out.plan, "warnings": []});
            Planned { script: out.script, report }
        }
        Mode::Lmm => {
            let path = clients.ok_or_else(|| Failure::input(anyhow!("--mode lmm needs --clients with an [lmm] section")))?;
            let clients = load_clients(Some(path))?;
            if !clients.has_lmm() {
                return Err(Failure::input(anyhow!("{} configures no [lmm] client", path.display())));
            }
            let out = lmm_pipeline(doc, direction, &clients).map_err(|e| match e {
                PlannerError::Client(_) => Failure::input(e),
                PlannerError::MalformedGroups(_) | PlannerError::NonPartition(_) => Failure::validation(e),
            })?;
            let warnings: Vec<String> = out.warnings.iter().map(ToString::to_string).collect();
            for w in &warnings {
                log::warn!("{w}");
            }
            let report = json!({"mode": "lmm", "groups": out.groups, "plan_text": out.plan_text, "warnings": warnings});
            Planned { script: out.script, report }
        }
    };
    let script = parse(&planned.script).or_validation("generated script")?;
    validate_complete(&script, doc).map_err(|e| Failure::validation(anyhow!("generated script:\n{e}")))?;
    Ok(planned)
}

pub fn plan(manifest: &Path, out: &Path, direction: Option<&str>, mode: Mode, clients: Option<&Path>) -> Result<(), Failure> {
    let doc = bundle::read(manifest).map_err(Failure::input)?;
    let planned = plan_document(&doc, direction, mode, clients)?;
    write_file(out, planned.script.as_bytes())?;
    println!("script -> {}", out.display());
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).or_input(format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).or_input(format!("writing {}", path.display()))
}

fn render_document(doc: &LayeredDocument, script_text: &str, out: &Path, fps: u32, formats: &[OutputFormat]) -> Result<(), Failure> {
    let script = parse(script_text).or_validation("script")?;
    let checked = validate(&script, doc).map_err(|e| Failure::validation(anyhow!("script:\n{e}")))?;
    let timeline = compile(&checked);
    let fps = fps as f64;
    let canvas = doc.canvas();

    std::fs::create_dir_all(out).or_input(format!("creating {}", out.display()))?;
    let mut pngs = None;
    let mut y4m = None;
    for f in formats {
        match f {
            OutputFormat::PngSeq if pngs.is_none() => pngs = Some(PngSequenceWriter::new(out).map_err(Failure::input)?),
            OutputFormat::Y4m if y4m.is_none() => {
                let path = out.join(Y4M_FILE_NAME);
                let file = File::create(&path).or_input(format!("creating {}", path.display()))?;
                y4m = Some(Y4mWriter::new(BufWriter::new(file), canvas.width, canvas.height, fps).map_err(Failure::input)?);
            }
            _ => {}
        }
    }
    let count = render_streaming(doc, &timeline, fps, |frame| {
        if let Some(w) = pngs.as_mut() {
            w.write_frame(frame)?;
        }
        if let Some(w) = y4m.as_mut() {
            w.write_frame(frame)?;
        }
        Ok::<_, EncodeError>(())
    })
    .map_err(Failure::input)?;
    if let Some(w) = y4m {
        w.finish().map_err(Failure::input)?;
    }
    println!("{count} frames, {} ms -> {}", timeline.total_duration, out.display());
    Ok(())
}

pub fn render(manifest: &Path, script: &Path, out: &Path, fps: u32, formats: &[OutputFormat]) -> Result<(), Failure> {
    let doc = bundle::read(manifest).map_err(Failure::input)?;
    let text = std::fs::read_to_string(script).or_input(format!("reading {}", script.display()))?;
    render_document(&doc, &text, out, fps, formats)
}

pub struct PipelineJob<'a> {
    pub image: &'a Path,
    pub out: &'a Path,
    pub direction: Option<&'a str>,
    pub mode: Mode,
    pub clients: Option<&'a Path>,
    pub fps: u32,
    pub formats: &'a [OutputFormat],
}

pub const DOCUMENT_DIR: &str = "document";
pub const SCRIPT_FILE: &str = "script.anim";
pub const PLAN_FILE: &str = "plan.json";
pub const FRAMES_DIR: &str = "frames";

pub fn pipeline(job: &PipelineJob) -> Result<(), Failure> {
    if job.mode == Mode::Lmm && job.clients.is_none() {
        return Err(Failure::input(anyhow!("--mode lmm needs --clients with an [lmm] section")));
    }
    let clients = load_clients(job.clients)?;
    let doc = decompose_image(job.image, &clients)?;
    let doc_dir = job.out.join(DOCUMENT_DIR);
    bundle::write(&doc, &doc_dir).or_input("writing document bundle")?;
    // Later stages read the bundle back so the persisted files are what gets rendered.
    let doc = bundle::read(&doc_dir.join(bundle::MANIFEST)).map_err(Failure::input)?;

    let planned = plan_document(&doc, job.direction, job.mode, job.clients)?;
    write_file(&job.out.join(SCRIPT_FILE), planned.script.as_bytes())?;
    let report = serde_json::to_string_pretty(&planned.report).context("serializing plan").map_err(Failure::input)? + "\n";
    write_file(&job.out.join(PLAN_FILE), report.as_bytes())?;

    render_document(&doc, &planned.script, &job.out.join(FRAMES_DIR), job.fps, job.formats)
}

pub fn synth(seed: u64, out: &Path) -> Result<(), Failure> {
    let design = generate(seed, &SynthConfig::default());
    let written: Vec<PathBuf> = design.write_fixtures(out).or_input(format!("writing fixtures to {}", out.display()))?;
    println!("{} files -> {} ({} elements)", written.len(), out.display(), design.element_count());
    Ok(())
}
