//! On-disk document bundle: `manifest.json`, `index.html` and `assets/`.

use std::collections::HashMap;
use std::path::Path;

use anyhow::Context;
use mggen_core::LayeredDocument;

pub const MANIFEST: &str = "manifest.json";
pub const HTML: &str = "index.html";
pub const ASSET_DIR: &str = "assets";

pub fn write(doc: &LayeredDocument, dir: &Path) -> anyhow::Result<()> {
    let assets_dir = dir.join(ASSET_DIR);
    std::fs::create_dir_all(&assets_dir).with_context(|| format!("creating {}", assets_dir.display()))?;
    let (html, assets) = doc.export_html(ASSET_DIR);
    for (name, bytes) in &assets {
        let path = assets_dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let manifest = dir.join(MANIFEST);
    std::fs::write(&manifest, doc.export_manifest()).with_context(|| format!("writing {}", manifest.display()))?;
    std::fs::write(dir.join(HTML), html).with_context(|| format!("writing {}", dir.join(HTML).display()))?;
    Ok(())
}

/// Reads the manifest plus every PNG in the sibling `assets/` directory.
pub fn read(manifest: &Path) -> anyhow::Result<LayeredDocument> {
    let json = std::fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let assets_dir = manifest.parent().unwrap_or(Path::new(".")).join(ASSET_DIR);
    let mut assets = HashMap::new();
    if let Ok(listing) = std::fs::read_dir(&assets_dir) {
        for entry in listing.flatten() {
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "png") {
                let name = entry.file_name().to_string_lossy().into_owned();
                assets.insert(name, std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?);
            }
        }
    }
    LayeredDocument::import_manifest(&json, &assets).with_context(|| format!("loading {}", manifest.display()))
}
