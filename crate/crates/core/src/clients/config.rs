//! Client configuration file.
//!
//! ```toml
//! [ocr]
//! kind = "fixture"          # fixture | builtin | http
//! path = "ocr.json"         # fixture input, relative to this file
//!
//! [lmm]
//! kind = "http"
//! endpoint = "https://example.invalid/chat"
//! auth_env = "MGGEN_LMM_TOKEN"   # env var holding the token
//! auth_header = "Authorization"  # default; value sent as "Bearer <token>"
//! timeout_ms = 120000
//! retries = 1
//! ```
//!
//! Omitted required slots fall back to the builtin client. `captioner` and
//! `lmm` stay unset unless configured.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use super::http::{
    HttpCaptioner, HttpDetector, HttpEndpoint, HttpInpainter, HttpLmm, HttpOcr, HttpSegmenter, HttpStrokes, DEFAULT_TIMEOUT_MS,
    LMM_TIMEOUT_MS,
};
use super::*;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("[{slot}] {detail}")]
    Slot { slot: &'static str, detail: String },
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    Fixture,
    Builtin,
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotConfig {
    pub kind: ClientKind,
    pub path: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub auth_env: Option<String>,
    pub auth_header: Option<String>,
    pub timeout_ms: Option<u64>,
    pub retries: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientsConfig {
    pub ocr: Option<SlotConfig>,
    pub strokes: Option<SlotConfig>,
    pub detector: Option<SlotConfig>,
    pub segmenter: Option<SlotConfig>,
    pub inpainter: Option<SlotConfig>,
    pub captioner: Option<SlotConfig>,
    pub lmm: Option<SlotConfig>,
}

impl ClientsConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Loads a config file and builds the client set. Relative fixture paths
    /// resolve against the file's directory.
    pub fn load(path: &Path) -> Result<ClientSet, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let cfg = Self::parse(&text).map_err(|detail| ConfigError::Parse { path: path.to_owned(), detail })?;
        cfg.build(path.parent().unwrap_or(Path::new(".")))
    }

    pub fn build(&self, base: &Path) -> Result<ClientSet, ConfigError> {
        let ocr: Arc<dyn OcrClient> = match &self.ocr {
            None => Arc::new(NullOcr),
            Some(c) => match c.kind {
                ClientKind::Builtin => Arc::new(NullOcr),
                ClientKind::Fixture => Arc::new(FixtureOcr::from_file(&c.fixture_path("ocr", base)?)?),
                ClientKind::Http => Arc::new(HttpOcr(c.endpoint("ocr", DEFAULT_TIMEOUT_MS)?)),
            },
        };
        let strokes: Arc<dyn StrokeSegmenter> = match &self.strokes {
            None => Arc::new(ThresholdStrokeSegmenter::default()),
            Some(c) => match c.kind {
                ClientKind::Builtin => Arc::new(ThresholdStrokeSegmenter::default()),
                ClientKind::Fixture => Arc::new(FixtureStrokes::from_path(&c.fixture_path("strokes", base)?)?),
                ClientKind::Http => Arc::new(HttpStrokes(c.endpoint("strokes", DEFAULT_TIMEOUT_MS)?)),
            },
        };
        let detector: Arc<dyn LayerDetector> = match &self.detector {
            None => Arc::new(ComponentDetector::default()),
            Some(c) => match c.kind {
                ClientKind::Builtin => Arc::new(ComponentDetector::default()),
                ClientKind::Fixture => Arc::new(FixtureDetector::from_file(&c.fixture_path("detector", base)?)?),
                ClientKind::Http => Arc::new(HttpDetector(c.endpoint("detector", DEFAULT_TIMEOUT_MS)?)),
            },
        };
        let segmenter: Arc<dyn MaskSegmenter> = match &self.segmenter {
            None => Arc::new(ColorKeySegmenter::default()),
            Some(c) => match c.kind {
                ClientKind::Builtin => Arc::new(ColorKeySegmenter::default()),
                ClientKind::Fixture => Arc::new(FixtureSegmenter::from_dir(&c.fixture_path("segmenter", base)?)?),
                ClientKind::Http => Arc::new(HttpSegmenter(c.endpoint("segmenter", DEFAULT_TIMEOUT_MS)?)),
            },
        };
        let inpainter: Arc<dyn Inpainter> = match &self.inpainter {
            None => Arc::new(DiffusionInpainter::default()),
            Some(c) => match c.kind {
                ClientKind::Builtin => Arc::new(DiffusionInpainter::default()),
                ClientKind::Fixture => {
                    return Err(ConfigError::Slot { slot: "inpainter", detail: "no fixture inpainter; use builtin".into() })
                }
                ClientKind::Http => Arc::new(HttpInpainter(c.endpoint("inpainter", DEFAULT_TIMEOUT_MS)?)),
            },
        };
        let mut set = ClientSet::new(ocr, strokes, detector, segmenter, inpainter);
        if let Some(c) = &self.captioner {
            let captioner: Arc<dyn Captioner> = match c.kind {
                ClientKind::Fixture => Arc::new(FixtureCaptioner::from_file(&c.fixture_path("captioner", base)?)?),
                ClientKind::Http => Arc::new(HttpCaptioner(c.endpoint("captioner", DEFAULT_TIMEOUT_MS)?)),
                ClientKind::Builtin => return Err(ConfigError::Slot { slot: "captioner", detail: "no builtin captioner".into() }),
            };
            set = set.with_captioner(captioner);
        }
        if let Some(c) = &self.lmm {
            let lmm: Arc<dyn LmmClient> = match c.kind {
                ClientKind::Fixture => Arc::new(ScriptedLmm::from_file(&c.fixture_path("lmm", base)?)?),
                ClientKind::Http => Arc::new(HttpLmm(c.endpoint("lmm", LMM_TIMEOUT_MS)?)),
                ClientKind::Builtin => return Err(ConfigError::Slot { slot: "lmm", detail: "no builtin LMM".into() }),
            };
            set = set.with_lmm(lmm);
        }
        Ok(set)
    }
}

impl SlotConfig {
    fn fixture_path(&self, slot: &'static str, base: &Path) -> Result<PathBuf, ConfigError> {
        let p = self.path.as_ref().ok_or(ConfigError::Slot { slot, detail: "fixture needs `path`".into() })?;
        Ok(if p.is_absolute() { p.clone() } else { base.join(p) })
    }

    fn endpoint(&self, slot: &'static str, default_timeout: u64) -> Result<HttpEndpoint, ConfigError> {
        let url = self.endpoint.clone().ok_or(ConfigError::Slot { slot, detail: "http needs `endpoint`".into() })?;
        let mut ep = HttpEndpoint::new(url, self.timeout_ms.unwrap_or(default_timeout));
        ep.retries = self.retries.unwrap_or(0).min(1);
        if let Some(var) = &self.auth_env {
            let token = std::env::var(var).map_err(|_| ConfigError::Slot { slot, detail: format!("env var `{var}` is not set") })?;
            let header = self.auth_header.clone().unwrap_or_else(|| "Authorization".into());
            let value = if header.eq_ignore_ascii_case("authorization") { format!("Bearer {token}") } else { token };
            ep.auth = Some((header, value));
        }
        Ok(ep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_builtin_without_lmm() {
        let set = ClientsConfig::parse("").unwrap().build(Path::new(".")).unwrap();
        assert!(!set.has_lmm());
        assert!(!set.has_captioner());
    }

    #[test]
    fn fixture_paths_resolve_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.jsonl"), "{\"turn\":1,\"template\":\"grouping\",\"response\":\"x\"}\n").unwrap();
        let cfg_path = dir.path().join("clients.toml");
        std::fs::write(&cfg_path, "[lmm]\nkind = \"fixture\"\npath = \"t.jsonl\"\n").unwrap();
        let set = ClientsConfig::load(&cfg_path).unwrap();
        assert!(set.has_lmm());
    }

    #[test]
    fn config_errors() {
        assert!(ClientsConfig::parse("[ocr]\nkind = \"magic\"\n").is_err());
        assert!(ClientsConfig::parse("[ocr]\nkind = \"http\"\nbogus = 1\n").is_err());
        let cfg = ClientsConfig::parse("[ocr]\nkind = \"http\"\n").unwrap();
        assert!(matches!(cfg.build(Path::new(".")), Err(ConfigError::Slot { slot: "ocr", .. })));
        let cfg = ClientsConfig::parse("[lmm]\nkind = \"http\"\nendpoint = \"http://x\"\nauth_env = \"MGGEN_SURELY_UNSET_VAR\"\n").unwrap();
        assert!(matches!(cfg.build(Path::new(".")), Err(ConfigError::Slot { slot: "lmm", .. })));
    }
}
