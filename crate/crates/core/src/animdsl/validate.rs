use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::ast::Script;
use crate::document::{LayerKind, LayeredDocument};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationErrorKind {
    UnknownTarget(String),
    /// Layer already animated by the entry at `first`.
    DuplicateTargetAnimation {
        target: String,
        first: usize,
    },
    BackgroundAnimated(String),
    BadTimelineParams {
        loop_: bool,
        autoplay: bool,
    },
    /// A non-background layer no entry animates.
    MissingLayerAnimation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    /// Index of the offending entry, when the problem belongs to one.
    pub entry: Option<usize>,
    pub kind: ValidationErrorKind,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(i) = self.entry {
            write!(f, "entry {i}: ")?;
        }
        match &self.kind {
            ValidationErrorKind::UnknownTarget(t) => write!(f, "target `{t}` does not name a layer"),
            ValidationErrorKind::DuplicateTargetAnimation { target, first } => {
                write!(f, "`{target}` is already animated by entry {first}; apply one animation per layer")
            }
            ValidationErrorKind::BackgroundAnimated(t) => write!(f, "`{t}` is the background layer and must not be animated"),
            ValidationErrorKind::BadTimelineParams { loop_, autoplay } => {
                write!(f, "timeline must use loop=false, autoplay=true (got loop={loop_}, autoplay={autoplay})")
            }
            ValidationErrorKind::MissingLayerAnimation(id) => write!(f, "layer `#{id}` has no animation"),
        }
    }
}

/// Every problem found in one pass, in entry order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// A script whose entries have been resolved against a document.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedScript {
    pub script: Script,
    /// Document layer index for each entry.
    pub layer_indices: Vec<usize>,
    pub layer_count: usize,
}

/// Checks targets exist, each non-background layer has at most one entry,
/// the background has none, and the timeline is `loop=false, autoplay=true`.
pub fn validate(script: &Script, doc: &LayeredDocument) -> Result<CheckedScript, ValidationErrors> {
    let mut errors = Vec::new();
    if script.params.loop_ || !script.params.autoplay {
        errors.push(ValidationError {
            entry: None,
            kind: ValidationErrorKind::BadTimelineParams { loop_: script.params.loop_, autoplay: script.params.autoplay },
        });
    }
    let mut first_use: HashMap<usize, usize> = HashMap::new();
    let mut indices = Vec::with_capacity(script.entries.len());
    for (i, entry) in script.entries.iter().enumerate() {
        let Some(idx) = entry.target_id().and_then(|id| doc.index_of(id)) else {
            errors.push(ValidationError { entry: Some(i), kind: ValidationErrorKind::UnknownTarget(entry.target.clone()) });
            continue;
        };
        indices.push(idx);
        if doc.layers()[idx].kind == LayerKind::Background {
            errors.push(ValidationError { entry: Some(i), kind: ValidationErrorKind::BackgroundAnimated(entry.target.clone()) });
            continue;
        }
        if let Some(&first) = first_use.get(&idx) {
            errors.push(ValidationError {
                entry: Some(i),
                kind: ValidationErrorKind::DuplicateTargetAnimation { target: entry.target.clone(), first },
            });
        } else {
            first_use.insert(idx, i);
        }
    }
    if errors.is_empty() {
        Ok(CheckedScript { script: script.clone(), layer_indices: indices, layer_count: doc.layers().len() })
    } else {
        Err(ValidationErrors(errors))
    }
}

/// [`validate`] plus: every non-background layer is animated by exactly one entry.
pub fn validate_complete(script: &Script, doc: &LayeredDocument) -> Result<CheckedScript, ValidationErrors> {
    let base = validate(script, doc);
    let animated: Vec<usize> = match &base {
        Ok(c) => c.layer_indices.clone(),
        Err(_) => script.entries.iter().filter_map(|e| e.target_id().and_then(|id| doc.index_of(id))).collect(),
    };
    let missing: Vec<ValidationError> = doc
        .layers()
        .iter()
        .enumerate()
        .filter(|(i, l)| l.kind != LayerKind::Background && !animated.contains(i))
        .map(|(_, l)| ValidationError { entry: None, kind: ValidationErrorKind::MissingLayerAnimation(l.id.clone()) })
        .collect();
    match base {
        Ok(c) if missing.is_empty() => Ok(c),
        Ok(_) => Err(ValidationErrors(missing)),
        Err(ValidationErrors(mut errs)) => {
            errs.extend(missing);
            Err(ValidationErrors(errs))
        }
    }
}
