//! Animation planning: group layers, choose an entrance effect per group,
//! and emit a script.
//!
//! [`group_layers`], [`plan`] and [`codegen`] form the deterministic rule
//! path. [`lmm_pipeline`] runs the same three stages as a chat with an LMM
//! and falls back to the rules when the model's script cannot be repaired.

mod lmm;
mod rules;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::ClientError;

pub use lmm::{extract_code_block, lmm_pipeline, parse_groups, prompts, LmmOutcome};
pub use rules::{codegen, codegen_script, group_layers, plan, rule_pipeline, RuleOutcome, TOTAL_CAP_MS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGroup {
    pub id: String,
    /// Member layer ids in animation order.
    pub layers: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlideFrom {
    Left,
    Right,
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Slide(SlideFrom),
    Fade,
    Pop,
    Rotate,
}

impl Effect {
    /// Unscaled entry duration in ms.
    pub fn duration_ms(self) -> u64 {
        match self {
            Effect::Slide(_) => 600,
            Effect::Fade | Effect::Pop => 500,
            Effect::Rotate => 700,
        }
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Slide(d) => write!(f, "slide from {}", format!("{d:?}").to_lowercase()),
            Effect::Fade => f.write_str("fade"),
            Effect::Pop => f.write_str("pop"),
            Effect::Rotate => f.write_str("rotate"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub group: String,
    pub layers: Vec<String>,
    pub effect: Effect,
    pub stagger_ms: u64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationPlan {
    /// In timeline order.
    pub groups: Vec<GroupPlan>,
    /// Factor applied to every duration, stagger and gap so the total fits the cap.
    pub time_scale: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlannerWarning {
    /// The LMM script was rejected twice; the rule-based script was used.
    FallbackUsed { reason: String },
}

impl fmt::Display for PlannerWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerWarning::FallbackUsed { reason } => write!(f, "LMM script rejected, used rule-based plan: {reason}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("grouping response is not a JSON group list: {0}")]
    MalformedGroups(String),
    #[error("groups do not partition the layers: {0}")]
    NonPartition(String),
}
