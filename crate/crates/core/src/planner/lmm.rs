use std::collections::HashSet;

use serde::Deserialize;
use serde_json::json;

use super::rules::rule_pipeline;
use super::{LayerGroup, PlannerError, PlannerWarning};
use crate::animdsl::{parse, print, validate_complete};
use crate::clients::{ChatMessage, ClientSet, Role};
use crate::document::{encode_png, LayerKind, LayeredDocument};

/// Prompt templates. The first three are sent as written with their
/// placeholders filled in.
pub mod prompts {
    pub const GROUPING: &str = include_str!("../../prompts/grouping.txt");
    pub const PLANNING: &str = include_str!("../../prompts/planning.txt");
    pub const CODING: &str = include_str!("../../prompts/coding.txt");
    pub const DSL_APPENDIX: &str = include_str!("../../prompts/dsl_appendix.txt");
    pub const REPAIR: &str = include_str!("../../prompts/repair.txt");
}

const ASSET_DIR: &str = "assets";

/// Body of the first fenced block (```` ``` ```` with an optional info
/// string), or `None` when the text has no complete fence.
pub fn extract_code_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    let body_start = after.find('\n')? + 1;
    let body = &after[body_start..];
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            return Some(&body[..offset]);
        }
        offset += line.len();
    }
    None
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    group: String,
    layers: Vec<String>,
}

/// Parses `[{"group": name, "layers": [ids]}]`, bare or inside a fenced
/// block, and checks that the groups partition the non-background layers.
pub fn parse_groups(text: &str, doc: &LayeredDocument) -> Result<Vec<LayerGroup>, PlannerError> {
    let body = extract_code_block(text).unwrap_or(text).trim();
    let raw: Vec<RawGroup> = serde_json::from_str(body).map_err(|e| PlannerError::MalformedGroups(e.to_string()))?;
    let mut seen = HashSet::new();
    let mut groups = Vec::with_capacity(raw.len());
    for (n, g) in raw.into_iter().enumerate() {
        if g.layers.is_empty() {
            return Err(PlannerError::NonPartition(format!("group `{}` is empty", g.group)));
        }
        let mut ids = Vec::with_capacity(g.layers.len());
        for id in g.layers {
            let id = id.strip_prefix('#').unwrap_or(&id).to_owned();
            match doc.layer(&id) {
                None => return Err(PlannerError::NonPartition(format!("unknown layer `{id}`"))),
                Some(l) if l.kind == LayerKind::Background => return Err(PlannerError::NonPartition(format!("`{id}` is the background"))),
                Some(_) => {}
            }
            if !seen.insert(id.clone()) {
                return Err(PlannerError::NonPartition(format!("`{id}` is in more than one group")));
            }
            ids.push(id);
        }
        groups.push(LayerGroup { id: format!("group_{}", n + 1), layers: ids, label: g.group });
    }
    let missing: Vec<&str> = doc.layers().iter().skip(1).map(|l| l.id.as_str()).filter(|id| !seen.contains(*id)).collect();
    if !missing.is_empty() {
        return Err(PlannerError::NonPartition(format!("not grouped: {}", missing.join(", "))));
    }
    Ok(groups)
}

fn layer_json(groups: &[LayerGroup], doc: &LayeredDocument) -> String {
    let value: Vec<_> = groups
        .iter()
        .map(|g| {
            let layers: Vec<_> = g
                .layers
                .iter()
                .filter_map(|id| doc.layer(id))
                .map(|l| json!({"id": l.id, "type": l.kind.as_str(), "content": l.caption()}))
                .collect();
            json!({"group": g.label, "layers": layers})
        })
        .collect();
    serde_json::to_string_pretty(&value).expect("json values serialize")
}

#[derive(Debug, Clone)]
pub struct LmmOutcome {
    pub groups: Vec<LayerGroup>,
    /// Canonical script text, validated against the document.
    pub script: String,
    /// The model's free-text plan from turn 2.
    pub plan_text: String,
    pub warnings: Vec<PlannerWarning>,
    pub transcript: Vec<ChatMessage>,
}

fn accept(reply: &str, doc: &LayeredDocument) -> Result<String, String> {
    let code = extract_code_block(reply).ok_or_else(|| "no fenced code block in reply".to_owned())?;
    let script = parse(code).map_err(|e| e.to_string())?;
    validate_complete(&script, doc).map_err(|e| e.to_string())?;
    Ok(print(&script))
}

/// Grouping, planning and coding as a three-turn chat. A rejected script
/// gets one repair turn; a second rejection falls back to the rule-based
/// script with a [`PlannerWarning::FallbackUsed`].
pub fn lmm_pipeline(doc: &LayeredDocument, direction: Option<&str>, clients: &ClientSet) -> Result<LmmOutcome, PlannerError> {
    let (html, _) = doc.export_html(ASSET_DIR);
    let thumbnail = encode_png(&doc.flatten());
    let mut history = vec![ChatMessage::text(Role::User, prompts::GROUPING.trim_end().replace("[#HTML]", &html))
        .with_template("grouping")
        .with_image("image 1", thumbnail)];

    let reply = clients.chat(&history)?;
    history.push(ChatMessage::text(Role::Assistant, reply.clone()));
    let groups = parse_groups(&reply, doc)?;

    let planning = prompts::PLANNING.trim_end().replace("[#USER]", direction.unwrap_or("")).replace("[#LAYER]", &layer_json(&groups, doc));
    history.push(ChatMessage::text(Role::User, planning).with_template("planning"));
    let plan_text = clients.chat(&history)?;
    history.push(ChatMessage::text(Role::Assistant, plan_text.clone()));

    let coding = format!("{}\n\n{}", prompts::CODING.trim_end(), prompts::DSL_APPENDIX.trim_end());
    history.push(ChatMessage::text(Role::User, coding).with_template("coding"));
    let reply = clients.chat(&history)?;
    history.push(ChatMessage::text(Role::Assistant, reply.clone()));
    let first_error = match accept(&reply, doc) {
        Ok(script) => return Ok(LmmOutcome { groups, script, plan_text, warnings: vec![], transcript: history }),
        Err(e) => e,
    };
    log::warn!("LMM script rejected, requesting repair: {first_error}");

    history.push(ChatMessage::text(Role::User, prompts::REPAIR.trim_end().replace("[#ERRORS]", &first_error)).with_template("repair"));
    let reply = clients.chat(&history)?;
    history.push(ChatMessage::text(Role::Assistant, reply.clone()));
    match accept(&reply, doc) {
        Ok(script) => Ok(LmmOutcome { groups, script, plan_text, warnings: vec![], transcript: history }),
        Err(second) => {
            let fallback = rule_pipeline(doc, direction);
            Ok(LmmOutcome {
                groups: fallback.groups,
                script: fallback.script,
                plan_text,
                warnings: vec![PlannerWarning::FallbackUsed { reason: second }],
                transcript: history,
            })
        }
    }
}
