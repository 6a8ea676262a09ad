use std::sync::Arc;

use image::{Rgba, RgbaImage};
use mggen_core::clients::{ChatPart, ClientErrorKind, ClientSet, Role, ScriptedLmm, TranscriptEntry};
use mggen_core::planner::{lmm_pipeline, rule_pipeline, PlannerError, PlannerWarning};
use mggen_core::{LayerImage, LayerKind, LayeredDocument, Rect};

fn doc() -> LayeredDocument {
    let mut d =
        LayeredDocument::new(200, 100, LayerImage::background(RgbaImage::from_pixel(200, 100, Rgba([250, 250, 250, 255])))).unwrap();
    d.add_layer(LayerImage::new(
        "",
        LayerKind::Rectangular,
        Rect::new(10, 10, 40, 40),
        RgbaImage::from_pixel(40, 40, Rgba([0, 90, 200, 255])),
        "logo",
    ))
    .unwrap();
    d.add_layer(LayerImage::new(
        "",
        LayerKind::Text,
        Rect::new(80, 40, 60, 15),
        RgbaImage::from_pixel(60, 15, Rgba([0, 0, 0, 255])),
        "SALE",
    ))
    .unwrap();
    d
}

const GROUPS: &str =
    "Here you go:\n```json\n[{\"group\": \"logo\", \"layers\": [\"layer_1\"]}, {\"group\": \"headline\", \"layers\": [\"layer_2\"]}]\n```";
const GOOD: &str = "```\ntimeline(loop=false, autoplay=true) {\n  add(\"#layer_1\", {scale: [0.3, 1], opacity: [0, 1]}, duration=500, easing=\"easeOutBack\");\n  add(\"#layer_2\", {translateX: [-140, 0]}, duration=600, easing=\"easeOutCubic\", offset=\"-=200\");\n}\n```";
const DUPLICATE: &str = "```\ntimeline(loop=false, autoplay=true) {\n  add(\"#layer_1\", {opacity: [0, 1]}, duration=500);\n  add(\"#layer_1\", {opacity: [0, 1]}, duration=500);\n}\n```";

fn clients(entries: &[(usize, &str, &str)]) -> ClientSet {
    let lmm = ScriptedLmm::new(entries.iter().map(|(turn, template, response)| TranscriptEntry {
        turn: *turn,
        template: (*template).to_owned(),
        response: (*response).to_owned(),
    }));
    ClientSet::builtin().with_lmm(Arc::new(lmm))
}

#[test]
fn valid_script_is_accepted() {
    let d = doc();
    let out = lmm_pipeline(
        &d,
        Some("logo pops"),
        &clients(&[(1, "grouping", GROUPS), (2, "planning", "Pop the logo, slide the headline."), (3, "coding", GOOD)]),
    )
    .unwrap();
    assert!(out.warnings.is_empty());
    assert!(out.script.contains("add(\"#layer_2\", {translateX: [-140, 0]}, duration=600, easing=\"easeOutCubic\", offset=\"-=200\");"));
    assert_eq!(out.groups.iter().map(|g| g.label.as_str()).collect::<Vec<_>>(), ["logo", "headline"]);
    assert_eq!(out.plan_text, "Pop the logo, slide the headline.");

    let user: Vec<_> = out.transcript.iter().filter(|m| m.role == Role::User).collect();
    assert_eq!(user.len(), 3);
    assert!(matches!(&user[0].parts()[0], ChatPart::Image { name, .. } if name == "image 1"));
    let first = user[0].text_content();
    assert!(first.starts_with("Please divide all layers into several animation groups"));
    assert!(first.contains("```<!DOCTYPE html>") && first.contains("id=\"layer_2\""));
    let second = user[1].text_content();
    assert!(second.contains("```logo pops```"));
    assert!(second.contains("\"content\": \"SALE\""));
    let third = user[2].text_content();
    assert!(third.contains("- Use a single `anime.timeline` and add animations using `.add`"));
    assert!(third.contains("timeline(loop=false, autoplay=true)"));
}

#[test]
fn empty_direction_fills_placeholder_with_nothing() {
    let d = doc();
    let out = lmm_pipeline(&d, None, &clients(&[(1, "grouping", GROUPS), (2, "planning", "plan"), (3, "coding", GOOD)])).unwrap();
    assert!(out.transcript[2].text_content().contains("if empty, create animation idea.\n``````\n"));
}

#[test]
fn rejected_script_gets_one_repair_turn() {
    let d = doc();
    let out = lmm_pipeline(
        &d,
        None,
        &clients(&[(1, "grouping", GROUPS), (2, "planning", "plan"), (3, "coding", DUPLICATE), (4, "repair", GOOD)]),
    )
    .unwrap();
    assert!(out.warnings.is_empty());
    let repair = out.transcript.iter().filter(|m| m.role == Role::User).nth(3).unwrap();
    assert_eq!(repair.template.as_deref(), Some("repair"));
    assert!(repair.text_content().contains("already animated by entry 0"));
    assert!(out.script.contains("easeOutBack"));
}

#[test]
fn second_rejection_falls_back_to_rules() {
    let d = doc();
    let out = lmm_pipeline(
        &d,
        None,
        &clients(&[(1, "grouping", GROUPS), (2, "planning", "plan"), (3, "coding", DUPLICATE), (4, "repair", "no code, sorry")]),
    )
    .unwrap();
    assert_eq!(out.script, rule_pipeline(&d, None).script);
    assert!(matches!(&out.warnings[..], [PlannerWarning::FallbackUsed { reason }] if reason.contains("fenced")));
}

#[test]
fn grouping_failures_are_typed() {
    let d = doc();
    let err = lmm_pipeline(&d, None, &clients(&[(1, "grouping", "Group them by color.")])).unwrap_err();
    assert!(matches!(err, PlannerError::MalformedGroups(_)));
    let partial = "[{\"group\": \"a\", \"layers\": [\"layer_1\"]}]";
    let err = lmm_pipeline(&d, None, &clients(&[(1, "grouping", partial)])).unwrap_err();
    assert!(matches!(err, PlannerError::NonPartition(_)));
}

#[test]
fn missing_transcript_turn_is_a_client_error() {
    let d = doc();
    let err = lmm_pipeline(&d, None, &clients(&[(1, "grouping", GROUPS)])).unwrap_err();
    match err {
        PlannerError::Client(e) => assert!(matches!(e.kind, ClientErrorKind::UnknownTurn { turn: 2, .. })),
        other => panic!("{other:?}"),
    }
}
