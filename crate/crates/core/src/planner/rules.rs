use std::collections::HashMap;

use super::{AnimationPlan, Effect, GroupPlan, LayerGroup, SlideFrom};
use crate::animdsl::{print, Easing, Entry, Offset, Property, Script};
use crate::document::{LayerImage, LayerKind, LayeredDocument};
use crate::raster::Rect;

pub const TOTAL_CAP_MS: u64 = 6000;
const STAGGER_MS: u64 = 120;
const GROUP_GAP_MS: u64 = 150;
const JOIN_IOU: f64 = 0.1;

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            i = std::mem::replace(&mut self.0[i], r);
        }
        r
    }

    fn join(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn stacked(a: Rect, b: Rect) -> bool {
    let gap = a.y.max(b.y) as i64 - a.bottom().min(b.bottom());
    let overlap_x = (a.x as i64) < b.right() && (b.x as i64) < a.right();
    overlap_x && (gap as f64) < 0.5 * a.h.min(b.h) as f64
}

fn union_bbox<'a>(layers: impl IntoIterator<Item = &'a LayerImage>) -> Rect {
    layers.into_iter().map(|l| l.bbox).reduce(|a, b| a.union(&b)).expect("non-empty group")
}

/// Rule-based grouping. Text layers stacked line over line form one group;
/// a non-text layer joins the text group it overlaps most when IoU ≥ 0.1,
/// otherwise it groups with the other non-text layers of its kind.
pub fn group_layers(doc: &LayeredDocument) -> Vec<LayerGroup> {
    let layers = doc.layers();
    let text: Vec<usize> = (0..layers.len()).filter(|&i| layers[i].kind.is_text()).collect();
    let mut uf = UnionFind((0..layers.len()).collect());
    for (n, &a) in text.iter().enumerate() {
        for &b in &text[n + 1..] {
            if stacked(layers[a].bbox, layers[b].bbox) {
                uf.join(a, b);
            }
        }
    }
    // Groups as member index lists keyed by first member, in creation order.
    let mut groups: Vec<(Vec<usize>, String)> = Vec::new();
    let mut root_slot: HashMap<usize, usize> = HashMap::new();
    for &i in &text {
        let r = uf.find(i);
        let slot = *root_slot.entry(r).or_insert_with(|| {
            groups.push((Vec::new(), "text".to_owned()));
            groups.len() - 1
        });
        groups[slot].0.push(i);
    }
    let text_unions: Vec<Rect> = groups.iter().map(|(m, _)| union_bbox(m.iter().map(|&i| &layers[i]))).collect();
    let mut kind_slot: HashMap<LayerKind, usize> = HashMap::new();
    for (i, layer) in layers.iter().enumerate() {
        if layer.kind == LayerKind::Background || layer.kind.is_text() {
            continue;
        }
        let best = text_unions.iter().enumerate().map(|(g, u)| (g, layer.bbox.iou(u))).fold(
            None,
            |best: Option<(usize, f64)>, (g, iou)| match best {
                Some((_, b)) if b >= iou => best,
                _ => Some((g, iou)),
            },
        );
        match best {
            Some((g, iou)) if iou >= JOIN_IOU => groups[g].0.push(i),
            _ => {
                let slot = *kind_slot.entry(layer.kind).or_insert_with(|| {
                    groups.push((Vec::new(), layer.kind.as_str().to_owned()));
                    groups.len() - 1
                });
                groups[slot].0.push(i);
            }
        }
    }
    let mut keyed: Vec<(Rect, usize, Vec<usize>, String)> = groups
        .into_iter()
        .map(|(mut members, mut label)| {
            members.sort_by_key(|&i| (layers[i].bbox.y, layers[i].bbox.x, i));
            if members.iter().any(|&i| layers[i].kind.is_text()) && members.iter().any(|&i| !layers[i].kind.is_text()) {
                label = "text+graphics".to_owned();
            }
            let first = *members.iter().min().expect("non-empty");
            (union_bbox(members.iter().map(|&i| &layers[i])), first, members, label)
        })
        .collect();
    keyed.sort_by_key(|(u, first, _, _)| (u.y, u.x, *first));
    keyed
        .into_iter()
        .enumerate()
        .map(|(n, (_, _, members, label))| LayerGroup {
            id: format!("group_{}", n + 1),
            layers: members.into_iter().map(|i| layers[i].id.clone()).collect(),
            label,
        })
        .collect()
}

fn layout_effect(doc: &LayeredDocument, members: &[&LayerImage]) -> Effect {
    let canvas = doc.canvas();
    let (cx, cy) = union_bbox(members.iter().copied()).center();
    let (w, h) = (canvas.width as f64, canvas.height as f64);
    if cx < w / 3.0 {
        Effect::Slide(SlideFrom::Left)
    } else if cx > 2.0 * w / 3.0 {
        Effect::Slide(SlideFrom::Right)
    } else if cy < h / 3.0 {
        Effect::Slide(SlideFrom::Top)
    } else if cy > 2.0 * h / 3.0 {
        Effect::Slide(SlideFrom::Bottom)
    } else if members.iter().any(|l| l.kind.is_text()) {
        Effect::Fade
    } else {
        Effect::Pop
    }
}

const PHRASES: &[(&str, Effect)] = &[
    ("appears from below", Effect::Slide(SlideFrom::Bottom)),
    ("from below", Effect::Slide(SlideFrom::Bottom)),
    ("from the bottom", Effect::Slide(SlideFrom::Bottom)),
    ("from above", Effect::Slide(SlideFrom::Top)),
    ("from the top", Effect::Slide(SlideFrom::Top)),
    ("from the left", Effect::Slide(SlideFrom::Left)),
    ("from the right", Effect::Slide(SlideFrom::Right)),
    ("fade", Effect::Fade),
    ("pop", Effect::Pop),
    ("rotate", Effect::Rotate),
    ("spin", Effect::Rotate),
];

const TEXT_WORDS: &[&str] = &["text", "texts", "title", "titles", "heading", "headline", "word", "words", "caption", "copy"];
const GRAPHIC_WORDS: &[&str] = &[
    "image",
    "images",
    "logo",
    "logos",
    "shape",
    "shapes",
    "object",
    "objects",
    "picture",
    "illustration",
    "icon",
    "icons",
    "graphic",
    "graphics",
];

fn words(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric() && c != '_').filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Layers a clause talks about. Empty when it names none in particular.
fn referenced(clause: &str, doc: &LayeredDocument) -> Vec<usize> {
    let clause_words = words(clause);
    let has = |w: &str| clause_words.iter().any(|c| c == w);
    let mut hits = Vec::new();
    for (i, layer) in doc.layers().iter().enumerate().skip(1) {
        let own = words(layer.caption()).iter().any(|w| w.len() > 1 && has(w)) || has(&layer.id.to_lowercase());
        let category = if layer.kind.is_text() { TEXT_WORDS.iter().any(|w| has(w)) } else { GRAPHIC_WORDS.iter().any(|w| has(w)) };
        if own || category {
            hits.push(i);
        }
    }
    hits
}

/// Matches direction phrases to layers. Returns per-layer effects plus
/// notes describing each match. Earlier clauses win.
fn match_direction(direction: &str, doc: &LayeredDocument) -> (HashMap<usize, (Effect, String)>, Vec<String>) {
    let mut assigned: HashMap<usize, (Effect, String)> = HashMap::new();
    let mut notes = Vec::new();
    let lower = direction.to_lowercase();
    for clause in lower.split(['.', ';', ',', '\n']).flat_map(|c| c.split(" then ")).flat_map(|c| c.split(" and ")) {
        let Some(&(phrase, effect)) = PHRASES.iter().find(|(p, _)| clause.contains(p)) else {
            continue;
        };
        let mut targets = referenced(clause, doc);
        if targets.is_empty() {
            targets = (1..doc.layers().len()).collect();
        }
        let fresh: Vec<usize> = targets.into_iter().filter(|i| !assigned.contains_key(i)).collect();
        if fresh.is_empty() {
            continue;
        }
        let ids: Vec<&str> = fresh.iter().map(|&i| doc.layers()[i].id.as_str()).collect();
        notes.push(format!("matched \"{phrase}\" -> {effect} for {}", ids.join(", ")));
        for i in fresh {
            assigned.insert(i, (effect, phrase.to_owned()));
        }
    }
    (assigned, notes)
}

/// Rule-based plan. Effects come from the direction where a phrase matches,
/// otherwise from the group's position on the canvas.
pub fn plan(doc: &LayeredDocument, groups: &[LayerGroup], direction: Option<&str>) -> AnimationPlan {
    let direction = direction.map(str::trim).filter(|d| !d.is_empty());
    let (assigned, mut notes) = match direction {
        Some(d) => match_direction(d, doc),
        None => (HashMap::new(), Vec::new()),
    };
    if direction.is_some() && assigned.is_empty() {
        notes.push("direction matched no known phrase; using layout rules".to_owned());
    }
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let members: Vec<&LayerImage> = g.layers.iter().filter_map(|id| doc.layer(id)).collect();
        let indices: Vec<usize> = g.layers.iter().filter_map(|id| doc.index_of(id)).collect();
        let (effect, note) = match indices.iter().find_map(|i| assigned.get(i)) {
            Some((effect, phrase)) => (*effect, format!("direction \"{phrase}\"")),
            None => (layout_effect(doc, &members), "layout".to_owned()),
        };
        out.push(GroupPlan { group: g.id.clone(), layers: g.layers.clone(), effect, stagger_ms: STAGGER_MS, note });
    }
    let total = unscaled_total(&out);
    let time_scale = if total > TOTAL_CAP_MS { TOTAL_CAP_MS as f64 / total as f64 } else { 1.0 };
    if time_scale < 1.0 {
        notes.push(format!("timing scaled by {time_scale:.4} to fit {TOTAL_CAP_MS} ms"));
    }
    AnimationPlan { groups: out, time_scale, notes }
}

fn unscaled_total(groups: &[GroupPlan]) -> u64 {
    let mut end = 0;
    for (n, g) in groups.iter().enumerate() {
        let start = if n == 0 { 0 } else { end + GROUP_GAP_MS };
        end = start + g.stagger_ms * (g.layers.len().max(1) as u64 - 1) + g.effect.duration_ms();
    }
    end
}

fn scaled(ms: u64, factor: f64) -> u64 {
    if factor >= 1.0 {
        ms
    } else {
        (ms as f64 * factor).floor() as u64
    }
}

fn entry_for(effect: Effect, layer: &LayerImage, doc: &LayeredDocument, duration: f64) -> Entry {
    let canvas = doc.canvas();
    let b = layer.bbox;
    let target = format!("#{}", layer.id);
    let e = Entry::new(target, duration);
    match effect {
        Effect::Slide(SlideFrom::Left) => e.track(Property::TranslateX, -(b.x as f64 + b.w as f64), 0.0),
        Effect::Slide(SlideFrom::Right) => e.track(Property::TranslateX, canvas.width as f64 - b.x as f64, 0.0),
        Effect::Slide(SlideFrom::Top) => e.track(Property::TranslateY, -(b.y as f64 + b.h as f64), 0.0),
        Effect::Slide(SlideFrom::Bottom) => e.track(Property::TranslateY, canvas.height as f64 - b.y as f64, 0.0),
        Effect::Fade => e.track(Property::Opacity, 0.0, 1.0),
        Effect::Pop => e.track(Property::Scale, 0.3, 1.0).track(Property::Opacity, 0.0, 1.0),
        Effect::Rotate => e.track(Property::Rotate, -180.0, 0.0).track(Property::Opacity, 0.0, 1.0),
    }
    .easing(match effect {
        Effect::Slide(_) | Effect::Rotate => Easing::EaseOutCubic,
        Effect::Fade => Easing::Linear,
        Effect::Pop => Easing::EaseOutBack,
    })
}

/// Script for a plan: the k-th member of a group starts at the group start
/// plus k staggers; the next group starts one gap after the previous ends.
pub fn codegen_script(plan: &AnimationPlan, doc: &LayeredDocument) -> Script {
    let f = plan.time_scale;
    let gap = scaled(GROUP_GAP_MS, f);
    let mut entries = Vec::new();
    let mut end: Option<u64> = None;
    for g in &plan.groups {
        let start = end.map_or(0, |e| e + gap);
        let duration = scaled(g.effect.duration_ms(), f).max(1);
        let stagger = scaled(g.stagger_ms, f);
        let mut group_end = start;
        for (k, layer) in g.layers.iter().filter_map(|id| doc.layer(id)).enumerate() {
            let at = start + k as u64 * stagger;
            entries.push(entry_for(g.effect, layer, doc, duration as f64).offset(Offset::Absolute(at)));
            group_end = at + duration;
        }
        end = Some(group_end);
    }
    Script { entries, ..Default::default() }
}

pub fn codegen(plan: &AnimationPlan, doc: &LayeredDocument) -> String {
    print(&codegen_script(plan, doc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome {
    pub groups: Vec<LayerGroup>,
    pub plan: AnimationPlan,
    pub script: String,
}

pub fn rule_pipeline(doc: &LayeredDocument, direction: Option<&str>) -> RuleOutcome {
    let groups = group_layers(doc);
    let plan = plan(doc, &groups, direction);
    let script = codegen(&plan, doc);
    RuleOutcome { groups, plan, script }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::animdsl::{parse, validate_complete};
    use crate::timeline::compile;
    use image::{Rgba, RgbaImage};

    fn doc(w: u32, h: u32, layers: &[(LayerKind, Rect, &str)]) -> LayeredDocument {
        let mut d =
            LayeredDocument::new(w as i64, h as i64, LayerImage::background(RgbaImage::from_pixel(w, h, Rgba([9, 9, 9, 255])))).unwrap();
        for (kind, bbox, caption) in layers {
            d.add_layer(LayerImage::new("", *kind, *bbox, RgbaImage::from_pixel(bbox.w, bbox.h, Rgba([200, 0, 0, 255])), caption)).unwrap();
        }
        d
    }

    #[test]
    fn stacked_words_share_a_group() {
        let d = doc(
            400,
            300,
            &[(LayerKind::Text, Rect::new(100, 100, 120, 30), "Big"), (LayerKind::Text, Rect::new(110, 135, 90, 30), "Sale")],
        );
        let g = group_layers(&d);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].layers, ["layer_1", "layer_2"]);
    }

    #[test]
    fn background_only_has_no_groups() {
        let d = doc(40, 30, &[]);
        assert!(group_layers(&d).is_empty());
        let p = plan(&d, &[], None);
        assert!(p.groups.is_empty());
        assert_eq!(codegen(&p, &d), "timeline(loop=false, autoplay=true) {\n}\n");
    }

    #[test]
    fn distant_illustration_is_its_own_group_ordered_by_top() {
        let d = doc(
            400,
            300,
            &[(LayerKind::Rectangular, Rect::new(20, 200, 60, 60), ""), (LayerKind::Text, Rect::new(150, 20, 100, 30), "Hi")],
        );
        let g = group_layers(&d);
        assert_eq!(g.iter().map(|g| g.layers.clone()).collect::<Vec<_>>(), [vec!["layer_2".to_owned()], vec!["layer_1".to_owned()]]);
        assert_eq!(g[1].label, "rectangular");
    }

    #[test]
    fn overlapping_graphic_joins_text_group() {
        let d = doc(
            400,
            300,
            &[(LayerKind::Rectangular, Rect::new(90, 90, 140, 50), ""), (LayerKind::Text, Rect::new(100, 100, 120, 30), "Hi")],
        );
        let g = group_layers(&d);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].label, "text+graphics");
    }

    #[test]
    fn centered_text_fades() {
        let d = doc(300, 300, &[(LayerKind::Text, Rect::new(120, 140, 60, 20), "Hi")]);
        let p = plan(&d, &group_layers(&d), None);
        assert_eq!(p.groups[0].effect, Effect::Fade);
        let d = doc(300, 300, &[(LayerKind::Rectangular, Rect::new(120, 140, 60, 20), "")]);
        assert_eq!(plan(&d, &group_layers(&d), None).groups[0].effect, Effect::Pop);
    }

    #[test]
    fn direction_keyword_selects_slide() {
        let d = doc(300, 300, &[(LayerKind::Text, Rect::new(120, 140, 60, 20), "Hi")]);
        let p = plan(&d, &group_layers(&d), Some("Text slides in from the LEFT"));
        assert_eq!(p.groups[0].effect, Effect::Slide(SlideFrom::Left));
        assert_eq!(p.notes.len(), 1);
        let p = plan(&d, &group_layers(&d), Some("make it sparkle"));
        assert_eq!(p.groups[0].effect, Effect::Fade);
        assert!(p.notes[0].contains("matched no"));
    }

    #[test]
    fn slide_left_offstage_distance() {
        let d = doc(800, 600, &[(LayerKind::Text, Rect::new(100, 50, 200, 40), "Hi")]);
        let p = AnimationPlan {
            groups: vec![GroupPlan {
                group: "g".into(),
                layers: vec!["layer_1".into()],
                effect: Effect::Slide(SlideFrom::Left),
                stagger_ms: 120,
                note: String::new(),
            }],
            time_scale: 1.0,
            notes: vec![],
        };
        let s = codegen_script(&p, &d);
        assert_eq!(s.entries[0].tracks[&Property::TranslateX].from, -300.0);
        assert_eq!(s.entries[0].duration, 600.0);
        assert_eq!(s.entries[0].easing, Easing::EaseOutCubic);
    }

    #[test]
    fn many_layers_fit_the_cap() {
        let specs: Vec<(LayerKind, Rect, &str)> =
            (0..64).map(|i| (LayerKind::Text, Rect::new((i % 8) * 100, (i / 8) * 75, 40, 10), "w")).collect();
        let d = doc(800, 600, &specs);
        let out = rule_pipeline(&d, Some("everything rotates"));
        let checked = validate_complete(&parse(&out.script).unwrap(), &d).unwrap();
        assert!(compile(&checked).total_duration <= TOTAL_CAP_MS as f64);
        assert!(out.plan.time_scale < 1.0);
    }
}
