//! Absolute animation schedule and property evaluation.
//!
//! Offsets follow a cursor that starts at 0 and moves to
//! `start + delay + duration` after each entry. `AfterPrevious` starts at the
//! cursor, `Absolute(a)` at `a`, `Relative(±d)` at `cursor ± d` clamped to 0.
//! An entry's delay shifts when it animates but not where it starts for
//! offset purposes.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::animdsl::{CheckedScript, Easing, Offset, Property, Sign, Track};

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineItem {
    pub layer: usize,
    pub tracks: BTreeMap<Property, Track>,
    /// Offset-resolved start, ms.
    pub start: f64,
    pub delay: f64,
    pub duration: f64,
    pub easing: Easing,
}

impl TimelineItem {
    pub fn effective_start(&self) -> f64 {
        self.start + self.delay
    }

    pub fn end(&self) -> f64 {
        self.effective_start() + self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub items: Vec<TimelineItem>,
    pub layer_count: usize,
    pub total_duration: f64,
}

/// Animated values for one layer. The default is the rest pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyState {
    pub tx: f64,
    pub ty: f64,
    pub scale: f64,
    pub rotate: f64,
    pub opacity: f64,
}

impl Default for PropertyState {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl PropertyState {
    pub const IDENTITY: PropertyState = PropertyState { tx: 0.0, ty: 0.0, scale: 1.0, rotate: 0.0, opacity: 1.0 };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    fn set(&mut self, prop: Property, v: f64) {
        match prop {
            Property::TranslateX => self.tx = v,
            Property::TranslateY => self.ty = v,
            Property::Scale => self.scale = v,
            Property::Rotate => self.rotate = v,
            Property::Opacity => self.opacity = v.clamp(0.0, 1.0),
        }
    }
}

/// Eased fraction for normalized time `u`; `u` is clamped to `[0, 1]`.
pub fn ease(easing: Easing, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    match easing {
        Easing::Linear => u,
        Easing::EaseInQuad => u * u,
        Easing::EaseOutQuad => 1.0 - (1.0 - u) * (1.0 - u),
        Easing::EaseInOutQuad => {
            if u < 0.5 {
                2.0 * u * u
            } else {
                1.0 - (-2.0 * u + 2.0).powi(2) / 2.0
            }
        }
        Easing::EaseInCubic => u * u * u,
        Easing::EaseOutCubic => 1.0 - (1.0 - u).powi(3),
        Easing::EaseInOutCubic => {
            if u < 0.5 {
                4.0 * u * u * u
            } else {
                1.0 - (-2.0 * u + 2.0).powi(3) / 2.0
            }
        }
        Easing::EaseOutBack => {
            const C1: f64 = 1.70158;
            const C3: f64 = C1 + 1.0;
            1.0 + C3 * (u - 1.0).powi(3) + C1 * (u - 1.0).powi(2)
        }
        Easing::EaseOutElastic => {
            if u == 0.0 || u == 1.0 {
                u
            } else {
                2f64.powf(-10.0 * u) * ((10.0 * u - 0.75) * (2.0 * PI / 3.0)).sin() + 1.0
            }
        }
    }
}

pub fn compile(checked: &CheckedScript) -> Timeline {
    let mut cursor = 0.0f64;
    let mut items = Vec::with_capacity(checked.script.entries.len());
    for (entry, &layer) in checked.script.entries.iter().zip(&checked.layer_indices) {
        let start = match entry.offset {
            Offset::AfterPrevious => cursor,
            Offset::Absolute(ms) => ms as f64,
            Offset::Relative(Sign::Plus, ms) => cursor + ms as f64,
            Offset::Relative(Sign::Minus, ms) => (cursor - ms as f64).max(0.0),
        };
        let item =
            TimelineItem { layer, tracks: entry.tracks.clone(), start, delay: entry.delay, duration: entry.duration, easing: entry.easing };
        cursor = item.end();
        items.push(item);
    }
    let total_duration = items.iter().map(TimelineItem::end).fold(0.0, f64::max);
    Timeline { items, layer_count: checked.layer_count, total_duration }
}

impl Timeline {
    /// Property state of every layer at `t` ms, indexed by layer.
    pub fn sample(&self, t: f64) -> Vec<PropertyState> {
        let mut states = vec![PropertyState::IDENTITY; self.layer_count];
        for item in &self.items {
            let state = &mut states[item.layer];
            let begin = item.effective_start();
            if t < begin {
                for (p, tr) in &item.tracks {
                    state.set(*p, tr.from);
                }
            } else if t >= item.end() {
                for (p, tr) in &item.tracks {
                    state.set(*p, tr.to);
                }
            } else {
                let v = ease(item.easing, (t - begin) / item.duration);
                for (p, tr) in &item.tracks {
                    state.set(*p, tr.from + (tr.to - tr.from) * v);
                }
            }
        }
        states
    }

    pub fn frame_times(&self, fps: f64) -> Vec<f64> {
        frame_times(self.total_duration, fps)
    }
}

/// Sample times at `fps`: `k·1000/fps` for every such time up to
/// `total_ms`, plus a terminal sample at `total_ms` when the grid misses it.
pub fn frame_times(total_ms: f64, fps: f64) -> Vec<f64> {
    assert!(fps > 0.0 && fps.is_finite(), "fps must be positive");
    let total_ms = total_ms.max(0.0);
    let last = (total_ms * fps / 1000.0).floor() as u64;
    let mut times: Vec<f64> = (0..=last).map(|k| k as f64 * 1000.0 / fps).filter(|t| *t <= total_ms).collect();
    if times.is_empty() {
        times.push(0.0);
    }
    if *times.last().expect("non-empty") < total_ms {
        times.push(total_ms);
    }
    times
}
