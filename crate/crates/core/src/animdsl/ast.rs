use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineParams {
    pub loop_: bool,
    pub autoplay: bool,
}

impl Default for TimelineParams {
    fn default() -> Self {
        Self { loop_: false, autoplay: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Script {
    pub params: TimelineParams,
    pub entries: Vec<Entry>,
}

/// Animatable properties. Declaration order is the canonical print order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    TranslateX,
    TranslateY,
    Scale,
    Rotate,
    Opacity,
}

impl Property {
    pub const ALL: [Property; 5] = [Property::TranslateX, Property::TranslateY, Property::Scale, Property::Rotate, Property::Opacity];

    pub fn name(self) -> &'static str {
        match self {
            Property::TranslateX => "translateX",
            Property::TranslateY => "translateY",
            Property::Scale => "scale",
            Property::Rotate => "rotate",
            Property::Opacity => "opacity",
        }
    }

    /// Whether `v` is an allowed endpoint value for this property.
    pub fn accepts(self, v: f64) -> bool {
        v.is_finite()
            && match self {
                Property::Opacity => (0.0..=1.0).contains(&v),
                Property::Scale => v > 0.0,
                _ => true,
            }
    }
}

impl FromStr for Property {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Property::ALL.into_iter().find(|p| p.name() == s).ok_or(())
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Track {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Easing {
    #[default]
    Linear,
    EaseInQuad,
    EaseOutQuad,
    EaseInOutQuad,
    EaseInCubic,
    EaseOutCubic,
    EaseInOutCubic,
    EaseOutBack,
    EaseOutElastic,
}

impl Easing {
    pub const ALL: [Easing; 9] = [
        Easing::Linear,
        Easing::EaseInQuad,
        Easing::EaseOutQuad,
        Easing::EaseInOutQuad,
        Easing::EaseInCubic,
        Easing::EaseOutCubic,
        Easing::EaseInOutCubic,
        Easing::EaseOutBack,
        Easing::EaseOutElastic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Easing::Linear => "linear",
            Easing::EaseInQuad => "easeInQuad",
            Easing::EaseOutQuad => "easeOutQuad",
            Easing::EaseInOutQuad => "easeInOutQuad",
            Easing::EaseInCubic => "easeInCubic",
            Easing::EaseOutCubic => "easeOutCubic",
            Easing::EaseInOutCubic => "easeInOutCubic",
            Easing::EaseOutBack => "easeOutBack",
            Easing::EaseOutElastic => "easeOutElastic",
        }
    }
}

impl FromStr for Easing {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Easing::ALL.into_iter().find(|e| e.name() == s).ok_or(())
    }
}

impl fmt::Display for Easing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Where an entry starts relative to the timeline cursor (the end of the
/// previous entry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Offset {
    #[default]
    AfterPrevious,
    Absolute(u64),
    Relative(Sign, u64),
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offset::AfterPrevious => Ok(()),
            Offset::Absolute(ms) => write!(f, "{ms}"),
            Offset::Relative(Sign::Plus, ms) => write!(f, "+={ms}"),
            Offset::Relative(Sign::Minus, ms) => write!(f, "-={ms}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// Selector as written, e.g. `#layer_3`.
    pub target: String,
    pub tracks: BTreeMap<Property, Track>,
    pub duration: f64,
    pub delay: f64,
    pub easing: Easing,
    pub offset: Offset,
}

impl Entry {
    pub fn new(target: impl Into<String>, duration: f64) -> Self {
        Self { target: target.into(), tracks: BTreeMap::new(), duration, delay: 0.0, easing: Easing::Linear, offset: Offset::AfterPrevious }
    }

    pub fn track(mut self, prop: Property, from: f64, to: f64) -> Self {
        self.tracks.insert(prop, Track { from, to });
        self
    }

    pub fn easing(mut self, easing: Easing) -> Self {
        self.easing = easing;
        self
    }

    pub fn delay(mut self, delay: f64) -> Self {
        self.delay = delay;
        self
    }

    pub fn offset(mut self, offset: Offset) -> Self {
        self.offset = offset;
        self
    }

    /// Layer id the selector names (`#layer_3` → `layer_3`).
    pub fn target_id(&self) -> Option<&str> {
        self.target.strip_prefix('#')
    }
}
