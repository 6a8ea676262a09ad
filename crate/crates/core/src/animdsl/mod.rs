//! Animation script language.
//!
//! A script is one timeline with an ordered list of `add` entries, each
//! animating one layer:
//!
//! ```text
//! timeline(loop=false, autoplay=true) {
//!   add("#layer_1", {translateX: [-300, 0], opacity: [0, 1]}, duration=600, easing="easeOutCubic");
//!   add("#layer_2", {scale: [0.3, 1]}, duration=500, delay=100, offset="-=200");
//! }
//! ```
//!
//! Grammar:
//!
//! ```text
//! script   := "timeline" "(" params ")" "{" entry* "}"
//! params   := "loop" "=" bool "," "autoplay" "=" bool
//! entry    := "add" "(" string "," "{" track ("," track)* "}" ("," kv)* ")" ";"
//! track    := prop ":" "[" number "," number "]"
//! kv       := ("duration"|"delay") "=" number | "easing" "=" string | "offset" "=" offsetstr
//! offsetstr:= '"' (digits | ("+="|"-=") digits) '"'
//! ```
//!
//! `//` starts a comment. Translate values are pixels, rotate is degrees,
//! scale and opacity are unitless.

mod ast;
mod parse;
mod print;
mod validate;

pub use ast::{Easing, Entry, Offset, Property, Script, Sign, TimelineParams, Track};
pub use parse::{parse, ParseError, ParseErrorKind, Span};
pub use print::print;
pub use validate::{validate, validate_complete, CheckedScript, ValidationError, ValidationErrorKind, ValidationErrors};
