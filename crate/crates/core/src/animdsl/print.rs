use std::fmt::Write as _;

use super::ast::{Easing, Offset, Script};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Canonical text: one entry per line, tracks in property order, then
/// `duration`, `delay`, `easing`, `offset`, with defaults left out.
pub fn print(script: &Script) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "timeline(loop={}, autoplay={}) {{", script.params.loop_, script.params.autoplay);
    for e in &script.entries {
        let tracks: Vec<String> = e.tracks.iter().map(|(p, t)| format!("{p}: [{}, {}]", t.from, t.to)).collect();
        let _ = write!(out, "  add({}, {{{}}}, duration={}", quote(&e.target), tracks.join(", "), e.duration);
        if e.delay != 0.0 {
            let _ = write!(out, ", delay={}", e.delay);
        }
        if e.easing != Easing::Linear {
            let _ = write!(out, ", easing=\"{}\"", e.easing);
        }
        if e.offset != Offset::AfterPrevious {
            let _ = write!(out, ", offset=\"{}\"", e.offset);
        }
        out.push_str(");\n");
    }
    out.push_str("}\n");
    out
}
