//! Helpers for emitting deterministic JSON by hand.
//!
//! Output floats carry 17 significant digits, enough to reproduce any `f64`
//! exactly, so serialized results are byte-stable across runs and platforms.

/// Format a float with 17 significant digits (`null` when non-finite, which
/// JSON cannot represent).
pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// Escape a string for inclusion inside JSON quotes.
pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}
