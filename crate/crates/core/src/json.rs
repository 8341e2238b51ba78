//! Helpers for diff-stable JSON output.

use serde::Serializer;

/// Rounds to at most six decimal places.
///
/// The quotient of an integer by `1e6` is the closest double to the decimal
/// value, so the shortest round-trip representation printed by `serde_json`
/// never carries more than six fractional digits.
pub fn round6(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let r = (v * 1e6).round() / 1e6;
    // normalise -0.0
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*v))
}

pub fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) if v.is_finite() => s.serialize_f64(round6(*v)),
        _ => s.serialize_none(),
    }
}
