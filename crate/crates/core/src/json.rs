//! Canonical JSON emission: pretty-printed, fields in declaration order,
//! stable across runs and worker counts so reports can be golden-file
//! tested.

use serde::Serialize;

/// Serializes any report, witness, or domain value into the canonical JSON
/// form (two-space indentation, trailing newline).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}
