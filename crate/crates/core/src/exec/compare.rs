//! Output normalization and comparison.

/// Canonical form of program output: trailing whitespace stripped from
/// every line, then trailing empty lines dropped. Idempotent, so stored
/// expectations can be normalized again at comparison time.
pub fn normalize_output(text: &str) -> String {
    let joined = text.split('\n').map(|l| l.trim_end()).collect::<Vec<_>>().join("\n");
    joined.trim_end_matches('\n').to_string()
}

/// Equality after [`normalize_output`] on both sides; byte-exact otherwise.
pub fn compare_output(observed: &str, expected: &str) -> bool {
    normalize_output(observed) == normalize_output(expected)
}
