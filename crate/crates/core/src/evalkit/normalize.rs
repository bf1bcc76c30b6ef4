use unicode_normalization::UnicodeNormalization;

/// Canonical form used before scoring and for dedup keys: NFC, lowercase,
/// whitespace runs collapsed to one space, trimmed.
pub fn normalize_text(s: &str) -> String {
    let folded: String = s.nfc().flat_map(char::to_lowercase).collect();
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
