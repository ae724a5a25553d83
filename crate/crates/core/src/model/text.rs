use crate::anonymize::PLACEHOLDERS;

/// Lowercased word tokens split on whitespace and punctuation. Scrubber
/// placeholders (`<EMAIL>`, ...) come through intact.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == '<' {
            if let Some(p) = PLACEHOLDERS.iter().find(|p| rest.starts_with(**p)) {
                flush(&mut current, &mut out);
                out.push(p.to_string());
                rest = &rest[p.len()..];
                continue;
            }
        }
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else {
            flush(&mut current, &mut out);
        }
        rest = &rest[c.len_utf8()..];
    }
    flush(&mut current, &mut out);
    out
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    if !current.is_empty() {
        out.push(std::mem::take(current));
    }
}
