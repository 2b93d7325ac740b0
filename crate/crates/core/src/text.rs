use alloc::string::String;
use alloc::vec::Vec;

/// Collapses every whitespace run (including newlines) to a single space and trims.
pub(crate) fn squash_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Splits into lines keeping terminators, so that `concat(lines) == s`.
pub(crate) fn split_lines_inclusive(s: &str) -> Vec<&str> {
    s.split_inclusive('\n').collect()
}

/// Removes `width` leading columns of spaces/tabs from every line after the first.
pub(crate) fn dedent_tail(s: &str, width: usize) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, line) in split_lines_inclusive(s).into_iter().enumerate() {
        if i == 0 {
            out.push_str(line);
            continue;
        }
        let strip = line
            .bytes()
            .take(width)
            .take_while(|b| *b == b' ' || *b == b'\t')
            .count();
        out.push_str(&line[strip..]);
    }
    out
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squash() {
        assert_eq!(squash_whitespace("  a  <\n\t b "), "a < b");
        assert_eq!(squash_whitespace(""), "");
    }

    #[test]
    fn dedent_keeps_first_line() {
        assert_eq!(dedent_tail("@d\n    def f():", 4), "@d\ndef f():");
        assert_eq!(dedent_tail("def f(a,\n        b):", 4), "def f(a,\n    b):");
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("_PATH"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier(""));
    }
}
