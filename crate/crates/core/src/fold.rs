//! Case and diacritic folding for keyword matching and lexicon lookup.
//!
//! Turkish needs special care: `İ` lowercases to `i` plus a combining dot and
//! the dotless `ı` has no ASCII counterpart, so both are mapped onto `i`
//! before decomposition strips the remaining marks (`ş` → `s`, `ğ` → `g`).

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub fn fold(text: &str) -> String {
    let mut lowered = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            'İ' | 'I' | 'ı' => lowered.push('i'),
            _ => lowered.extend(c.to_lowercase()),
        }
    }
    lowered.nfd().filter(|c| !is_combining_mark(*c)).collect()
}

/// Word characters for token boundaries. `#` and `@` are word-internal so
/// that hashtags and mentions behave as single tokens.
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '#' || c == '@'
}

/// Splits folded text into tokens on non-word characters.
pub fn tokens(folded: &str) -> impl Iterator<Item = &str> {
    folded.split(|c: char| !is_word_char(c)).filter(|t| !t.is_empty())
}

/// Finds `needle` in `haystack` (both already folded) such that the match is
/// not glued to surrounding word characters.
pub fn contains_on_boundary(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = haystack[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let after_ok = haystack[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if before_ok && after_ok {
            return true;
        }
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turkish_letters_fold_to_ascii() {
        assert_eq!(fold("İş Bankası"), "is bankasi");
        assert_eq!(fold("Doğuş Holding"), "dogus holding");
        assert_eq!(fold("FERİT ŞAHENK"), "ferit sahenk");
        assert_eq!(fold("çöü"), "cou");
    }

    #[test]
    fn boundary_matching() {
        assert!(contains_on_boundary("bugun #garan cok iyi", "#garan"));
        assert!(!contains_on_boundary("bugun garan cok iyi", "#garan"));
        assert!(!contains_on_boundary("#garanti", "#garan"));
        assert!(contains_on_boundary("garanti bank.", "garanti bank"));
        assert!(!contains_on_boundary("megaranti bank", "garanti bank"));
        assert!(!contains_on_boundary("abc", ""));
    }

    #[test]
    fn boundary_search_skips_glued_first_hit() {
        assert!(contains_on_boundary("bbva2 bbva", "bbva"));
    }
}
