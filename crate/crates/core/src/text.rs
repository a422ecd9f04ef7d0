//! Whole-word term scanning.
//!
//! Text is split into lowercase words (runs of alphanumerics and `_`). A term
//! matches when its own words appear consecutively. At each position the
//! longest matching term wins and consumes its words, so `class diagram`
//! shadows `class` when both are listed.

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Returns the terms found in `text`, in order of first occurrence, without
/// duplicates. Terms that contain no word characters never match.
pub fn find_terms(text: &str, terms: &[String]) -> Vec<String> {
    let haystack = words(text);
    let mut split: Vec<(usize, Vec<String>)> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (i, words(t)))
        .filter(|(_, w)| !w.is_empty())
        .collect();
    // longest first so phrases shadow their prefixes
    split.sort_by_key(|(i, w)| (std::cmp::Reverse(w.len()), *i));

    let mut found: Vec<String> = Vec::new();
    let mut pos = 0;
    while pos < haystack.len() {
        let hit = split
            .iter()
            .find(|(_, w)| haystack[pos..].starts_with(w.as_slice()));
        match hit {
            Some((i, w)) => {
                let term = terms[*i].clone();
                if !found.contains(&term) {
                    found.push(term);
                }
                pos += w.len();
            }
            None => pos += 1,
        }
    }
    found
}

pub fn contains_any(text: &str, terms: &[String]) -> bool {
    !find_terms(text, terms).is_empty()
}
