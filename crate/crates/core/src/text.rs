//! Utterance normalization and contiguous phrase matching.
//!
//! Every matcher in the crate works on the same token stream: lowercase
//! words with punctuation stripped and in-word apostrophes kept, so that
//! spoken-form contractions like `i'm` and `don't` survive as single tokens.
//! Phrases are literal token sequences; there is no stemming.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// A raw utterance together with its normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedUtterance {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl NormalizedUtterance {
    pub fn new(raw: &str) -> Self {
        Self {
            raw: raw.to_string(),
            tokens: normalize_tokens(raw),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// The normalized form as a single space-joined string.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn canonical_apostrophe(ch: char) -> char {
    match ch {
        '\u{2018}' | '\u{2019}' | '\u{02bc}' | '`' => '\'',
        other => other,
    }
}

/// Lowercases `text` and splits it into word tokens.
///
/// Normalization is idempotent: `normalize_tokens(&normalize_tokens(s).join(" "))`
/// equals `normalize_tokens(s)`.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in lowered.chars().map(canonical_apostrophe) {
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else {
            flush(&mut current, &mut tokens);
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    let trimmed = current.trim_matches('\'');
    if !trimmed.is_empty() {
        tokens.push(trimmed.to_string());
    }
    current.clear();
}

/// Normalized form of a phrase as a single string.
pub fn normalize_phrase(text: &str) -> String {
    normalize_tokens(text).join(" ")
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_sequence(haystack: &[String], needle: &[String]) -> bool {
    find_sequence(haystack, needle).is_some()
}

/// Start index of the first contiguous occurrence of `needle` in `haystack`.
pub fn find_sequence(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// One occurrence of an indexed phrase inside a token stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseMatch<'a, V> {
    pub start: usize,
    pub len: usize,
    pub value: &'a V,
}

impl<V> PhraseMatch<'_, V> {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    fn overlaps(&self, other: &Self) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

#[derive(Debug, Clone)]
struct Node<V> {
    children: HashMap<String, usize>,
    value: Option<V>,
}

impl<V> Default for Node<V> {
    fn default() -> Self {
        Self {
            children: HashMap::new(),
            value: None,
        }
    }
}

/// A token trie mapping phrases to values.
#[derive(Debug, Clone)]
pub struct PhraseIndex<V> {
    nodes: Vec<Node<V>>,
    len: usize,
}

impl<V> Default for PhraseIndex<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> PhraseIndex<V> {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node::default()],
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts a phrase (normalized before insertion). Returns `false` and
    /// keeps the existing value when the phrase is already present or
    /// normalizes to nothing.
    pub fn insert(&mut self, phrase: &str, value: V) -> bool {
        let tokens = normalize_tokens(phrase);
        self.insert_tokens(&tokens, value)
    }

    pub fn insert_tokens(&mut self, tokens: &[String], value: V) -> bool {
        if tokens.is_empty() {
            return false;
        }
        let mut node = 0;
        for token in tokens {
            node = match self.nodes[node].children.get(token) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(Node::default());
                    self.nodes[node].children.insert(token.clone(), next);
                    next
                }
            };
        }
        if self.nodes[node].value.is_some() {
            return false;
        }
        self.nodes[node].value = Some(value);
        self.len += 1;
        true
    }

    /// Exact lookup of a whole token sequence.
    pub fn get(&self, tokens: &[String]) -> Option<&V> {
        let mut node = 0;
        for token in tokens {
            node = *self.nodes[node].children.get(token)?;
        }
        self.nodes[node].value.as_ref()
    }

    /// Every occurrence of every phrase, ordered by start then length.
    pub fn find_all<'a>(&'a self, tokens: &[String]) -> Vec<PhraseMatch<'a, V>> {
        let mut out = Vec::new();
        for start in 0..tokens.len() {
            let mut node = 0;
            for (offset, token) in tokens[start..].iter().enumerate() {
                match self.nodes[node].children.get(token) {
                    Some(&next) => node = next,
                    None => break,
                }
                if let Some(value) = &self.nodes[node].value {
                    out.push(PhraseMatch {
                        start,
                        len: offset + 1,
                        value,
                    });
                }
            }
        }
        out
    }

    /// Non-overlapping matches chosen longest-first, returned in utterance
    /// order. Among equally long candidates the earlier one wins.
    pub fn longest_matches<'a>(&'a self, tokens: &[String]) -> Vec<PhraseMatch<'a, V>> {
        let mut candidates = self.find_all(tokens);
        candidates.sort_by(|a, b| b.len.cmp(&a.len).then(a.start.cmp(&b.start)));
        let mut chosen: Vec<PhraseMatch<'a, V>> = Vec::new();
        for candidate in candidates {
            if chosen.iter().all(|c| !c.overlaps(&candidate)) {
                chosen.push(candidate);
            }
        }
        chosen.sort_by_key(|m| m.start);
        chosen
    }

    /// The first longest-resolved match, if any.
    pub fn first_match<'a>(&'a self, tokens: &[String]) -> Option<PhraseMatch<'a, V>> {
        self.longest_matches(tokens).into_iter().next()
    }

    pub fn contains_any(&self, tokens: &[String]) -> bool {
        !self.find_all(tokens).is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        normalize_tokens(s)
    }

    #[test]
    fn strips_punctuation_and_keeps_contractions() {
        assert_eq!(
            toks("I'm not sure, I just say: find shelter!"),
            vec!["i'm", "not", "sure", "i", "just", "say", "find", "shelter"]
        );
        assert_eq!(toks("a t. rex"), vec!["a", "t", "rex"]);
        assert_eq!(toks("don\u{2019}t"), vec!["don't"]);
        assert_eq!(toks("'quoted'"), vec!["quoted"]);
        assert!(toks("  ,,, ").is_empty());
    }

    #[test]
    fn longest_match_wins_over_contained_phrase() {
        let mut index = PhraseIndex::new();
        index.insert("books", "books");
        index.insert("comic books", "comic_books");
        let found = index.longest_matches(&toks("i love comic books and books"));
        let values: Vec<_> = found.iter().map(|m| *m.value).collect();
        assert_eq!(values, vec!["comic_books", "books"]);
    }

    #[test]
    fn duplicate_insert_keeps_first_value() {
        let mut index = PhraseIndex::new();
        assert!(index.insert("swim", 1));
        assert!(!index.insert("Swim", 2));
        assert_eq!(index.get(&toks("swim")), Some(&1));
        assert_eq!(index.len(), 1);
    }

    #[test]
    fn sequence_search() {
        let hay = toks("i have to say brontosaurus");
        assert_eq!(find_sequence(&hay, &toks("to say")), Some(2));
        assert!(!contains_sequence(&hay, &toks("say to")));
        assert!(!contains_sequence(&hay, &[]));
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_tokens(&s);
            let twice = normalize_tokens(&once.join(" "));
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.iter().all(|t| !t.is_empty()));
        }

        #[test]
        fn surrounding_whitespace_is_irrelevant(s in "[a-z' ,.!?]{0,30}", pad in " {0,4}") {
            let padded = format!("{pad}{s}{pad}");
            prop_assert_eq!(normalize_tokens(&s), normalize_tokens(&padded));
        }
    }
}
