//! Tokenization for lexicon matching and embedding lookup.
//!
//! English (and any other cased or space-delimited script) is split on
//! Unicode word boundaries and lowercased. Chinese uses greedy forward
//! maximum matching against a caller-supplied vocabulary, falling back to
//! single characters.

use std::collections::HashSet;

use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::Document;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// Byte ranges into the source text. Empty for pre-tokenized input.
    pub spans: Vec<(usize, usize)>,
}

impl TokenSequence {
    /// Wraps an external segmentation; no spans are available.
    pub fn pretokenized(tokens: Vec<String>) -> Self {
        Self {
            tokens,
            spans: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

/// Word list for maximum matching.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: HashSet<String>,
    max_chars: usize,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>) {
        let word = word.into();
        let n = word.chars().count();
        if n == 0 {
            return;
        }
        self.max_chars = self.max_chars.max(n);
        self.words.insert(word);
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v = Vocabulary::new();
        for w in iter {
            v.insert(w);
        }
        v
    }
}

impl<S: Into<String>> Extend<S> for Vocabulary {
    fn extend<I: IntoIterator<Item = S>>(&mut self, iter: I) {
        for w in iter {
            self.insert(w);
        }
    }
}

/// True for language tags whose primary subtag is a Chinese language.
pub fn is_chinese(language: &str) -> bool {
    let primary = language.split(['-', '_']).next().unwrap_or("");
    matches!(primary.to_ascii_lowercase().as_str(), "zh" | "cmn" | "yue" | "wuu")
}

pub fn tokenize(text: &str, language: &str, vocabulary: Option<&Vocabulary>) -> TokenSequence {
    if is_chinese(language) {
        max_match(text, vocabulary)
    } else {
        unicode_words(text)
    }
}

/// Uses the document's own tokens when present.
pub fn tokenize_document(doc: &Document, vocabulary: Option<&Vocabulary>) -> TokenSequence {
    match &doc.tokens {
        Some(tokens) => TokenSequence::pretokenized(tokens.clone()),
        None => tokenize(&doc.text, &doc.language, vocabulary),
    }
}

fn unicode_words(text: &str) -> TokenSequence {
    let mut seq = TokenSequence::default();
    for (start, word) in text.unicode_word_indices() {
        seq.tokens.push(word.to_lowercase());
        seq.spans.push((start, start + word.len()));
    }
    seq
}

fn max_match(text: &str, vocabulary: Option<&Vocabulary>) -> TokenSequence {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let max_chars = vocabulary.map_or(1, |v| v.max_chars.max(1));

    let mut seq = TokenSequence::default();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].1.is_whitespace() {
            i += 1;
            continue;
        }
        // candidates never span whitespace
        let mut limit = i + 1;
        while limit < chars.len() && limit - i < max_chars && !chars[limit].1.is_whitespace() {
            limit += 1;
        }
        let mut end = i + 1;
        if let Some(vocab) = vocabulary {
            for cand in (i + 2..=limit).rev() {
                if vocab.contains(&text[byte_at(i)..byte_at(cand)]) {
                    end = cand;
                    break;
                }
            }
        }
        let (start, stop) = (byte_at(i), byte_at(end));
        seq.tokens.push(text[start..stop].to_string());
        seq.spans.push((start, stop));
        i = end;
    }
    seq
}
