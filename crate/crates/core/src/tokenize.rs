//! Token counting shared by budgeting, corpus statistics and metrics.
//!
//! The default tokenizer emits maximal runs of word characters
//! (alphanumerics and `_`) and every other non-whitespace character as a
//! token of its own. Whitespace only separates. Cutting a text at any token
//! boundary therefore never changes the token sequence of either side.

use std::ops::Range;

/// Anything that can split text into tokens, reported as byte spans.
pub trait Tokenizer: Send + Sync {
    /// Stable identifier written into reports.
    fn id(&self) -> &str;

    /// Byte ranges of the tokens of `text`, in order.
    fn spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count(&self, text: &str) -> usize {
        self.spans(text).len()
    }

    fn tokens<'a>(&self, text: &'a str) -> Vec<&'a str> {
        self.spans(text).into_iter().map(|r| &text[r]).collect()
    }
}

/// Word-run plus single-punctuation tokenizer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WordPunctTokenizer;

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

impl Tokenizer for WordPunctTokenizer {
    fn id(&self) -> &str {
        "word-punct"
    }

    fn spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut word_start: Option<usize> = None;
        for (i, c) in text.char_indices() {
            if is_word_char(c) {
                if word_start.is_none() {
                    word_start = Some(i);
                }
                continue;
            }
            if let Some(s) = word_start.take() {
                spans.push(s..i);
            }
            if !c.is_whitespace() {
                spans.push(i..i + c.len_utf8());
            }
        }
        if let Some(s) = word_start {
            spans.push(s..text.len());
        }
        spans
    }
}

/// Lowercased tokens, the normalization used by every metric.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    WordPunctTokenizer
        .tokens(text)
        .into_iter()
        .map(str::to_lowercase)
        .collect()
}

/// Tokens made of word characters only, lowercased. Punctuation is dropped.
pub fn word_terms(text: &str) -> impl Iterator<Item = String> + '_ {
    WordPunctTokenizer
        .tokens(text)
        .into_iter()
        .filter(|t| t.chars().all(is_word_char))
        .map(str::to_lowercase)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_and_punctuation() {
        let t = WordPunctTokenizer;
        assert_eq!(
            t.tokens("The court's decision, (2019) TL;DR"),
            vec!["The", "court", "'", "s", "decision", ",", "(", "2019", ")", "TL", ";", "DR"]
        );
    }

    #[test]
    fn whitespace_only_has_no_tokens() {
        assert_eq!(WordPunctTokenizer.count(" \n\t "), 0);
        assert_eq!(WordPunctTokenizer.count(""), 0);
    }

    #[test]
    fn suffix_is_three_tokens() {
        assert_eq!(WordPunctTokenizer.count("\nTL;DR"), 3);
    }

    #[test]
    fn unicode_words() {
        assert_eq!(
            WordPunctTokenizer.tokens("Québec–Ontario"),
            vec!["Québec", "–", "Ontario"]
        );
    }

    #[test]
    fn normalization_lowercases() {
        assert_eq!(normalize_tokens("The Cat."), vec!["the", "cat", "."]);
        assert_eq!(word_terms("The Cat.").collect::<Vec<_>>(), vec!["the", "cat"]);
    }
}
