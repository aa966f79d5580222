//! Record tokenization for artifact counting.
//!
//! A record's [`TokenSet`] is the set of normalized tokens appearing in its
//! premise or hypothesis. Normalization lowercases, removes punctuation and drops
//! stopwords. Hyphenated and slash-joined words split into their parts.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::corpus::Record;
use crate::error::{Error, Result};

/// The classic 127-word English stopword list.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your", "yours",
    "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself",
    "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what", "which",
    "who", "whom", "this", "that", "these", "those", "am", "is", "are", "was", "were", "be",
    "been", "being", "have", "has", "had", "having", "do", "does", "did", "doing", "a", "an",
    "the", "and", "but", "if", "or", "because", "as", "until", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before",
    "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why",
    "how", "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
    "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will",
    "just", "don", "should", "now",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenizerMode {
    /// Whitespace split with punctuation stripping.
    Whitespace,
    /// Whitespace mode followed by greedy longest-prefix matching against a stem
    /// dictionary: a token becomes the longest dictionary entry it starts with,
    /// or stays unchanged when none matches (so `catch` maps to `cat` when the
    /// dictionary holds `cat` but not `catch`).
    PrefixStem { stems: Arc<Vec<String>> },
}

impl TokenizerMode {
    pub fn name(&self) -> &'static str {
        match self {
            TokenizerMode::Whitespace => "whitespace",
            TokenizerMode::PrefixStem { .. } => "prefix_stem",
        }
    }
}

/// Mode name as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerKind {
    Whitespace,
    PrefixStem,
}

impl FromStr for TokenizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerKind::Whitespace),
            "prefix_stem" | "prefix-stem" => Ok(TokenizerKind::PrefixStem),
            other => Err(format!("unknown tokenizer mode {other:?} (expected whitespace or prefix_stem)")),
        }
    }
}

/// Tokenizer settings. Lowercasing and punctuation stripping are always on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerConfig {
    mode: TokenizerMode,
    stopwords: Arc<HashSet<String>>,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Whitespace,
            stopwords: Arc::new(DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect()),
        }
    }
}

impl TokenizerConfig {
    /// Builds a config from explicit stopwords. Entries are normalized the same
    /// way tokens are; entries that normalize to nothing are dropped.
    pub fn new(mode: TokenizerMode, stopwords: impl IntoIterator<Item = String>) -> Self {
        let stopwords = stopwords
            .into_iter()
            .filter_map(|w| clean(&w))
            .collect::<HashSet<_>>();
        let mode = match mode {
            TokenizerMode::PrefixStem { stems } => {
                let mut cleaned: Vec<String> = stems
                    .iter()
                    .filter_map(|s| clean(s))
                    .filter(|s| !stopwords.contains(s))
                    .collect();
                cleaned.sort();
                cleaned.dedup();
                TokenizerMode::PrefixStem {
                    stems: Arc::new(cleaned),
                }
            }
            m => m,
        };
        TokenizerConfig {
            mode,
            stopwords: Arc::new(stopwords),
        }
    }

    pub fn with_mode(self, mode: TokenizerMode) -> Self {
        let stopwords: Vec<String> = self.stopwords.iter().cloned().collect();
        TokenizerConfig::new(mode, stopwords)
    }

    pub fn mode(&self) -> &TokenizerMode {
        &self.mode
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }
}

/// Reads a word list: one entry per line, `#` starts a comment.
pub fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect())
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

fn clean(raw: &str) -> Option<String> {
    let token: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|c| !is_punct(*c))
        .collect();
    (!token.is_empty()).then_some(token)
}

fn longest_stem<'a>(stems: &'a [String], token: &str) -> Option<&'a str> {
    // Candidate stems are prefixes of `token`; check each prefix length from longest.
    let boundaries: Vec<usize> = token
        .char_indices()
        .map(|(i, _)| i)
        .skip(1)
        .chain(std::iter::once(token.len()))
        .collect();
    boundaries.iter().rev().find_map(|&end| {
        let prefix = &token[..end];
        stems
            .binary_search_by(|s| s.as_str().cmp(prefix))
            .ok()
            .map(|i| stems[i].as_str())
    })
}

/// Normalizes one raw word: lowercase, drop punctuation, apply stemming in
/// `prefix_stem` mode, and reject empty results and stopwords.
pub fn normalize_token(raw: &str, config: &TokenizerConfig) -> Option<String> {
    let token = clean(raw)?;
    let token = match &config.mode {
        TokenizerMode::Whitespace => token,
        TokenizerMode::PrefixStem { stems } => match longest_stem(stems, &token) {
            Some(stem) => stem.to_string(),
            None => token,
        },
    };
    (!config.is_stopword(&token)).then_some(token)
}

fn split_words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c.is_whitespace() || matches!(c, '-' | '\u{2010}'..='\u{2015}' | '/'))
        .filter(|w| !w.is_empty())
}

/// Sorted, duplicate-free set of a record's tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSet(Vec<String>);

impl TokenSet {
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Self {
        let mut v: Vec<String> = tokens.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        TokenSet(v)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.binary_search_by(|t| t.as_str().cmp(token)).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn tokenize_text(text: &str, config: &TokenizerConfig) -> TokenSet {
    TokenSet::from_tokens(split_words(text).filter_map(|w| normalize_token(w, config)))
}

/// Tokens of premise ∪ hypothesis, each at most once.
pub fn tokenize_record(record: &Record, config: &TokenizerConfig) -> TokenSet {
    TokenSet::from_tokens(
        split_words(&record.premise)
            .chain(split_words(&record.hypothesis))
            .filter_map(|w| normalize_token(w, config)),
    )
}
