//! Label enumeration for a corpus.
//!
//! Labels are stored as compact integer codes `0..C`; the [`LabelSet`] owns the
//! canonical names and maps between the two. SNLI uses
//! `entailment=0, neutral=1, contradiction=2`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer code of a label within its [`LabelSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u16);

impl Label {
    pub fn code(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of parsing a raw gold-label field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParsedLabel {
    Known(Label),
    /// No annotator consensus (SNLI `"-"`, or `-1` in some exports).
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names
            .into_iter()
            .map(|n| n.into().trim().to_lowercase())
            .collect();
        if names.len() < 2 {
            return Err(Error::InvalidLabelSet(format!(
                "need at least 2 labels, got {}",
                names.len()
            )));
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::InvalidLabelSet("too many labels".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name == "-" {
                return Err(Error::InvalidLabelSet(format!("invalid label name {name:?}")));
            }
            if name.parse::<i64>().is_ok() {
                return Err(Error::InvalidLabelSet(format!(
                    "label name {name:?} would be ambiguous with integer codes"
                )));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidLabelSet(format!("duplicate label {name:?}")));
            }
        }
        Ok(LabelSet { names })
    }

    pub fn snli() -> Self {
        LabelSet {
            names: vec!["entailment".into(), "neutral".into(), "contradiction".into()],
        }
    }

    /// Number of labels, `C`.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.names.len()).map(|i| Label(i as u16))
    }

    pub fn name(&self, label: Label) -> &str {
        &self.names[label.code()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn by_name(&self, name: &str) -> Option<Label> {
        let name = name.trim();
        self.names
            .iter()
            .position(|n| n.eq_ignore_ascii_case(name))
            .map(|i| Label(i as u16))
    }

    pub fn by_code(&self, code: i64) -> Option<Label> {
        if code >= 0 && (code as usize) < self.names.len() {
            Some(Label(code as u16))
        } else {
            None
        }
    }

    /// Parses a label given either as a canonical name or an integer code.
    /// Returns `None` when the text is neither.
    pub fn parse(&self, raw: &str) -> Option<ParsedLabel> {
        let raw = raw.trim();
        if raw == "-" || raw == "-1" || raw.is_empty() {
            return Some(ParsedLabel::Unlabeled);
        }
        if let Ok(code) = raw.parse::<i64>() {
            return self.by_code(code).map(ParsedLabel::Known);
        }
        self.by_name(raw).map(ParsedLabel::Known)
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        LabelSet::snli()
    }
}
