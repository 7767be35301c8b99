//! Part-of-speech tagging and unit extraction (nouns, noun phrases, verbs).
//!
//! The pipeline is tokenizer → averaged-perceptron tagger → unit extractor.
//! A pretrained model is embedded in the crate and available through
//! [`TaggerModel::builtin`].

mod chunk;
mod perceptron;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{extract_units, units_from_tagged};
pub use perceptron::{
    read_tagged_corpus, tag, train_tagger, write_tagged_corpus, TaggedSentence, TaggerModel,
    TrainConfig, TrainReport,
};
pub use tokenize::{tokenize, tokens_from_words};

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("tagger model not loaded")]
    ModelNotLoaded,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("unknown tag {tag:?} in corpus sentence {sentence}")]
    UnknownTagInCorpus { tag: String, sentence: usize },
    #[error("malformed corpus line {line}: {detail}")]
    MalformedCorpus { line: usize, detail: String },
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Reduced universal part-of-speech tag set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Noun,
    Propn,
    Verb,
    Aux,
    Adj,
    Det,
    Adp,
    Pron,
    Num,
    Conj,
    Part,
    Punct,
    Adv,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 14] = [
        PosTag::Noun,
        PosTag::Propn,
        PosTag::Verb,
        PosTag::Aux,
        PosTag::Adj,
        PosTag::Det,
        PosTag::Adp,
        PosTag::Pron,
        PosTag::Num,
        PosTag::Conj,
        PosTag::Part,
        PosTag::Punct,
        PosTag::Adv,
        PosTag::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "NOUN",
            PosTag::Propn => "PROPN",
            PosTag::Verb => "VERB",
            PosTag::Aux => "AUX",
            PosTag::Adj => "ADJ",
            PosTag::Det => "DET",
            PosTag::Adp => "ADP",
            PosTag::Pron => "PRON",
            PosTag::Num => "NUM",
            PosTag::Conj => "CONJ",
            PosTag::Part => "PART",
            PosTag::Punct => "PUNCT",
            PosTag::Adv => "ADV",
            PosTag::X => "X",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<PosTag> {
        PosTag::ALL.get(i).copied()
    }

    pub fn is_nominal(self) -> bool {
        matches!(self, PosTag::Noun | PosTag::Propn)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PosTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// A token with its byte span in the source text. `tag` is `None` until tagged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub tag: Option<PosTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnitKind {
    #[default]
    Noun,
    NounPhrase,
    Verb,
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Noun => "noun",
            UnitKind::NounPhrase => "noun-phrase",
            UnitKind::Verb => "verb",
        })
    }
}

/// An extracted span. `first_token..=last_token` indexes the token list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextUnit {
    pub surface: String,
    pub kind: UnitKind,
    pub first_token: usize,
    pub last_token: usize,
}

impl TextUnit {
    /// Text fed to the text encoder and used as the embedding lookup key.
    pub fn scoring_text(&self) -> String {
        self.surface.to_lowercase()
    }
}
