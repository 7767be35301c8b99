//! Sentence- and noun-level image–text alignment scoring (CLIPScore and
//! F-CLIPScore), caption-selection benchmarks and score-based data curation.

pub mod benchmark;
pub mod cli;
pub mod curation;
pub mod metric;
pub mod provider;
pub mod stats;
pub mod store;
pub mod tagger;
