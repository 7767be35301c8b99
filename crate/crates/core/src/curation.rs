//! Score-based filtering, filter overlap and rank differences.
//!
//! Ranks run from 1 (lowest score) to n, with equal scores ordered by pairId.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{ScoreKind, ScoreRecord};

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("no records")]
    EmptyInput,
    #[error("pair {0}: score is not finite")]
    NonFiniteScore(String),
    #[error("duplicate pair id {0:?}")]
    DuplicateId(String),
    #[error("rate {0} is outside the open interval (0, 100)")]
    RateOutOfRange(f64),
    #[error("random filtering needs a seed")]
    MissingSeed,
    #[error("populations differ: {0}")]
    PopulationMismatch(String),
    #[error("rates differ: {0} vs {1}")]
    RateMismatch(f64, f64),
    #[error("k must be positive")]
    InvalidK,
    #[error("malformed filter manifest line {line}: {detail}")]
    MalformedManifest { line: usize, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = CurationError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMetric {
    Clip,
    Fclip,
    Random,
}

impl From<ScoreKind> for FilterMetric {
    fn from(k: ScoreKind) -> Self {
        match k {
            ScoreKind::Clip => FilterMetric::Clip,
            ScoreKind::Fclip => FilterMetric::Fclip,
        }
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CurationError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Ranks `(pairId, score)` pairs. Output is in input order.
pub fn rank_pairs(scores: &[(String, f64)]) -> Result<Vec<(String, usize)>> {
    if scores.is_empty() {
        return Err(CurationError::EmptyInput);
    }
    if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(CurationError::NonFiniteScore(id.clone()));
    }
    check_unique(scores.iter().map(|(id, _)| id.as_str()))?;
    let order = ascending_order(scores);
    let mut ranks = vec![0; scores.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    Ok(scores
        .iter()
        .zip(ranks)
        .map(|((id, _), r)| (id.clone(), r))
        .collect())
}

fn ascending_order(scores: &[(String, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .1
            .total_cmp(&scores[b].1)
            .then_with(|| scores[a].0.cmp(&scores[b].0))
    });
    order
}

fn metric_scores(records: &[ScoreRecord], metric: ScoreKind) -> Vec<(String, f64)> {
    records
        .iter()
        .map(|r| (r.pair_id.clone(), r.score(metric)))
        .collect()
}

pub fn rank_scores(records: &[ScoreRecord], metric: ScoreKind) -> Result<Vec<(String, usize)>> {
    rank_pairs(&metric_scores(records, metric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FilterEntry {
    pub pair_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Outcome of one filtering run. `removed` and `retained` are in rank order.
/// For random filtering, `score` is the seeded random key that was ranked.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterManifest {
    pub rate_pct: f64,
    pub metric: FilterMetric,
    pub seed: Option<u64>,
    pub total: usize,
    pub removed: Vec<FilterEntry>,
    pub retained: Vec<FilterEntry>,
    /// Free-form run configuration carried in the header.
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ManifestHeader {
    rate_pct: f64,
    metric: FilterMetric,
    seed: Option<u64>,
    total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Status {
    Removed,
    Retained,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ManifestLine {
    pair_id: String,
    score: f64,
    rank: usize,
    status: Status,
}

/// Number of items removed at `rate_pct` out of `n`.
pub fn removal_count(rate_pct: f64, n: usize) -> usize {
    (rate_pct / 100.0 * n as f64).floor() as usize
}

/// Removes the lowest-ranked `floor(rate/100 * n)` records. With
/// `FilterMetric::Random`, records are ranked by seeded uniform keys instead.
pub fn filter_bottom(
    records: &[ScoreRecord],
    metric: FilterMetric,
    rate_pct: f64,
    seed: Option<u64>,
) -> Result<FilterManifest> {
    if !(rate_pct > 0.0 && rate_pct < 100.0) {
        return Err(CurationError::RateOutOfRange(rate_pct));
    }
    let scores = match metric {
        FilterMetric::Clip => metric_scores(records, ScoreKind::Clip),
        FilterMetric::Fclip => metric_scores(records, ScoreKind::Fclip),
        FilterMetric::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.ok_or(CurationError::MissingSeed)?);
            records
                .iter()
                .map(|r| (r.pair_id.clone(), rng.gen::<f64>()))
                .collect()
        }
    };
    let ranks = rank_pairs(&scores)?;
    let k = removal_count(rate_pct, records.len());
    let mut entries: Vec<FilterEntry> = scores
        .into_iter()
        .zip(ranks)
        .map(|((pair_id, score), (_, rank))| FilterEntry { pair_id, score, rank })
        .collect();
    entries.sort_by_key(|e| e.rank);
    let retained = entries.split_off(k);
    Ok(FilterManifest {
        rate_pct,
        metric,
        seed: if metric == FilterMetric::Random { seed } else { None },
        total: records.len(),
        removed: entries,
        retained,
        config: None,
    })
}

impl FilterManifest {
    pub fn removed_ids(&self) -> HashSet<&str> {
        self.removed.iter().map(|e| e.pair_id.as_str()).collect()
    }

    pub fn population(&self) -> HashSet<&str> {
        self.removed
            .iter()
            .chain(&self.retained)
            .map(|e| e.pair_id.as_str())
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header = ManifestHeader {
            rate_pct: self.rate_pct,
            metric: self.metric,
            seed: self.seed,
            total: self.total,
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for (entries, status) in [(&self.removed, Status::Removed), (&self.retained, Status::Retained)] {
            for e in entries {
                let line = ManifestLine {
                    pair_id: e.pair_id.clone(),
                    score: e.score,
                    rank: e.rank,
                    status,
                };
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, detail: String| CurationError::MalformedManifest { line, detail };
        let (_, first) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
        let first = first.map_err(|e| bad(1, e.to_string()))?;
        let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
        let mut m = FilterManifest {
            rate_pct: header.rate_pct,
            metric: header.metric,
            seed: header.seed,
            total: header.total,
            removed: Vec::new(),
            retained: Vec::new(),
            config: header.config,
        };
        for (n, line) in lines {
            let line = line.map_err(|e| bad(n + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: ManifestLine = serde_json::from_str(&line).map_err(|e| bad(n + 1, e.to_string()))?;
            let e = FilterEntry { pair_id: l.pair_id, score: l.score, rank: l.rank };
            match l.status {
                Status::Removed => m.removed.push(e),
                Status::Retained => m.retained.push(e),
            }
        }
        if m.removed.len() + m.retained.len() != m.total {
            return Err(bad(
                0,
                format!(
                    "header total {} but {} records",
                    m.total,
                    m.removed.len() + m.retained.len()
                ),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| CurationError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(fs::File::create(path).map_err(io_err)?);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(io_err)
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = fs::File::open(path).map_err(|source| CurationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_from(BufReader::new(f))
    }

    /// Retained pair ids, one per line, in rank order.
    pub fn write_retained_ids<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.retained {
            writeln!(w, "{}", e.pair_id)?;
        }
        Ok(())
    }
}

/// Fraction of `a`'s removed pairs that `b` also removed. Two runs that
/// remove nothing overlap fully.
pub fn overlap(a: &FilterManifest, b: &FilterManifest) -> Result<f64> {
    if a.rate_pct != b.rate_pct {
        return Err(CurationError::RateMismatch(a.rate_pct, b.rate_pct));
    }
    if a.total != b.total || a.population() != b.population() {
        return Err(CurationError::PopulationMismatch(format!(
            "{} vs {} records with differing ids",
            a.total, b.total
        )));
    }
    let ra = a.removed_ids();
    if ra.is_empty() {
        return Ok(1.0);
    }
    let rb = b.removed_ids();
    Ok(ra.intersection(&rb).count() as f64 / ra.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankDiffEntry {
    pub pair_id: String,
    pub f_rank: usize,
    pub c_rank: usize,
    pub diff: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankDiffReport {
    /// Sorted by `diff` descending, then pairId.
    pub entries: Vec<RankDiffEntry>,
    /// Up to k entries with the largest positive diffs.
    pub top_k: Vec<RankDiffEntry>,
    /// Up to k entries with the most negative diffs, most negative first.
    pub bottom_k: Vec<RankDiffEntry>,
}

/// Per-pair `fRank - cRank` over two score lists of the same population.
pub fn rank_difference(
    f_scores: &[(String, f64)],
    c_scores: &[(String, f64)],
    k: usize,
) -> Result<RankDiffReport> {
    if k == 0 {
        return Err(CurationError::InvalidK);
    }
    let f_ranks = rank_pairs(f_scores)?;
    let c_ranks: HashMap<String, usize> = rank_pairs(c_scores)?.into_iter().collect();
    if f_ranks.len() != c_ranks.len() {
        return Err(CurationError::PopulationMismatch(format!(
            "{} vs {} records",
            f_ranks.len(),
            c_ranks.len()
        )));
    }
    let mut entries = Vec::with_capacity(f_ranks.len());
    for (id, f_rank) in f_ranks {
        let c_rank = *c_ranks
            .get(&id)
            .ok_or_else(|| CurationError::PopulationMismatch(format!("{id:?} missing from second input")))?;
        entries.push(RankDiffEntry {
            diff: f_rank as i64 - c_rank as i64,
            pair_id: id,
            f_rank,
            c_rank,
        });
    }
    entries.sort_by(|a, b| b.diff.cmp(&a.diff).then_with(|| a.pair_id.cmp(&b.pair_id)));
    let top_k = entries.iter().filter(|e| e.diff > 0).take(k).cloned().collect();
    let bottom_k = entries.iter().rev().filter(|e| e.diff < 0).take(k).cloned().collect();
    Ok(RankDiffReport { entries, top_k, bottom_k })
}

/// Rank difference between the F-CLIPScore of `f_records` and the CLIPScore
/// of `c_records`.
pub fn rank_difference_records(
    f_records: &[ScoreRecord],
    c_records: &[ScoreRecord],
    k: usize,
) -> Result<RankDiffReport> {
    rank_difference(
        &metric_scores(f_records, ScoreKind::Fclip),
        &metric_scores(c_records, ScoreKind::Clip),
        k,
    )
}
