//! Caption-selection accuracy, noun-replacement ablation and store drift.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{clip_score, cosine, f_clip_from_scores, MetricError, ScoreKind, Scorer};
use crate::stats::{welch_t_test, GroupSummary};
use crate::store::EmbeddingStore;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("candidate set {index}: {detail}")]
    InvalidSet { index: usize, detail: String },
    #[error("malformed candidate set line {line}: {detail}")]
    MalformedSet { line: usize, detail: String },
    #[error("no candidate sets to evaluate")]
    EmptySetList,
    #[error("noun pool is empty")]
    EmptyPool,
    #[error("replacement rate {0} is outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("bins must be positive")]
    InvalidBins,
    #[error("group {group} has {n} sample(s); at least 2 are needed")]
    InsufficientSamples { group: char, n: usize },
    #[error("unknown id {0:?}")]
    UnknownId(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = BenchmarkError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Candidate {
    pub caption_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CandidateSet {
    pub image_id: String,
    pub gold_index: usize,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn validate(&self, index: usize) -> Result<()> {
        let bad = |detail: String| Err(BenchmarkError::InvalidSet { index, detail });
        if self.candidates.len() < 2 {
            return bad(format!("{} candidate(s); at least 2 required", self.candidates.len()));
        }
        if self.gold_index >= self.candidates.len() {
            return bad(format!(
                "goldIndex {} out of range for {} candidates",
                self.gold_index,
                self.candidates.len()
            ));
        }
        Ok(())
    }
}

pub fn read_candidate_sets<R: BufRead>(reader: R) -> Result<Vec<CandidateSet>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let bad = |detail: String| BenchmarkError::MalformedSet { line: n + 1, detail };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: CandidateSet = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        set.validate(out.len())
            .map_err(|e| bad(e.to_string()))?;
        out.push(set);
    }
    Ok(out)
}

pub fn write_candidate_sets<W: Write>(mut w: W, sets: &[CandidateSet]) -> io::Result<()> {
    for s in sets {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn open_candidate_sets(path: impl AsRef<Path>) -> Result<Vec<CandidateSet>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|source| BenchmarkError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_candidate_sets(BufReader::new(f))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ItemChoice {
    pub image_id: String,
    pub chosen_index: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalResult {
    pub dataset_name: String,
    pub accuracy_pct: f64,
    pub per_item_choices: Vec<ItemChoice>,
    pub seed: Option<u64>,
}

impl EvalResult {
    fn from_choices(dataset_name: &str, sets: &[CandidateSet], chosen: Vec<usize>, seed: Option<u64>) -> Self {
        let per_item_choices: Vec<ItemChoice> = sets
            .iter()
            .zip(chosen)
            .map(|(s, c)| ItemChoice {
                image_id: s.image_id.clone(),
                chosen_index: c,
                correct: c == s.gold_index,
            })
            .collect();
        let correct = per_item_choices.iter().filter(|c| c.correct).count();
        EvalResult {
            dataset_name: dataset_name.to_string(),
            accuracy_pct: 100.0 * correct as f64 / per_item_choices.len() as f64,
            per_item_choices,
            seed,
        }
    }

    pub fn correct(&self) -> usize {
        self.per_item_choices.iter().filter(|c| c.correct).count()
    }
}

/// Index of the largest score; the first one wins ties.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn check_sets(sets: &[CandidateSet]) -> Result<()> {
    if sets.is_empty() {
        return Err(BenchmarkError::EmptySetList);
    }
    sets.iter().enumerate().try_for_each(|(i, s)| s.validate(i))
}

/// Scores of every candidate in `set` under `metric`.
pub fn candidate_scores(scorer: &Scorer, set: &CandidateSet, metric: ScoreKind) -> Result<Vec<f64>> {
    let image = scorer.image(&set.image_id, &set.image_id)?;
    set.candidates
        .iter()
        .map(|c| {
            let caption = scorer.caption(&set.image_id, &c.caption_id)?;
            Ok(match metric {
                ScoreKind::Clip => clip_score(image, caption, &scorer.cfg)?,
                ScoreKind::Fclip => scorer.score_caption(&set.image_id, image, caption, &c.text)?.f_score,
            })
        })
        .collect()
}

pub fn select_caption(scorer: &Scorer, set: &CandidateSet, metric: ScoreKind) -> Result<usize> {
    set.validate(0)?;
    Ok(argmax_first(&candidate_scores(scorer, set, metric)?))
}

/// Caption-selection accuracy. Sets are scored in parallel and merged in input order.
pub fn evaluate(
    scorer: &Scorer,
    sets: &[CandidateSet],
    metric: ScoreKind,
    dataset_name: &str,
) -> Result<EvalResult> {
    check_sets(sets)?;
    let chosen = sets
        .par_iter()
        .map(|s| Ok(argmax_first(&candidate_scores(scorer, s, metric)?)))
        .collect::<Result<Vec<usize>>>()?;
    Ok(EvalResult::from_choices(dataset_name, sets, chosen, None))
}

/// F-CLIPScore accuracy after replacing each unit embedding, with probability
/// `rate`, by a uniformly drawn pool vector.
///
/// Set `i` draws from a ChaCha8 stream `i` seeded with `seed`. Every unit
/// consumes one uniform and one pool index whether or not it is replaced, so
/// at a fixed seed the replaced units at a lower rate are a subset of those at
/// a higher rate, with the same replacement vectors.
pub fn noun_replacement_ablation(
    scorer: &Scorer,
    sets: &[CandidateSet],
    pool: &EmbeddingStore,
    rate: f64,
    seed: u64,
    dataset_name: &str,
) -> Result<EvalResult> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(BenchmarkError::RateOutOfRange(rate));
    }
    if pool.is_empty() {
        return Err(BenchmarkError::EmptyPool);
    }
    if pool.dim() != scorer.images.dim() {
        return Err(BenchmarkError::DimensionMismatch(format!(
            "pool dim {} vs image dim {}",
            pool.dim(),
            scorer.images.dim()
        )));
    }
    check_sets(sets)?;
    let chosen = sets
        .par_iter()
        .enumerate()
        .map(|(i, set)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let image = scorer.image(&set.image_id, &set.image_id)?;
            let mut scores = Vec::with_capacity(set.candidates.len());
            for c in &set.candidates {
                let caption = scorer.caption(&set.image_id, &c.caption_id)?;
                let sentence = clip_score(image, caption, &scorer.cfg)?;
                let mut unit_scores = Vec::new();
                for (_, original) in scorer.unit_vectors(&set.image_id, &c.text)? {
                    let u: f64 = rng.gen();
                    let j = rng.gen_range(0..pool.len());
                    let v = if u < rate { pool.vector_at(j) } else { original };
                    unit_scores.push(clip_score(image, v, &scorer.cfg)?);
                }
                scores.push(f_clip_from_scores(sentence, &unit_scores));
            }
            Ok(argmax_first(&scores))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok(EvalResult::from_choices(dataset_name, sets, chosen, Some(seed)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HistogramBin {
    pub lower_edge: f64,
    pub count: usize,
    pub count_a: usize,
    pub count_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DriftReport {
    pub histogram: Vec<HistogramBin>,
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    pub welch_t: f64,
    pub df: f64,
    pub p_value: f64,
    pub zero_variance: bool,
    pub cosines_a: Vec<f64>,
    pub cosines_b: Vec<f64>,
}

/// Joint histogram over `bins` equal-width bins spanning `[min, max]` of both groups.
pub fn joint_histogram(a: &[f64], b: &[f64], bins: usize) -> Vec<HistogramBin> {
    let all = a.iter().chain(b);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 / bins as f64 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|k| HistogramBin {
            lower_edge: lo + k as f64 * width,
            count: 0,
            count_a: 0,
            count_b: 0,
        })
        .collect();
    let slot = |x: f64| (((x - lo) / width).floor() as usize).min(bins - 1);
    for &x in a {
        let k = slot(x);
        out[k].count += 1;
        out[k].count_a += 1;
    }
    for &x in b {
        let k = slot(x);
        out[k].count += 1;
        out[k].count_b += 1;
    }
    out
}

/// Per-id cosine between the two stores' vectors for each id group, with a
/// joint histogram and Welch's t-test between the groups.
pub fn compare_stores(
    store_a: &EmbeddingStore,
    store_b: &EmbeddingStore,
    ids_a: &[String],
    ids_b: &[String],
    bins: usize,
) -> Result<DriftReport> {
    if bins == 0 {
        return Err(BenchmarkError::InvalidBins);
    }
    if store_a.dim() != store_b.dim() {
        return Err(BenchmarkError::DimensionMismatch(format!(
            "store dims {} and {}",
            store_a.dim(),
            store_b.dim()
        )));
    }
    let cosines = |ids: &[String]| -> Result<Vec<f64>> {
        ids.iter()
            .map(|id| {
                let va = store_a.try_get(id).ok_or_else(|| BenchmarkError::UnknownId(id.clone()))?;
                let vb = store_b.try_get(id).ok_or_else(|| BenchmarkError::UnknownId(id.clone()))?;
                Ok(cosine(va, vb)?)
            })
            .collect()
    };
    let ca = cosines(ids_a)?;
    let cb = cosines(ids_b)?;
    let group_a = GroupSummary::of(&ca);
    let group_b = GroupSummary::of(&cb);
    if group_a.n < 2 {
        return Err(BenchmarkError::InsufficientSamples { group: 'A', n: group_a.n });
    }
    if group_b.n < 2 {
        return Err(BenchmarkError::InsufficientSamples { group: 'B', n: group_b.n });
    }
    let test = welch_t_test(&group_a, &group_b).expect("both groups have two or more samples");
    Ok(DriftReport {
        histogram: joint_histogram(&ca, &cb, bins),
        group_a,
        group_b,
        welch_t: test.t,
        df: test.df,
        p_value: test.p_value,
        zero_variance: test.zero_variance,
        cosines_a: ca,
        cosines_b: cb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricConfig;
    use crate::tagger::TaggerModel;

    fn set(image: &str, gold: usize, caps: &[(&str, &str)]) -> CandidateSet {
        CandidateSet {
            image_id: image.into(),
            gold_index: gold,
            candidates: caps
                .iter()
                .map(|(id, t)| Candidate { caption_id: id.to_string(), text: t.to_string() })
                .collect(),
        }
    }

    fn stores() -> (EmbeddingStore, EmbeddingStore) {
        let images = EmbeddingStore::new(2, [("img", vec![1.0, 0.0])], true).unwrap();
        let captions = EmbeddingStore::new(
            2,
            [
                ("same", vec![1.0, 0.0]),
                ("orth", vec![0.0, 1.0]),
                ("dog", vec![1.0, 0.0]),
                ("cat", vec![0.0, 1.0]),
            ],
            true,
        )
        .unwrap();
        (images, captions)
    }

    #[test]
    fn select_trivial_cases() {
        let (images, captions) = stores();
        let scorer = Scorer::new(&images, &captions, TaggerModel::builtin(), MetricConfig::default()).unwrap();
        let s = set("img", 0, &[("same", "x"), ("orth", "y")]);
        assert_eq!(select_caption(&scorer, &s, ScoreKind::Clip).unwrap(), 0);
        let tie = set("img", 1, &[("orth", "a dog"), ("orth", "a dog"), ("orth", "a dog")]);
        assert_eq!(select_caption(&scorer, &tie, ScoreKind::Fclip).unwrap(), 0);
        let nouns = set("img", 1, &[("same", "a cat"), ("same", "a dog")]);
        assert_eq!(select_caption(&scorer, &nouns, ScoreKind::Clip).unwrap(), 0);
        assert_eq!(select_caption(&scorer, &nouns, ScoreKind::Fclip).unwrap(), 1);
    }

    #[test]
    fn set_validation() {
        assert!(set("i", 0, &[("a", "")]).validate(0).is_err());
        assert!(set("i", 2, &[("a", ""), ("b", "")]).validate(0).is_err());
        let line = r#"{"imageId":"i","goldIndex":0,"candidates":[{"captionId":"a","text":"x"},{"captionId":"b","text":"y"}]}"#;
        let sets = read_candidate_sets(line.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_candidate_sets(&mut out, &sets).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().trim_end(), line);
        assert!(read_candidate_sets(&b"{\"imageId\":\"i\"}\n"[..]).is_err());
    }

    #[test]
    fn ablation_rate_zero_matches_evaluate() {
        let (images, captions) = stores();
        let scorer = Scorer::new(&images, &captions, TaggerModel::builtin(), MetricConfig::default()).unwrap();
        let sets = vec![
            set("img", 1, &[("same", "a cat"), ("same", "a dog")]),
            set("img", 0, &[("same", "a dog"), ("orth", "a dog")]),
        ];
        let pool = EmbeddingStore::new(2, [("p", vec![0.0, 1.0])], true).unwrap();
        let base = evaluate(&scorer, &sets, ScoreKind::Fclip, "t").unwrap();
        let ab = noun_replacement_ablation(&scorer, &sets, &pool, 0.0, 9, "t").unwrap();
        assert_eq!(ab.per_item_choices, base.per_item_choices);
        assert_eq!(ab.seed, Some(9));
        assert!(matches!(
            noun_replacement_ablation(&scorer, &sets, &pool, 1.5, 9, "t"),
            Err(BenchmarkError::RateOutOfRange(_))
        ));
        let empty = EmbeddingStore::new(2, Vec::<(String, Vec<f32>)>::new(), true).unwrap();
        assert!(matches!(
            noun_replacement_ablation(&scorer, &sets, &empty, 0.5, 9, "t"),
            Err(BenchmarkError::EmptyPool)
        ));
    }

    #[test]
    fn histogram_counts_everything() {
        let h = joint_histogram(&[0.1, 0.2, 0.9], &[0.5, 0.9], 4);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[0].lower_edge, 0.1);
        assert_eq!(h[3].count, 2);
        let flat = joint_histogram(&[1.0, 1.0], &[1.0], 3);
        assert_eq!(flat[0].count, 3);
    }

    #[test]
    fn identical_stores_report_zero_variance() {
        let s = EmbeddingStore::new(
            2,
            [("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("c", vec![0.6, 0.8]), ("d", vec![0.8, 0.6])],
            true,
        )
        .unwrap();
        let ids = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let r = compare_stores(&s, &s, &ids(&["a", "b"]), &ids(&["c", "d"]), 5).unwrap();
        assert!(r.cosines_a.iter().chain(&r.cosines_b).all(|&c| c == 1.0));
        assert!(r.zero_variance);
        assert_eq!(r.p_value, 1.0);
        assert!(matches!(
            compare_stores(&s, &s, &ids(&["a", "zz"]), &ids(&["c", "d"]), 5),
            Err(BenchmarkError::UnknownId(id)) if id == "zz"
        ));
    }
}
