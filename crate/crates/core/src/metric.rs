//! CLIPScore, F-CLIPScore and the batch penalty term.
//!
//! `clip_score = w * max(cos(image, text), 0)` and
//! `f_clip_score = (clip(image, sentence) + Σ clip(image, unit_i)) / (N + 1)`.
//! All arithmetic is done in `f64`.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::provider::{resolve_missing, Embedder, ProviderError};
use crate::store::{EmbeddingStore, PairManifest};
use crate::tagger::{extract_units, TaggerError, TaggerModel, TextUnit, UnitKind};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error("batch size mismatch: expected {expected}, got {actual}")]
    BatchSizeMismatch { expected: usize, actual: usize },
    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("pair {pair_id}: unknown id(s) {}", .ids.join(", "))]
    UnknownId { pair_id: String, ids: Vec<String> },
    #[error("malformed score record line {line}: {detail}")]
    MalformedRecord { line: usize, detail: String },
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

pub type Result<T, E = MetricError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricConfig {
    pub w: f64,
    pub clamp_negative: bool,
    pub variant: UnitKind,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            w: 2.5,
            clamp_negative: true,
            variant: UnitKind::Noun,
        }
    }
}

impl MetricConfig {
    pub fn with_w(self, w: f64) -> Self {
        MetricConfig { w, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w.is_finite() && self.w > 0.0) {
            return Err(MetricError::InvalidConfig(format!(
                "w must be positive and finite, got {}",
                self.w
            )));
        }
        Ok(())
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    if a == b {
        return Ok(1.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Scales a cosine the way `clip_score` does.
pub fn clip_from_cosine(cos: f64, cfg: &MetricConfig) -> f64 {
    if cfg.clamp_negative {
        cfg.w * cos.max(0.0)
    } else {
        cfg.w * cos
    }
}

pub fn clip_score(img: &[f32], txt: &[f32], cfg: &MetricConfig) -> Result<f64> {
    Ok(clip_from_cosine(cosine(img, txt)?, cfg))
}

/// Mean of the sentence score and unit scores. With no units this returns
/// `sentence` unchanged.
pub fn f_clip_from_scores(sentence: f64, units: &[f64]) -> f64 {
    let mut sum = sentence;
    for &u in units {
        sum += u;
    }
    sum / (units.len() + 1) as f64
}

pub fn f_clip_score<V: AsRef<[f32]>>(
    img: &[f32],
    sentence: &[f32],
    units: &[V],
    cfg: &MetricConfig,
) -> Result<f64> {
    let s = clip_score(img, sentence, cfg)?;
    let unit_scores = units
        .iter()
        .map(|u| clip_score(img, u.as_ref(), cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(f_clip_from_scores(s, &unit_scores))
}

/// Per-pair scores. `unit_scores` pairs each unit's scoring text with its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreRecord {
    pub pair_id: String,
    #[serde(serialize_with = "ser_sig9")]
    pub sentence_score: f64,
    #[serde(serialize_with = "ser_sig9")]
    pub f_score: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(serialize_with = "ser_unit_scores")]
    pub unit_scores: Vec<(String, f64)>,
}

impl ScoreRecord {
    pub fn new(pair_id: impl Into<String>, sentence_score: f64, unit_scores: Vec<(String, f64)>) -> Self {
        let scores: Vec<f64> = unit_scores.iter().map(|(_, s)| *s).collect();
        ScoreRecord {
            pair_id: pair_id.into(),
            sentence_score,
            f_score: f_clip_from_scores(sentence_score, &scores),
            n: unit_scores.len(),
            unit_scores,
        }
    }

    pub fn score(&self, metric: ScoreKind) -> f64 {
        match metric {
            ScoreKind::Clip => self.sentence_score,
            ScoreKind::Fclip => self.f_score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Clip,
    Fclip,
}

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

fn ser_sig9<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*x))
}

fn ser_unit_scores<S: serde::Serializer>(
    v: &[(String, f64)],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (unit, score) in v {
        seq.serialize_element(&(unit, round_sig9(*score)))?;
    }
    seq.end()
}

pub fn write_score_records<W: Write>(mut w: W, records: &[ScoreRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads score records, one per line. Lines whose first key is `config`
/// (run headers) and blank lines are skipped.
pub fn read_score_records<R: BufRead>(reader: R) -> Result<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let bad = |detail: String| MetricError::MalformedRecord { line: n + 1, detail };
        let line = line.map_err(|e| bad(e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with("{\"config\"") {
            continue;
        }
        let rec: ScoreRecord = serde_json::from_str(t).map_err(|e| bad(e.to_string()))?;
        if rec.n != rec.unit_scores.len() {
            return Err(bad(format!("N = {} but {} unit scores", rec.n, rec.unit_scores.len())));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Stores and model used to score captions against images.
///
/// Unit vectors are looked up by lowercased surface in the unit store (the
/// caption store unless replaced), then in vectors fetched by
/// [`Scorer::fetch_missing_units`].
pub struct Scorer<'a> {
    pub images: &'a EmbeddingStore,
    pub captions: &'a EmbeddingStore,
    pub units: &'a EmbeddingStore,
    pub tagger: &'a TaggerModel,
    pub cfg: MetricConfig,
    fetched: HashMap<String, Vec<f32>>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        images: &'a EmbeddingStore,
        captions: &'a EmbeddingStore,
        tagger: &'a TaggerModel,
        cfg: MetricConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Scorer {
            images,
            captions,
            units: captions,
            tagger,
            cfg,
            fetched: HashMap::new(),
        })
    }

    pub fn with_unit_store(mut self, units: &'a EmbeddingStore) -> Self {
        self.units = units;
        self
    }

    /// Extracts units from every text and embeds the surfaces missing from
    /// the unit store, in deduplicated batches.
    pub fn fetch_missing_units<'t, I>(&mut self, texts: I, provider: &dyn Embedder) -> Result<usize>
    where
        I: IntoIterator<Item = &'t str>,
    {
        let mut keys = Vec::new();
        for text in texts {
            for u in self.units_for(text)? {
                keys.push(u.scoring_text());
            }
        }
        let keys = keys.iter().filter(|k| !self.fetched.contains_key(*k)).map(String::as_str);
        let fetched = resolve_missing(keys, self.units, Some(provider))?;
        let n = fetched.len();
        self.fetched.extend(fetched);
        Ok(n)
    }

    pub fn units_for(&self, text: &str) -> Result<Vec<TextUnit>> {
        Ok(extract_units(self.tagger, text, self.cfg.variant)?)
    }

    pub fn unit_vector(&self, key: &str) -> Option<&[f32]> {
        self.units
            .try_get(key)
            .or_else(|| self.fetched.get(key).map(Vec::as_slice))
    }

    pub fn image(&self, pair_id: &str, image_id: &str) -> Result<&'a [f32]> {
        self.images.try_get(image_id).ok_or_else(|| MetricError::UnknownId {
            pair_id: pair_id.into(),
            ids: vec![image_id.into()],
        })
    }

    pub fn caption(&self, pair_id: &str, caption_id: &str) -> Result<&'a [f32]> {
        self.captions.try_get(caption_id).ok_or_else(|| MetricError::UnknownId {
            pair_id: pair_id.into(),
            ids: vec![caption_id.into()],
        })
    }

    /// Unit vectors for `text`, failing with every unresolved surface.
    pub fn unit_vectors(&self, pair_id: &str, text: &str) -> Result<Vec<(String, &[f32])>> {
        let mut out = Vec::new();
        let mut missing = Vec::new();
        for u in self.units_for(text)? {
            let key = u.scoring_text();
            match self.unit_vector(&key) {
                Some(v) => out.push((key, v)),
                None => missing.push(key),
            }
        }
        if !missing.is_empty() {
            return Err(MetricError::UnknownId {
                pair_id: pair_id.into(),
                ids: missing,
            });
        }
        Ok(out)
    }

    pub fn score_caption(
        &self,
        pair_id: &str,
        image: &[f32],
        caption: &[f32],
        text: &str,
    ) -> Result<ScoreRecord> {
        let sentence = clip_score(image, caption, &self.cfg)?;
        let units = self
            .unit_vectors(pair_id, text)?
            .into_iter()
            .map(|(k, v)| Ok((k, clip_score(image, v, &self.cfg)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScoreRecord::new(pair_id, sentence, units))
    }

    /// Scores every manifest record in parallel; output order follows the manifest.
    pub fn score_pairs(&self, manifest: &PairManifest) -> Result<Vec<ScoreRecord>> {
        manifest
            .records
            .par_iter()
            .map(|r| {
                let img = self.image(&r.pair_id, &r.image_id)?;
                let cap = self.caption(&r.pair_id, &r.caption_id)?;
                self.score_caption(&r.pair_id, img, cap, &r.caption_text)
            })
            .collect()
    }
}

pub fn score_pairs(
    images: &EmbeddingStore,
    captions: &EmbeddingStore,
    manifest: &PairManifest,
    tagger: &TaggerModel,
    cfg: &MetricConfig,
) -> Result<Vec<ScoreRecord>> {
    Scorer::new(images, captions, tagger, *cfg)?.score_pairs(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PenaltyConfig {
    pub alpha: f64,
    pub batch_size: usize,
}

impl PenaltyConfig {
    pub fn new(batch_size: usize) -> Self {
        PenaltyConfig {
            alpha: 0.3,
            batch_size,
        }
    }
}

/// `(alpha / B) * Σ (1 - f_i)` over F-CLIPScores on the `w = 1` scale.
pub fn f_clip_penalty(f_scores: &[f64], cfg: &PenaltyConfig) -> Result<f64> {
    if !(cfg.alpha.is_finite() && cfg.alpha >= 0.0) {
        return Err(MetricError::InvalidConfig(format!(
            "alpha must be non-negative, got {}",
            cfg.alpha
        )));
    }
    if cfg.batch_size == 0 || f_scores.len() != cfg.batch_size {
        return Err(MetricError::BatchSizeMismatch {
            expected: cfg.batch_size,
            actual: f_scores.len(),
        });
    }
    let mut sum = 0.0;
    for &f in f_scores {
        if !(f.is_finite() && (0.0..=1.0 + 1e-9).contains(&f)) {
            return Err(MetricError::ScoreOutOfRange(f));
        }
        sum += 1.0 - f.min(1.0);
    }
    Ok(cfg.alpha / cfg.batch_size as f64 * sum)
}

/// Penalty over records scored with scale `w`; scores are rescaled to `w = 1`.
pub fn f_clip_penalty_records(records: &[ScoreRecord], w: f64, cfg: &PenaltyConfig) -> Result<f64> {
    if !(w.is_finite() && w > 0.0) {
        return Err(MetricError::InvalidConfig(format!("w must be positive, got {w}")));
    }
    let scores: Vec<f64> = records.iter().map(|r| r.f_score / w).collect();
    f_clip_penalty(&scores, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::PairRecord;

    fn cfg(w: f64) -> MetricConfig {
        MetricConfig::default().with_w(w)
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((c - 32.0 / (14f64.sqrt() * 77f64.sqrt())).abs() < 1e-15);
        assert!((c - 0.974631846).abs() < 1e-9);
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(MetricError::DimensionMismatch { .. })));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(MetricError::ZeroVector)));
    }

    #[test]
    fn clip_score_examples() {
        let c = MetricConfig::default();
        assert_eq!(clip_score(&[0.6, 0.8], &[0.6, 0.8], &c).unwrap(), 2.5);
        assert_eq!(clip_from_cosine(-0.3, &c), 0.0);
        let raw = MetricConfig { clamp_negative: false, ..c };
        assert!((clip_from_cosine(-0.3, &raw) + 0.75).abs() < 1e-15);
        let s = clip_score(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &c).unwrap();
        assert!((s - 2.436579615).abs() < 1e-9);
    }

    #[test]
    fn f_clip_examples() {
        let c = cfg(2.5);
        let img = [0.0f32, 1.0, 0.0];
        let sent = [0.2f32, 0.7, 0.1];
        let none: [&[f32]; 0] = [];
        assert_eq!(f_clip_score(&img, &sent, &none, &c).unwrap(), clip_score(&img, &sent, &c).unwrap());
        let u = [0.0f32, 1.0, 0.0];
        assert_eq!(f_clip_score(&u, &u, &[u, u, u], &c).unwrap(), 2.5);
        let v = f_clip_score(&[1.0, 0.0], &[1.0, 0.0], &[[0.0f32, 1.0]], &cfg(1.0)).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn penalty_examples() {
        let p = PenaltyConfig::new(2);
        assert!((f_clip_penalty(&[0.5, 0.7], &p).unwrap() - 0.12).abs() < 1e-12);
        assert_eq!(f_clip_penalty(&[1.0, 1.0], &p).unwrap(), 0.0);
        let zero = PenaltyConfig { alpha: 0.0, batch_size: 3 };
        assert_eq!(f_clip_penalty(&[0.1, 0.4, 0.9], &zero).unwrap(), 0.0);
        assert!(matches!(
            f_clip_penalty(&[0.5], &p),
            Err(MetricError::BatchSizeMismatch { expected: 2, actual: 1 })
        ));
        let recs = [ScoreRecord::new("a", 1.25, vec![]), ScoreRecord::new("b", 1.75, vec![])];
        assert!((f_clip_penalty_records(&recs, 2.5, &p).unwrap() - 0.12).abs() < 1e-12);
    }

    #[test]
    fn record_serialization_rounds_to_nine_digits() {
        let r = ScoreRecord::new("p1", 0.123456789123, vec![("dog".into(), 2.0 / 3.0)]);
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(
            line,
            r#"{"pairId":"p1","sentenceScore":0.123456789,"fScore":0.395061728,"N":1,"unitScores":[["dog",0.666666667]]}"#
        );
        let back = read_score_records(line.as_bytes()).unwrap();
        assert_eq!(back[0].n, 1);
        assert_eq!(back[0].unit_scores[0].0, "dog");
    }

    fn unit(v: &[f32]) -> Vec<f32> {
        let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn score_pairs_on_small_fixture() {
        let images = EmbeddingStore::new(
            3,
            [("i1", unit(&[1.0, 0.2, 0.0])), ("i2", unit(&[0.0, 1.0, 0.3]))],
            true,
        )
        .unwrap();
        let captions = EmbeddingStore::new(
            3,
            [
                ("c1", unit(&[1.0, 0.0, 0.0])),
                ("c2", unit(&[0.1, 1.0, 0.0])),
                ("c3", unit(&[0.0, 0.0, 1.0])),
                ("dog", unit(&[1.0, 0.5, 0.0])),
                ("grass", unit(&[0.0, 1.0, 1.0])),
                ("cat", unit(&[-1.0, 0.0, 0.2])),
            ],
            true,
        )
        .unwrap();
        let rec = |p: &str, i: &str, c: &str, t: &str| PairRecord {
            pair_id: p.into(),
            image_id: i.into(),
            caption_id: c.into(),
            caption_text: t.into(),
        };
        let manifest = PairManifest::new(vec![
            rec("p1", "i1", "c1", "a dog on the grass"),
            rec("p2", "i2", "c2", "a cat"),
            rec("p3", "i1", "c3", "running fast"),
        ])
        .unwrap();
        let c = MetricConfig::default();
        let out = score_pairs(&images, &captions, &manifest, TaggerModel::builtin(), &c).unwrap();
        let brute = |img: &str, cap: &str, nouns: &[&str]| {
            let i = images.get(img).unwrap();
            let mut terms = vec![clip_score(i, captions.get(cap).unwrap(), &c).unwrap()];
            for n in nouns {
                terms.push(clip_score(i, captions.get(n).unwrap(), &c).unwrap());
            }
            terms.iter().sum::<f64>() / terms.len() as f64
        };
        let expected = [
            brute("i1", "c1", &["dog", "grass"]),
            brute("i2", "c2", &["cat"]),
            brute("i1", "c3", &[]),
        ];
        assert_eq!(out.iter().map(|r| r.pair_id.as_str()).collect::<Vec<_>>(), ["p1", "p2", "p3"]);
        for (r, e) in out.iter().zip(expected) {
            assert!((r.f_score - e).abs() <= 1e-6 * e.abs().max(1e-12));
        }
        assert_eq!(out[2].n, 0);
        assert_eq!(out[2].f_score, out[2].sentence_score);

        let bad = PairManifest::new(vec![rec("px", "nope", "c1", "a dog")]).unwrap();
        match score_pairs(&images, &captions, &bad, TaggerModel::builtin(), &c) {
            Err(MetricError::UnknownId { pair_id, ids }) => {
                assert_eq!(pair_id, "px");
                assert_eq!(ids, ["nope"]);
            }
            other => panic!("{other:?}"),
        }
        let missing = PairManifest::new(vec![rec("pm", "i1", "c1", "a racquet and a dog")]).unwrap();
        match score_pairs(&images, &captions, &missing, TaggerModel::builtin(), &c) {
            Err(MetricError::UnknownId { ids, .. }) => assert_eq!(ids, ["racquet"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_w_is_rejected() {
        assert!(cfg(0.0).validate().is_err());
        assert!(cfg(f64::NAN).validate().is_err());
        assert!(cfg(7.0).validate().is_ok());
    }
}
