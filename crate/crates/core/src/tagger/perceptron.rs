//! Averaged-perceptron sequence tagger.
//!
//! Greedy left-to-right decoding over a sparse feature set (word identity,
//! affixes, shape and the two previous predicted tags). Weights are averaged
//! over every update step. Frequent, unambiguous words bypass the classifier
//! through a tag dictionary.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PosTag, TaggerError, Token};

const N_TAGS: usize = PosTag::ALL.len();
const MODEL_FORMAT: &str = "fgrain-tagger";
const TAGDICT_MIN_FREQ: usize = 20;
const TAGDICT_MIN_RATIO: f64 = 0.97;
const START: [&str; 2] = ["-START-", "-START2-"];
const END: [&str; 2] = ["-END-", "-END2-"];

static BUILTIN_MODEL: &str = include_str!("../../data/tagger_model.json");
static BUILTIN: OnceLock<TaggerModel> = OnceLock::new();

/// A sentence from a tagged corpus. Tags are kept as strings so that
/// training can report tags outside the tag set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaggedSentence {
    pub text: Option<String>,
    pub tokens: Vec<(String, String)>,
}

impl TaggedSentence {
    pub fn new<S: Into<String>, T: Into<String>>(tokens: impl IntoIterator<Item = (S, T)>) -> Self {
        TaggedSentence {
            text: None,
            tokens: tokens
                .into_iter()
                .map(|(s, t)| (s.into(), t.into()))
                .collect(),
        }
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|(w, _)| w.as_str()).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelFile {
    format: String,
    version: String,
    tags: Vec<PosTag>,
    default_tag: PosTag,
    tag_dict: BTreeMap<String, PosTag>,
    word_tags: BTreeMap<String, PosTag>,
    weights: BTreeMap<String, Vec<(u8, f32)>>,
}

/// A trained tagger. Read-only after construction and safe to share.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggerModel {
    version: String,
    tags: Vec<PosTag>,
    default_tag: Option<PosTag>,
    tag_dict: HashMap<String, PosTag>,
    word_tags: HashMap<String, PosTag>,
    weights: HashMap<String, Vec<(u8, f32)>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of sentences held out from training for evaluation.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            seed: 0,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub train_sentences: usize,
    pub heldout_sentences: usize,
    /// Token accuracy of the averaged model on the training sentences.
    pub train_accuracy: f64,
    /// Token accuracy on held-out sentences, if any were held out.
    pub heldout_accuracy: Option<f64>,
}

impl TaggerModel {
    /// The model shipped with the crate, parsed on first use.
    pub fn builtin() -> &'static TaggerModel {
        BUILTIN.get_or_init(|| {
            TaggerModel::from_json(BUILTIN_MODEL).expect("embedded tagger model is valid")
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn is_loaded(&self) -> bool {
        !self.tags.is_empty()
    }

    pub fn tag_set(&self) -> &[PosTag] {
        &self.tags
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    /// Most frequent training tag for `word`, if the word was seen.
    pub fn most_frequent_tag(&self, word: &str) -> Option<PosTag> {
        self.word_tags.get(word).copied()
    }

    pub fn from_json(text: &str) -> Result<Self, TaggerError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| TaggerError::MalformedModel(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(TaggerError::MalformedModel(format!(
                "unexpected format marker {:?}",
                file.format
            )));
        }
        if file.tags != PosTag::ALL {
            return Err(TaggerError::MalformedModel(
                "tag set differs from the supported tag set".into(),
            ));
        }
        for (feat, ws) in &file.weights {
            if let Some((i, _)) = ws.iter().find(|(i, _)| *i as usize >= N_TAGS) {
                return Err(TaggerError::MalformedModel(format!(
                    "feature {feat:?} references tag index {i}"
                )));
            }
        }
        Ok(TaggerModel {
            version: file.version,
            tags: file.tags,
            default_tag: Some(file.default_tag),
            tag_dict: file.tag_dict.into_iter().collect(),
            word_tags: file.word_tags.into_iter().collect(),
            weights: file.weights.into_iter().collect(),
        })
    }

    /// Serializes with sorted keys so identical models produce identical bytes.
    pub fn to_json(&self) -> Result<String, TaggerError> {
        let default_tag = self.default_tag.ok_or(TaggerError::ModelNotLoaded)?;
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: self.version.clone(),
            tags: self.tags.clone(),
            default_tag,
            tag_dict: self.tag_dict.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            word_tags: self.word_tags.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            weights: self
                .weights
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        };
        serde_json::to_string(&file).map_err(|e| TaggerError::MalformedModel(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaggerError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| TaggerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TaggerError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|source| TaggerError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Tags a sequence of words.
    pub fn tag_words<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<PosTag>, TaggerError> {
        if !self.is_loaded() {
            return Err(TaggerError::ModelNotLoaded);
        }
        let context = build_context(words);
        let mut prev = START[0].to_string();
        let mut prev2 = START[1].to_string();
        let mut out = Vec::with_capacity(words.len());
        let mut feats = Vec::with_capacity(24);
        for (i, word) in words.iter().enumerate() {
            let word = word.as_ref();
            let tag = match self.tag_dict.get(word) {
                Some(&t) => t,
                None => {
                    features(i, word, &context, &prev, &prev2, &mut feats);
                    self.predict(word, &feats)
                }
            };
            prev2 = std::mem::replace(&mut prev, tag.as_str().to_string());
            out.push(tag);
        }
        Ok(out)
    }

    fn scores(&self, feats: &[String]) -> [f64; N_TAGS] {
        let mut scores = [0.0f64; N_TAGS];
        for f in feats {
            if let Some(ws) = self.weights.get(f) {
                for &(i, w) in ws {
                    scores[i as usize] += f64::from(w);
                }
            }
        }
        scores
    }

    fn predict(&self, word: &str, feats: &[String]) -> PosTag {
        let scores = self.scores(feats);
        choose(&scores, self.word_tags.get(word).copied(), self.default_tag)
    }
}

/// Argmax over tag scores. Among tied maxima the word's most frequent tag
/// wins, then the corpus-wide default tag, then the lowest tag index.
fn choose(scores: &[f64; N_TAGS], word_tag: Option<PosTag>, default: Option<PosTag>) -> PosTag {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for preferred in [word_tag, default].into_iter().flatten() {
        if scores[preferred.index()] == best {
            return preferred;
        }
    }
    let i = scores.iter().position(|&s| s == best).unwrap_or(0);
    PosTag::ALL[i]
}

/// Tags `tokens` in place and returns them.
pub fn tag(model: &TaggerModel, mut tokens: Vec<Token>) -> Result<Vec<Token>, TaggerError> {
    let words: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
    let tags = model.tag_words(&words)?;
    for (t, tag) in tokens.iter_mut().zip(tags) {
        t.tag = Some(tag);
    }
    Ok(tokens)
}

fn normalize(word: &str) -> String {
    let first = word.chars().next();
    if word.contains('-') && first != Some('-') {
        "!HYPHEN".to_string()
    } else if word.len() == 4 && word.chars().all(|c| c.is_ascii_digit()) {
        "!YEAR".to_string()
    } else if first.is_some_and(|c| c.is_ascii_digit()) {
        "!DIGITS".to_string()
    } else {
        word.to_lowercase()
    }
}

fn shape(word: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in word.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if last != Some(s) {
            out.push(s);
            last = Some(s);
        }
    }
    out
}

fn suffix(word: &str, n: usize) -> &str {
    let start = word
        .char_indices()
        .rev()
        .nth(n.saturating_sub(1))
        .map_or(0, |(i, _)| i);
    &word[start..]
}

fn prefix(word: &str, n: usize) -> &str {
    let end = word.char_indices().nth(n).map_or(word.len(), |(i, _)| i);
    &word[..end]
}

fn build_context<S: AsRef<str>>(words: &[S]) -> Vec<String> {
    let mut ctx = Vec::with_capacity(words.len() + 4);
    ctx.extend(START.iter().map(|s| s.to_string()));
    ctx.extend(words.iter().map(|w| normalize(w.as_ref())));
    ctx.extend(END.iter().map(|s| s.to_string()));
    ctx
}

fn features(
    i: usize,
    raw: &str,
    context: &[String],
    prev: &str,
    prev2: &str,
    out: &mut Vec<String>,
) {
    out.clear();
    let c = i + 2;
    let word = &context[c];
    out.push("bias".to_string());
    out.push(format!("w {word}"));
    out.push(format!("suf3 {}", suffix(word, 3)));
    out.push(format!("suf2 {}", suffix(word, 2)));
    out.push(format!("pre1 {}", prefix(word, 1)));
    out.push(format!("pre3 {}", prefix(word, 3)));
    out.push(format!("shape {}", shape(raw)));
    out.push(format!(
        "cap {} {}",
        raw.chars().next().is_some_and(char::is_uppercase),
        i == 0
    ));
    out.push(format!("t-1 {prev}"));
    out.push(format!("t-2 {prev2}"));
    out.push(format!("t-1 t-2 {prev} {prev2}"));
    out.push(format!("t-1 w {prev} {word}"));
    out.push(format!("w-1 {}", context[c - 1]));
    out.push(format!("suf3-1 {}", suffix(&context[c - 1], 3)));
    out.push(format!("w-2 {}", context[c - 2]));
    out.push(format!("w+1 {}", context[c + 1]));
    out.push(format!("suf3+1 {}", suffix(&context[c + 1], 3)));
    out.push(format!("w+2 {}", context[c + 2]));
    out.push(format!("w w+1 {word} {}", context[c + 1]));
}

#[derive(Clone)]
struct FeatureState {
    weights: [f32; N_TAGS],
    totals: [f64; N_TAGS],
    stamps: [u64; N_TAGS],
}

impl FeatureState {
    fn new() -> Self {
        FeatureState {
            weights: [0.0; N_TAGS],
            totals: [0.0; N_TAGS],
            stamps: [0; N_TAGS],
        }
    }

    fn bump(&mut self, tag: usize, delta: f32, now: u64) {
        self.totals[tag] += (now - self.stamps[tag]) as f64 * f64::from(self.weights[tag]);
        self.stamps[tag] = now;
        self.weights[tag] += delta;
    }
}

struct Trainer {
    state: HashMap<String, FeatureState>,
    instances: u64,
}

impl Trainer {
    fn scores(&self, feats: &[String]) -> [f64; N_TAGS] {
        let mut scores = [0.0f64; N_TAGS];
        for f in feats {
            if let Some(st) = self.state.get(f) {
                for (s, w) in scores.iter_mut().zip(st.weights.iter()) {
                    *s += f64::from(*w);
                }
            }
        }
        scores
    }

    fn update(&mut self, truth: PosTag, guess: PosTag, feats: &[String]) {
        self.instances += 1;
        if truth == guess {
            return;
        }
        let now = self.instances;
        for f in feats {
            let st = self
                .state
                .entry(f.clone())
                .or_insert_with(FeatureState::new);
            st.bump(truth.index(), 1.0, now);
            st.bump(guess.index(), -1.0, now);
        }
    }

    fn averaged(self) -> HashMap<String, Vec<(u8, f32)>> {
        let now = self.instances.max(1);
        let mut out = HashMap::with_capacity(self.state.len());
        for (feat, st) in self.state {
            let mut ws = Vec::new();
            for t in 0..N_TAGS {
                let total = st.totals[t] + (now - st.stamps[t]) as f64 * f64::from(st.weights[t]);
                let avg = (total / now as f64) as f32;
                if avg.abs() >= 1e-4 {
                    ws.push((t as u8, avg));
                }
            }
            if !ws.is_empty() {
                out.insert(feat, ws);
            }
        }
        out
    }
}

/// Trains a tagger. Training order is shuffled every epoch with a seeded RNG,
/// so equal inputs and seed yield identical models.
pub fn train_tagger(
    corpus: &[TaggedSentence],
    cfg: &TrainConfig,
) -> Result<(TaggerModel, TrainReport), TaggerError> {
    if corpus.is_empty() || corpus.iter().all(|s| s.tokens.is_empty()) {
        return Err(TaggerError::EmptyCorpus);
    }
    let mut sentences: Vec<(Vec<&str>, Vec<PosTag>)> = Vec::with_capacity(corpus.len());
    for (n, s) in corpus.iter().enumerate() {
        let mut words = Vec::with_capacity(s.tokens.len());
        let mut tags = Vec::with_capacity(s.tokens.len());
        for (w, t) in &s.tokens {
            let tag = t
                .parse::<PosTag>()
                .map_err(|tag| TaggerError::UnknownTagInCorpus { tag, sentence: n })?;
            words.push(w.as_str());
            tags.push(tag);
        }
        sentences.push((words, tags));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fraction = cfg.holdout_fraction.clamp(0.0, 0.9);
    let n_heldout = (sentences.len() as f64 * fraction).floor() as usize;
    let heldout = if n_heldout > 0 {
        sentences.shuffle(&mut rng);
        sentences.split_off(sentences.len() - n_heldout)
    } else {
        Vec::new()
    };

    let (tag_dict, word_tags, default_tag) = lexicon(&sentences);
    let mut trainer = Trainer {
        state: HashMap::new(),
        instances: 0,
    };
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut feats = Vec::with_capacity(24);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &si in &order {
            let (words, tags) = &sentences[si];
            let context = build_context(words);
            let mut prev = START[0].to_string();
            let mut prev2 = START[1].to_string();
            for (i, (&word, &truth)) in words.iter().zip(tags).enumerate() {
                let guess = match tag_dict.get(word) {
                    Some(&t) => t,
                    None => {
                        features(i, word, &context, &prev, &prev2, &mut feats);
                        let guess = choose(
                            &trainer.scores(&feats),
                            word_tags.get(word).copied(),
                            Some(default_tag),
                        );
                        trainer.update(truth, guess, &feats);
                        guess
                    }
                };
                prev2 = std::mem::replace(&mut prev, guess.as_str().to_string());
            }
        }
    }

    let model = TaggerModel {
        version: format!(
            "ap1 epochs={} seed={} sentences={}",
            cfg.epochs,
            cfg.seed,
            sentences.len()
        ),
        tags: PosTag::ALL.to_vec(),
        default_tag: Some(default_tag),
        tag_dict,
        word_tags,
        weights: trainer.averaged(),
    };
    let train_accuracy = accuracy(&model, &sentences)?;
    let heldout_accuracy = if heldout.is_empty() {
        None
    } else {
        Some(accuracy(&model, &heldout)?)
    };
    let report = TrainReport {
        train_sentences: sentences.len(),
        heldout_sentences: heldout.len(),
        train_accuracy,
        heldout_accuracy,
    };
    Ok((model, report))
}

type Lexicon = (HashMap<String, PosTag>, HashMap<String, PosTag>, PosTag);

fn lexicon(sentences: &[(Vec<&str>, Vec<PosTag>)]) -> Lexicon {
    let mut counts: HashMap<&str, [usize; N_TAGS]> = HashMap::new();
    let mut overall = [0usize; N_TAGS];
    for (words, tags) in sentences {
        for (&w, &t) in words.iter().zip(tags) {
            counts.entry(w).or_insert([0; N_TAGS])[t.index()] += 1;
            overall[t.index()] += 1;
        }
    }
    let argmax = |c: &[usize; N_TAGS]| {
        // first maximum keeps ties on the lower tag index
        let mut best = 0;
        for i in 1..N_TAGS {
            if c[i] > c[best] {
                best = i;
            }
        }
        best
    };
    let mut tag_dict = HashMap::new();
    let mut word_tags = HashMap::with_capacity(counts.len());
    for (w, c) in &counts {
        let best = argmax(c);
        let n: usize = c.iter().sum();
        word_tags.insert(w.to_string(), PosTag::ALL[best]);
        if n >= TAGDICT_MIN_FREQ && c[best] as f64 / n as f64 >= TAGDICT_MIN_RATIO {
            tag_dict.insert(w.to_string(), PosTag::ALL[best]);
        }
    }
    (tag_dict, word_tags, PosTag::ALL[argmax(&overall)])
}

fn accuracy(
    model: &TaggerModel,
    sentences: &[(Vec<&str>, Vec<PosTag>)],
) -> Result<f64, TaggerError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for (words, gold) in sentences {
        let predicted = model.tag_words(words)?;
        correct += predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
        total += gold.len();
    }
    Ok(if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    })
}

/// Reads `surface<TAB>TAG` lines; blank lines separate sentences and
/// `# text = ...` lines carry the raw sentence.
pub fn read_tagged_corpus<R: BufRead>(reader: R) -> Result<Vec<TaggedSentence>, TaggerError> {
    let mut out = Vec::new();
    let mut current = TaggedSentence::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TaggerError::MalformedCorpus {
            line: n + 1,
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            if !current.tokens.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            continue;
        }
        if let Some(text) = line.strip_prefix("# text = ") {
            current.text = Some(text.to_string());
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let (surface, tag) = line
            .split_once('\t')
            .ok_or_else(|| TaggerError::MalformedCorpus {
                line: n + 1,
                detail: "expected surface<TAB>tag".into(),
            })?;
        current.tokens.push((surface.to_string(), tag.trim().to_string()));
    }
    if !current.tokens.is_empty() {
        out.push(current);
    }
    Ok(out)
}

pub fn write_tagged_corpus<W: Write>(
    mut w: W,
    sentences: &[TaggedSentence],
) -> std::io::Result<()> {
    for s in sentences {
        if let Some(text) = &s.text {
            writeln!(w, "# text = {text}")?;
        }
        for (surface, tag) in &s.tokens {
            writeln!(w, "{surface}\t{tag}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(pairs: &[(&str, &str)]) -> TaggedSentence {
        TaggedSentence::new(pairs.iter().copied())
    }

    fn toy_corpus() -> Vec<TaggedSentence> {
        vec![
            sent(&[("a", "DET"), ("dog", "NOUN"), ("runs", "VERB"), (".", "PUNCT")]),
            sent(&[("the", "DET"), ("cat", "NOUN"), ("sleeps", "VERB")]),
            sent(&[("dogs", "NOUN"), ("run", "VERB")]),
            sent(&[("a", "DET"), ("red", "ADJ"), ("car", "NOUN"), ("on", "ADP"), ("the", "DET"), ("road", "NOUN")]),
            sent(&[("she", "PRON"), ("is", "AUX"), ("reading", "VERB"), ("a", "DET"), ("book", "NOUN")]),
            sent(&[("two", "NUM"), ("birds", "NOUN"), ("fly", "VERB"), ("away", "ADV")]),
            sent(&[("John", "PROPN"), ("and", "CONJ"), ("Mary", "PROPN"), ("walk", "VERB")]),
            sent(&[("the", "DET"), ("run", "NOUN"), ("was", "AUX"), ("long", "ADJ")]),
            sent(&[("he", "PRON"), ("wants", "VERB"), ("to", "PART"), ("run", "VERB")]),
            sent(&[("a", "DET"), ("dog", "NOUN"), ("in", "ADP"), ("the", "DET"), ("park", "NOUN"), ("!", "PUNCT")]),
        ]
    }

    #[test]
    fn toy_corpus_is_learned_perfectly() {
        let corpus = toy_corpus();
        let cfg = TrainConfig {
            epochs: 5,
            seed: 3,
            holdout_fraction: 0.0,
        };
        let (model, report) = train_tagger(&corpus, &cfg).unwrap();
        assert_eq!(report.heldout_accuracy, None);
        assert_eq!(report.train_accuracy, 1.0);
        for s in &corpus {
            let tags = model.tag_words(&s.words()).unwrap();
            let gold: Vec<PosTag> = s.tokens.iter().map(|(_, t)| t.parse().unwrap()).collect();
            assert_eq!(tags, gold);
        }
    }

    #[test]
    fn zero_epochs_falls_back_to_most_frequent_tag() {
        let corpus = toy_corpus();
        let cfg = TrainConfig {
            epochs: 0,
            seed: 0,
            holdout_fraction: 0.0,
        };
        let (model, _) = train_tagger(&corpus, &cfg).unwrap();
        assert_eq!(model.feature_count(), 0);
        // "run" is VERB twice and NOUN once
        let tags = model.tag_words(&["the", "run", "dog", "unseen"]).unwrap();
        assert_eq!(tags, [PosTag::Det, PosTag::Verb, PosTag::Noun, PosTag::Noun]);
    }

    #[test]
    fn unknown_tag_is_reported() {
        let corpus = vec![sent(&[("a", "DET"), ("thing", "XYZ")])];
        match train_tagger(&corpus, &TrainConfig::default()) {
            Err(TaggerError::UnknownTagInCorpus { tag, sentence }) => {
                assert_eq!(tag, "XYZ");
                assert_eq!(sentence, 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(
            train_tagger(&[], &TrainConfig::default()),
            Err(TaggerError::EmptyCorpus)
        ));
    }

    #[test]
    fn training_is_deterministic_and_serialization_is_stable() {
        let corpus = toy_corpus();
        let cfg = TrainConfig {
            epochs: 4,
            seed: 11,
            holdout_fraction: 0.2,
        };
        let (a, ra) = train_tagger(&corpus, &cfg).unwrap();
        let (b, rb) = train_tagger(&corpus, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = TaggerModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn unloaded_model_refuses_to_tag() {
        let m = TaggerModel::default();
        assert!(matches!(m.tag_words(&["a"]), Err(TaggerError::ModelNotLoaded)));
    }

    #[test]
    fn empty_input_tags_to_empty() {
        let m = TaggerModel::builtin();
        assert!(m.tag_words::<&str>(&[]).unwrap().is_empty());
    }

    #[test]
    fn corpus_reader_round_trip() {
        let text = "# text = a dog\na\tDET\ndog\tNOUN\n\nruns\tVERB\n";
        let corpus = read_tagged_corpus(text.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].text.as_deref(), Some("a dog"));
        let mut out = Vec::new();
        write_tagged_corpus(&mut out, &corpus).unwrap();
        assert_eq!(read_tagged_corpus(out.as_slice()).unwrap(), corpus);
    }

    #[test]
    fn affix_helpers_respect_char_boundaries() {
        assert_eq!(suffix("café", 3), "afé");
        assert_eq!(suffix("ab", 3), "ab");
        assert_eq!(prefix("éclair", 1), "é");
        assert_eq!(shape("McDonald's"), "XxXx'x");
        assert_eq!(normalize("2019"), "!YEAR");
        assert_eq!(normalize("Dog"), "dog");
    }
}
