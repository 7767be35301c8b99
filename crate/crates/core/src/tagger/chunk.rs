//! Unit extraction over tagged tokens.
//!
//! Noun phrases follow the pattern `DET? NUM? ADJ* (NOUN|PROPN)+`, matched
//! leftmost-longest and never overlapping.

use super::{tag, tokenize, PosTag, TaggerError, TaggerModel, TextUnit, Token, UnitKind};

/// Tokenizes, tags and extracts units of `kind` from `text`.
pub fn extract_units(
    model: &TaggerModel,
    text: &str,
    kind: UnitKind,
) -> Result<Vec<TextUnit>, TaggerError> {
    if !model.is_loaded() {
        return Err(TaggerError::ModelNotLoaded);
    }
    let tokens = tag(model, tokenize(text))?;
    Ok(units_from_tagged(text, &tokens, kind))
}

/// Extracts units from already tagged tokens. Untagged tokens never match.
/// NounPhrase surfaces are sliced from `text` using token byte spans.
pub fn units_from_tagged(text: &str, tokens: &[Token], kind: UnitKind) -> Vec<TextUnit> {
    let single = |pred: fn(PosTag) -> bool| {
        tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.tag.is_some_and(pred))
            .map(|(i, t)| TextUnit {
                surface: t.surface.clone(),
                kind,
                first_token: i,
                last_token: i,
            })
            .collect()
    };
    match kind {
        UnitKind::Noun => single(PosTag::is_nominal),
        UnitKind::Verb => single(|t| t == PosTag::Verb),
        UnitKind::NounPhrase => noun_phrases(text, tokens),
    }
}

fn noun_phrases(text: &str, tokens: &[Token]) -> Vec<TextUnit> {
    let tags: Vec<Option<PosTag>> = tokens.iter().map(|t| t.tag).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < tags.len() {
        match match_np(&tags, i) {
            Some(end) => {
                let (s, e) = (tokens[i].start, tokens[end].end);
                let surface = text
                    .get(s..e)
                    .map(str::to_string)
                    .unwrap_or_else(|| join_surfaces(&tokens[i..=end]));
                out.push(TextUnit {
                    surface,
                    kind: UnitKind::NounPhrase,
                    first_token: i,
                    last_token: end,
                });
                i = end + 1;
            }
            None => i += 1,
        }
    }
    out
}

fn join_surfaces(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Longest match of the phrase pattern starting at `i`; returns the index of
/// the last token.
fn match_np(tags: &[Option<PosTag>], i: usize) -> Option<usize> {
    let mut j = i;
    let at = |j: usize| tags.get(j).copied().flatten();
    if at(j) == Some(PosTag::Det) {
        j += 1;
    }
    if at(j) == Some(PosTag::Num) {
        j += 1;
    }
    while at(j) == Some(PosTag::Adj) {
        j += 1;
    }
    let head_start = j;
    while at(j).is_some_and(PosTag::is_nominal) {
        j += 1;
    }
    (j > head_start).then(|| j - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::tokens_from_words;

    fn tagged(pairs: &[(&str, PosTag)]) -> (String, Vec<Token>) {
        let words: Vec<&str> = pairs.iter().map(|(w, _)| *w).collect();
        let mut tokens = tokens_from_words(&words);
        for (t, (_, tag)) in tokens.iter_mut().zip(pairs) {
            t.tag = Some(*tag);
        }
        (words.join(" "), tokens)
    }

    fn surfaces(units: &[TextUnit]) -> Vec<&str> {
        units.iter().map(|u| u.surface.as_str()).collect()
    }

    use PosTag::*;

    #[test]
    fn noun_phrases_on_tagged_sequence() {
        let (text, toks) = tagged(&[("a", Det), ("dog", Noun), ("on", Adp), ("the", Det), ("grass", Noun)]);
        let units = units_from_tagged(&text, &toks, UnitKind::NounPhrase);
        assert_eq!(surfaces(&units), ["a dog", "the grass"]);
        assert_eq!((units[1].first_token, units[1].last_token), (3, 4));
    }

    #[test]
    fn phrase_pattern_is_leftmost_longest() {
        let (text, toks) = tagged(&[
            ("the", Det),
            ("two", Num),
            ("big", Adj),
            ("red", Adj),
            ("tennis", Noun),
            ("racquets", Noun),
            ("the", Det),
            ("big", Adj),
            ("on", Adp),
            ("Paris", Propn),
        ]);
        let units = units_from_tagged(&text, &toks, UnitKind::NounPhrase);
        assert_eq!(surfaces(&units), ["the two big red tennis racquets", "Paris"]);
    }

    #[test]
    fn nouns_keep_duplicates_and_verbs_skip_aux() {
        let (text, toks) = tagged(&[
            ("a", Det),
            ("dog", Noun),
            ("is", Aux),
            ("chasing", Verb),
            ("a", Det),
            ("dog", Noun),
            ("near", Adp),
            ("John", Propn),
            ("it", Pron),
            ("two", Num),
        ]);
        let nouns = units_from_tagged(&text, &toks, UnitKind::Noun);
        assert_eq!(surfaces(&nouns), ["dog", "dog", "John"]);
        let verbs = units_from_tagged(&text, &toks, UnitKind::Verb);
        assert_eq!(surfaces(&verbs), ["chasing"]);
    }

    #[test]
    fn builtin_model_on_reference_captions() {
        let m = TaggerModel::builtin();
        let units = extract_units(
            m,
            "A lady and two children in the street playing with a tennis racquet",
            UnitKind::Noun,
        )
        .unwrap();
        assert_eq!(surfaces(&units), ["lady", "children", "street", "tennis", "racquet"]);
        let nps = extract_units(m, "a dog on the grass", UnitKind::NounPhrase).unwrap();
        assert_eq!(surfaces(&nps), ["a dog", "the grass"]);
        assert!(extract_units(m, "run", UnitKind::Noun).unwrap().is_empty());
    }

    #[test]
    fn builtin_tags_simple_sentence() {
        let m = TaggerModel::builtin();
        let toks = tag(m, tokenize("a dog on the grass")).unwrap();
        let tags: Vec<PosTag> = toks.iter().map(|t| t.tag.unwrap()).collect();
        assert_eq!(tags, [Det, Noun, Adp, Det, Noun]);
    }

    #[test]
    fn unloaded_model_errors() {
        let m = TaggerModel::default();
        assert!(matches!(
            extract_units(&m, "a dog", UnitKind::Noun),
            Err(TaggerError::ModelNotLoaded)
        ));
    }
}
