//! Rule-based English tokenizer.
//!
//! Whitespace splits chunks; punctuation is peeled off chunk edges, English
//! clitics (`n't`, `'s`, `'re`, ...) become their own tokens, hyphens between
//! alphanumerics are split out, and a number glued to a unit (`2.5kg`) is
//! separated. Surfaces are never case-folded.

use super::{PosTag, Token};

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "inc", "ltd",
    "jan", "feb", "aug", "sept", "oct", "nov", "dec", "approx",
];

const UNITS: &[&str] = &[
    "km", "m", "cm", "mm", "kg", "g", "mg", "lb", "lbs", "oz", "ml", "l", "gb", "mb", "tb", "kb",
    "hz", "khz", "mhz", "ghz", "mph", "kmh", "ft", "mi", "yd", "px", "k", "mp",
];

const CLITICS: &[&str] = &["'s", "'m", "'d", "'ll", "'re", "'ve"];

/// Splits `text` into tokens whose byte spans index into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut spans = Vec::new();
    let mut chunk_start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                split_chunk(text, s, i, &mut spans);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    if let Some(s) = chunk_start {
        split_chunk(text, s, text.len(), &mut spans);
    }
    spans
        .into_iter()
        .map(|(start, end)| Token {
            surface: text[start..end].to_string(),
            start,
            end,
            tag: None,
        })
        .collect()
}

/// Convenience for building tagged tokens from an already tokenized sentence
/// (byte spans assume single-space joining).
pub fn tokens_from_words<S: AsRef<str>>(words: &[S]) -> Vec<Token> {
    let mut pos = 0;
    words
        .iter()
        .map(|w| {
            let w = w.as_ref();
            let t = Token {
                surface: w.to_string(),
                start: pos,
                end: pos + w.len(),
                tag: None::<PosTag>,
            };
            pos += w.len() + 1;
            t
        })
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn split_chunk(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let mut s = start;
    let mut e = end;
    let mut suffixes = Vec::new();

    // prefixes
    while s < e {
        let c = text[s..e].chars().next().unwrap();
        if is_word_char(c) {
            break;
        }
        let len = if c == '.' {
            text[s..e].len() - text[s..e].trim_start_matches('.').len()
        } else {
            c.len_utf8()
        };
        out.push((s, s + len));
        s += len;
    }

    // suffixes, collected right-to-left
    while s < e {
        let core = &text[s..e];
        let c = core.chars().next_back().unwrap();
        if is_word_char(c) {
            break;
        }
        if c == '.' {
            let dots = core.len() - core.trim_end_matches('.').len();
            if dots > 1 {
                suffixes.push((e - dots, e));
                e -= dots;
                continue;
            }
            if keeps_final_period(&core[..core.len() - 1]) {
                break;
            }
        }
        suffixes.push((e - c.len_utf8(), e));
        e -= c.len_utf8();
    }

    if s < e {
        split_core(text, s, e, out);
    }
    out.extend(suffixes.into_iter().rev());
}

fn keeps_final_period(stem: &str) -> bool {
    if stem.is_empty() {
        return false;
    }
    let lower = stem.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // initialisms like "U.S" or "e.g"
    stem.contains('.')
        && stem
            .split('.')
            .all(|p| p.chars().count() <= 2 && p.chars().all(char::is_alphabetic))
}

fn split_core(text: &str, s: usize, e: usize, out: &mut Vec<(usize, usize)>) {
    let core = &text[s..e];

    // clitics
    let lower = core.to_lowercase().replace('\u{2019}', "'");
    if lower.len() == core.len() {
        if lower.ends_with("n't") && lower.len() > 3 {
            let cut = e - 3;
            split_core(text, s, cut, out);
            out.push((cut, e));
            return;
        }
        for clitic in CLITICS {
            if lower.ends_with(clitic) && lower.len() > clitic.len() {
                let cut = e - clitic.len();
                if text[s..cut].chars().all(is_word_char) {
                    split_core(text, s, cut, out);
                    out.push((cut, e));
                    return;
                }
            }
        }
    }

    // hyphen between alphanumerics
    let chars: Vec<(usize, char)> = core.char_indices().collect();
    for w in 1..chars.len().saturating_sub(1) {
        let (off, c) = chars[w];
        if c == '-' && is_word_char(chars[w - 1].1) && is_word_char(chars[w + 1].1) {
            let h = s + off;
            split_core(text, s, h, out);
            out.push((h, h + 1));
            split_core(text, h + 1, e, out);
            return;
        }
    }

    // number glued to a unit
    if let Some(split) = number_unit_split(core) {
        out.push((s, s + split));
        out.push((s + split, e));
        return;
    }

    out.push((s, e));
}

fn number_unit_split(core: &str) -> Option<usize> {
    let first = core.chars().next()?;
    if !first.is_ascii_digit() {
        return None;
    }
    let num_end = core.find(|c: char| !(c.is_ascii_digit() || c == '.' || c == ','))?;
    let unit = &core[num_end..];
    if unit.chars().all(|c| c.is_ascii_alphabetic()) && UNITS.contains(&unit.to_lowercase().as_str())
    {
        Some(num_end)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn splits_final_period() {
        let toks = surfaces("A lady and two children.");
        assert_eq!(toks.len(), 6);
        assert_eq!(toks.last().unwrap(), ".");
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t ").is_empty());
    }

    #[test]
    fn splits_commas() {
        assert_eq!(
            surfaces("tennis racquet, a car"),
            ["tennis", "racquet", ",", "a", "car"]
        );
    }

    #[test]
    fn clitics_and_abbreviations() {
        assert_eq!(
            surfaces("don't stop, it's Mr. Smith's dog."),
            ["do", "n't", "stop", ",", "it", "'s", "Mr.", "Smith", "'s", "dog", "."]
        );
        assert_eq!(surfaces("can't won't"), ["ca", "n't", "wo", "n't"]);
        assert_eq!(surfaces("parents' car"), ["parents", "'", "car"]);
    }

    #[test]
    fn hyphens_units_and_symbols() {
        assert_eq!(surfaces("cotton t-shirt"), ["cotton", "t", "-", "shirt"]);
        assert_eq!(surfaces("round-up"), ["round", "-", "up"]);
        assert_eq!(
            surfaces("U.S. 2.5kg 1,000 $5 50% (nice) end..."),
            ["U.S.", "2.5", "kg", "1,000", "$", "5", "50", "%", "(", "nice", ")", "end", "..."]
        );
        assert_eq!(surfaces("a52 250gb sat - 540"), ["a52", "250", "gb", "sat", "-", "540"]);
        assert_eq!(surfaces("horizon™ coil"), ["horizon", "™", "coil"]);
    }

    #[test]
    fn spans_reconstruct_input() {
        let text = "  A  café, \"quoted\"  t-shirt's\tend.  ";
        let toks = tokenize(text);
        let mut rebuilt = String::new();
        let mut pos = 0;
        for t in &toks {
            assert!(t.start < t.end);
            assert!(t.start >= pos);
            assert_eq!(&text[t.start..t.end], t.surface);
            rebuilt.push_str(&text[pos..t.start]);
            rebuilt.push_str(&t.surface);
            pos = t.end;
        }
        rebuilt.push_str(&text[pos..]);
        assert_eq!(rebuilt, text);
    }
}
