"""Tag raw sentences with the reference parser and emit the tagger corpus format.

Usage: python oracle_tag.py MODEL_DIR INPUT.txt OUTPUT.tsv [--max-tokens N]

Output: one `surface<TAB>TAG` line per token, sentences separated by a blank
line, each sentence preceded by a `# text = ...` comment carrying the raw text.
Tags are mapped onto the reduced universal tag set used by the Rust tagger.
"""

import argparse

import spacy

TAG_MAP = {
    "CCONJ": "CONJ",
    "SCONJ": "CONJ",
    "INTJ": "X",
    "SYM": "X",
}
KEEP = {"NOUN", "PROPN", "VERB", "AUX", "ADJ", "DET", "ADP", "PRON", "NUM",
        "CONJ", "PART", "PUNCT", "ADV", "X"}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("input")
    ap.add_argument("output")
    ap.add_argument("--max-tokens", type=int, default=0)
    args = ap.parse_args()

    nlp = spacy.load(args.model)
    total = 0
    with open(args.input, encoding="utf-8") as f:
        lines = [l.strip() for l in f if l.strip()]
    with open(args.output, "w", encoding="utf-8") as out:
        for text in lines:
            if args.max_tokens and total >= args.max_tokens:
                break
            doc = nlp(text)
            out.write(f"# text = {text}\n")
            for tok in doc:
                if tok.is_space:
                    continue
                tag = TAG_MAP.get(tok.pos_, tok.pos_)
                if tag not in KEEP:
                    tag = "X"
                out.write(f"{tok.text}\t{tag}\n")
                total += 1
            out.write("\n")
    print(f"wrote {total} tokens")


if __name__ == "__main__":
    main()
