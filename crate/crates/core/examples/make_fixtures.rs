//! Regenerates the synthetic hallucination benchmark under tests/fixtures/.
//!
//! Each set has an image built from two noun vectors. The gold caption names
//! those two nouns; one distractor adds a third noun unrelated to the image,
//! the other swaps the second noun for an unrelated one. All candidates of a
//! set share one caption vector, so sentence-level scores tie exactly.
//!
//! Expected accuracies are computed here by direct f64 arithmetic on the
//! stored f32 vectors and the intended noun lists, and written to
//! `synthetic_expected.json`.
//!
//! cargo run --example make_fixtures

use std::path::PathBuf;

use fgrain::benchmark::{write_candidate_sets, Candidate, CandidateSet};
use fgrain::store::{write_store, PairManifest, PairRecord};
use fgrain::tagger::{extract_units, TaggerModel, UnitKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const DIM: usize = 64;
const SETS: usize = 50;
const POOL: usize = 40;
const SEED: u64 = 20240611;
const W: f64 = 2.5;

const NOUNS: &[&str] = &[
    "dog", "cat", "man", "woman", "table", "chair", "car", "bus", "horse", "bird", "plate", "pizza", "bench",
    "boat", "truck", "train", "clock", "bed", "laptop", "cup", "bowl", "banana", "sandwich", "umbrella", "kite",
    "giraffe", "elephant", "zebra", "sheep", "cow", "bicycle", "couch", "phone", "book", "vase", "sink",
];

fn unit_vec(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    normalize(v)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
    let na = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn clip(a: &[f32], b: &[f32]) -> f64 {
    W * cos(a, b).max(0.0)
}

fn first_max(xs: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let model = TaggerModel::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let noun_vecs: Vec<Vec<f32>> = NOUNS.iter().map(|_| to_f32(&unit_vec(&mut rng))).collect();
    let mut images = Vec::new();
    let mut captions = Vec::new();
    let mut sets = Vec::new();
    let mut clip_choices = Vec::new();
    let mut fclip_choices = Vec::new();

    for i in 0..SETS {
        // four distinct nouns: two depicted, two unrelated
        let mut picks = Vec::new();
        while picks.len() < 4 {
            let k = rng.gen_range(0..NOUNS.len());
            if !picks.contains(&k) {
                picks.push(k);
            }
        }
        let (a, b, h1, h2) = (picks[0], picks[1], picks[2], picks[3]);
        let noise = unit_vec(&mut rng);
        let img: Vec<f64> = (0..DIM)
            .map(|d| noun_vecs[a][d] as f64 + noun_vecs[b][d] as f64 + 0.2 * noise[d])
            .collect();
        let img = normalize(img);
        // caption vector: fixed angle to the image, random orthogonal part
        let r = unit_vec(&mut rng);
        let proj: f64 = r.iter().zip(&img).map(|(x, y)| x * y).sum();
        let orth = normalize(r.iter().zip(&img).map(|(x, y)| x - proj * y).collect());
        let cap: Vec<f64> = img.iter().zip(&orth).map(|(x, y)| 0.3 * x + 0.95 * y).collect();
        let img32 = to_f32(&img);
        let cap32 = to_f32(&normalize(cap));

        let gold = i % 3;
        let gold_text = (format!("a {} next to a {}", NOUNS[a], NOUNS[b]), vec![a, b]);
        let added = (
            format!("a {} next to a {} and a {}", NOUNS[a], NOUNS[b], NOUNS[h1]),
            vec![a, b, h1],
        );
        let swapped = (format!("a {} next to a {}", NOUNS[a], NOUNS[h2]), vec![a, h2]);
        let mut texts = vec![added, swapped];
        texts.insert(gold, gold_text);

        let image_id = format!("img-{i:03}");
        let mut candidates = Vec::new();
        let mut clip_scores = Vec::new();
        let mut fclip_scores = Vec::new();
        for (c, (text, nouns)) in texts.iter().enumerate() {
            let got: Vec<String> = extract_units(model, text, UnitKind::Noun)
                .unwrap()
                .iter()
                .map(|u| u.scoring_text())
                .collect();
            let want: Vec<String> = nouns.iter().map(|&k| NOUNS[k].to_string()).collect();
            assert_eq!(got, want, "tagger disagrees on {text:?}");
            let caption_id = format!("cap-{i:03}-{c}");
            captions.push((caption_id.clone(), cap32.clone()));
            candidates.push(Candidate {
                caption_id,
                text: text.clone(),
            });
            let s = clip(&img32, &cap32);
            let total = s + nouns.iter().map(|&k| clip(&img32, &noun_vecs[k])).sum::<f64>();
            clip_scores.push(s);
            fclip_scores.push(total / (nouns.len() + 1) as f64);
        }
        clip_choices.push(first_max(&clip_scores));
        fclip_choices.push(first_max(&fclip_scores));
        images.push((image_id.clone(), img32));
        sets.push(CandidateSet {
            image_id,
            gold_index: gold,
            candidates,
        });
    }

    let pool: Vec<(String, Vec<f32>)> = (0..POOL)
        .map(|k| (format!("pool-{k:02}"), to_f32(&unit_vec(&mut rng))))
        .collect();
    let units: Vec<(String, Vec<f32>)> = NOUNS
        .iter()
        .zip(&noun_vecs)
        .map(|(n, v)| (n.to_string(), v.clone()))
        .collect();

    write_store(dir.join("synthetic_img.fgrn"), DIM, images, true).unwrap();
    write_store(dir.join("synthetic_txt.fgrn"), DIM, captions, true).unwrap();
    write_store(dir.join("synthetic_units.fgrn"), DIM, units, true).unwrap();
    write_store(dir.join("synthetic_pool.fgrn"), DIM, pool, true).unwrap();
    let f = std::fs::File::create(dir.join("synthetic.cset")).unwrap();
    write_candidate_sets(std::io::BufWriter::new(f), &sets).unwrap();

    // first ten gold pairs, for the scoring and filtering pipeline
    let records = sets
        .iter()
        .take(10)
        .map(|s| {
            let c = &s.candidates[s.gold_index];
            PairRecord {
                pair_id: format!("pair-{}", &s.image_id[4..]),
                image_id: s.image_id.clone(),
                caption_id: c.caption_id.clone(),
                caption_text: c.text.clone(),
            }
        })
        .collect();
    PairManifest::new(records)
        .unwrap()
        .save(dir.join("synthetic_pairs.jsonl"))
        .unwrap();

    let correct = |choices: &[usize]| choices.iter().zip(&sets).filter(|(c, s)| **c == s.gold_index).count();
    let (fc, cc) = (correct(&fclip_choices), correct(&clip_choices));
    let expected = json!({
        "sets": SETS,
        "seed": SEED,
        "w": W,
        "fclipCorrect": fc,
        "clipCorrect": cc,
        "fclipAccuracyPct": 100.0 * fc as f64 / SETS as f64,
        "clipAccuracyPct": 100.0 * cc as f64 / SETS as f64,
        "fclipChoices": fclip_choices,
        "clipChoices": clip_choices,
    });
    std::fs::write(
        dir.join("synthetic_expected.json"),
        serde_json::to_string_pretty(&expected).unwrap() + "\n",
    )
    .unwrap();
    println!("fclip {fc}/{SETS}, clip {cc}/{SETS}");
}
