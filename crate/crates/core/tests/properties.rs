mod common;

use std::collections::{HashMap, HashSet};

use fgrain::benchmark::{argmax_first, noun_replacement_ablation, open_candidate_sets};
use fgrain::curation::{filter_bottom, overlap, rank_difference, rank_pairs, FilterMetric};
use fgrain::metric::{f_clip_score, MetricConfig, ScoreRecord, Scorer};
use fgrain::stats::{welch_t_test, GroupSummary};
use fgrain::store::{open_store, EmbeddingStore};
use fgrain::tagger::{tokenize, TaggerModel};
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, dim).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn tuple() -> impl Strategy<Value = (Vec<f32>, Vec<f32>, Vec<Vec<f32>>)> {
    (2usize..24).prop_flat_map(|d| (vector(d), vector(d), prop::collection::vec(vector(d), 0..8)))
}

fn scores() -> impl Strategy<Value = Vec<(String, f64)>> {
    prop::collection::vec(0u8..12, 1..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, s)| (format!("p{i:03}"), s as f64 / 4.0))
            .collect()
    })
}

proptest! {
    #[test]
    fn unit_order_does_not_matter((img, sent, units) in tuple(), rot in 0usize..8) {
        let cfg = MetricConfig::default();
        let a = f_clip_score(&img, &sent, &units, &cfg).unwrap();
        let mut shuffled = units.clone();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
        }
        let b = f_clip_score(&img, &sent, &shuffled, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn clamped_scores_lie_in_zero_w((img, sent, units) in tuple(), w in 0.1f64..10.0) {
        let cfg = MetricConfig::default().with_w(w);
        let f = f_clip_score(&img, &sent, &units, &cfg).unwrap();
        prop_assert!((0.0..=w + 1e-12).contains(&f));
    }

    #[test]
    fn ranks_are_a_permutation(s in scores()) {
        let ranks = rank_pairs(&s).unwrap();
        let mut r: Vec<usize> = ranks.iter().map(|x| x.1).collect();
        r.sort_unstable();
        prop_assert_eq!(r, (1..=s.len()).collect::<Vec<_>>());
        // lower score never ranks above a higher one
        for (a, ra) in s.iter().zip(&ranks) {
            for (b, rb) in s.iter().zip(&ranks) {
                if a.1 < b.1 {
                    prop_assert!(ra.1 < rb.1);
                }
            }
        }
    }

    #[test]
    fn rank_difference_is_antisymmetric(f in scores(), seed in any::<u64>()) {
        let c: Vec<(String, f64)> = f
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), ((i as u64).wrapping_mul(seed | 1) % 97) as f64))
            .collect();
        let fc = rank_difference(&f, &c, 5).unwrap();
        let cf = rank_difference(&c, &f, 5).unwrap();
        let back: HashMap<&str, i64> = cf.entries.iter().map(|e| (e.pair_id.as_str(), e.diff)).collect();
        for e in &fc.entries {
            prop_assert_eq!(e.diff, -back[e.pair_id.as_str()]);
        }
        prop_assert_eq!(fc.entries.iter().map(|e| e.diff).sum::<i64>(), 0);
        prop_assert!(fc.top_k.iter().all(|e| e.diff > 0) && fc.bottom_k.iter().all(|e| e.diff < 0));
    }

    #[test]
    fn filtering_nests_across_rates(s in scores(), r1 in 1.0f64..99.0, r2 in 1.0f64..99.0, seed in any::<u64>()) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let records: Vec<ScoreRecord> = s.iter().map(|(id, x)| ScoreRecord::new(id.clone(), *x, vec![])).collect();
        for (metric, seed) in [(FilterMetric::Clip, None), (FilterMetric::Random, Some(seed))] {
            let a = filter_bottom(&records, metric, lo, seed).unwrap();
            let b = filter_bottom(&records, metric, hi, seed).unwrap();
            let ra: HashSet<_> = a.removed_ids();
            prop_assert!(ra.is_subset(&b.removed_ids()));
            prop_assert_eq!(a.removed.len() + a.retained.len(), records.len());
        }
        let a = filter_bottom(&records, FilterMetric::Clip, lo, None).unwrap();
        let b = filter_bottom(&records, FilterMetric::Random, lo, Some(seed)).unwrap();
        prop_assert_eq!(overlap(&a, &b).unwrap(), overlap(&b, &a).unwrap());
    }

    #[test]
    fn store_round_trips(dim in 1usize..16, rows in prop::collection::vec(prop::collection::vec(any::<f32>(), 16), 0..12)) {
        let entries: Vec<(String, Vec<f32>)> = rows
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("id{i}"), v[..dim].iter().map(|x| if x.is_finite() { *x } else { 0.0 }).collect()))
            .collect();
        let store = EmbeddingStore::new(dim, entries, false).unwrap();
        let bytes = store.to_bytes();
        let back = EmbeddingStore::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn welch_swapping_groups_negates_t(a in prop::collection::vec(-5.0f64..5.0, 2..20), b in prop::collection::vec(-5.0f64..5.0, 2..20)) {
        let (ga, gb) = (GroupSummary::of(&a), GroupSummary::of(&b));
        let x = welch_t_test(&ga, &gb).unwrap();
        let y = welch_t_test(&gb, &ga).unwrap();
        prop_assert_eq!(x.t, -y.t);
        prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
    }

    #[test]
    fn argmax_picks_first_maximum(v in prop::collection::vec(0u8..5, 1..20)) {
        let s: Vec<f64> = v.iter().map(|x| *x as f64).collect();
        let i = argmax_first(&s);
        let max = s.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert_eq!(s[i], max);
        prop_assert!(s[..i].iter().all(|x| *x < max));
    }

    #[test]
    fn token_spans_cover_the_input(text in "[ a-zA-Z0-9,.'!-]{0,40}") {
        for t in tokenize(&text) {
            prop_assert_eq!(&text[t.start..t.end], t.surface.as_str());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ablation_is_reproducible(seed in any::<u64>()) {
        let f = common::fixture;
        let img = open_store(f("synthetic_img.fgrn")).unwrap();
        let txt = open_store(f("synthetic_txt.fgrn")).unwrap();
        let units = open_store(f("synthetic_units.fgrn")).unwrap();
        let pool = open_store(f("synthetic_pool.fgrn")).unwrap();
        let sets = open_candidate_sets(f("synthetic.cset")).unwrap();
        let scorer = Scorer::new(&img, &txt, TaggerModel::builtin(), MetricConfig::default())
            .unwrap()
            .with_unit_store(&units);
        let run = |rate| noun_replacement_ablation(&scorer, &sets, &pool, rate, seed, "s").unwrap();
        prop_assert_eq!(run(0.4), run(0.4));
        prop_assert_eq!(run(0.0).accuracy_pct, 100.0);
    }
}
