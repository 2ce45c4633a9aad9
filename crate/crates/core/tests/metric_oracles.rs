//! Every metric against a deliberately naive reimplementation.

use std::collections::HashMap;

use lexcom_core::color::LabColor;
use lexcom_core::context::{context_ease, ColorContext, Condition};
use lexcom_core::metrics::{
    denotations, informativeness_entropy, lexical_diversity, rarefied_diversity, semantic_drift,
    system_informativeness, word_spread, InformativenessTable, ProductionRecord,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;
const WORDS: [&str; 5] = ["red", "blue", "green", "teal", "sage"];

fn dist(x: (f64, f64, f64), y: (f64, f64, f64)) -> f64 {
    ((x.0 - y.0).powi(2) + (x.1 - y.1).powi(2) + (x.2 - y.2).powi(2)).sqrt()
}

fn tuple(c: LabColor) -> (f64, f64, f64) {
    (c.l, c.a, c.b)
}

/// Records drawn from a small chip pool so that repeats occur.
fn random_records(rng: &mut ChaCha8Rng) -> Vec<ProductionRecord> {
    let pool: Vec<LabColor> = (0..12)
        .map(|_| {
            LabColor::new(rng.random_range(0.0..100.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0))
        })
        .collect();
    let n = rng.random_range(5..40);
    (0..n)
        .map(|i| ProductionRecord {
            seed: 0,
            context_id: i,
            target: pool[rng.random_range(0..pool.len())],
            word: WORDS[rng.random_range(0..WORDS.len())].to_string(),
            ease: rng.random_range(0.0..80.0),
            condition: Condition::ALL[rng.random_range(0..3)],
        })
        .collect()
}

fn naive_chips(records: &[ProductionRecord], word: &str) -> Vec<(f64, f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for r in records.iter().filter(|r| r.word == word) {
        let t = tuple(r.target);
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn naive_spread(chips: &[(f64, f64, f64)]) -> Option<f64> {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..chips.len() {
        for j in 0..chips.len() {
            if i < j {
                total += dist(chips[i], chips[j]);
                pairs += 1;
            }
        }
    }
    (pairs > 0 && total > 0.0).then(|| total / pairs as f64)
}

fn naive_prototype(chips: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let n = chips.len() as f64;
    let s = chips.iter().fold((0.0, 0.0, 0.0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    (s.0 / n, s.1 / n, s.2 / n)
}

#[test]
fn spread_and_informativeness_match_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let records = random_records(&mut rng);
        let table = InformativenessTable::from_records(&records);
        for (word, d) in denotations(&records) {
            let chips = naive_chips(&records, &word);
            match naive_spread(&chips) {
                Some(s) => {
                    assert!((word_spread(&d).unwrap() - s).abs() < TOL);
                    assert!((table.get(&word).unwrap() - 1.0 / s).abs() < TOL);
                }
                None => assert!(table.get(&word).is_none()),
            }
        }
    }
}

#[test]
fn system_informativeness_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    for _ in 0..100 {
        let records = random_records(&mut rng);
        let iw: HashMap<&str, f64> =
            WORDS.iter().filter_map(|w| naive_spread(&naive_chips(&records, w)).map(|s| (*w, 1.0 / s))).collect();
        let used: Vec<f64> = records.iter().filter_map(|r| iw.get(r.word.as_str()).copied()).collect();
        if used.is_empty() {
            assert!(system_informativeness(&records).is_err());
            continue;
        }
        let expected = used.iter().sum::<f64>() / used.len() as f64;
        let got = system_informativeness(&records).unwrap();
        assert!((got - expected).abs() < TOL);
        let lo = used.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = used.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(got >= lo - TOL && got <= hi + TOL);
        checked += 1;
    }
    assert!(checked > 90);
}

#[test]
fn entropy_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let k = rng.random_range(1..8);
        let values: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
        let total: f64 = values.iter().sum();
        let expected: f64 = values.iter().map(|v| -(v / total) * (v / total).ln()).sum();
        assert!((informativeness_entropy(&values).unwrap() - expected).abs() < TOL);
        assert!(expected <= (k as f64).ln() + TOL);
    }
    let equal = vec![0.3; 6];
    assert!((informativeness_entropy(&equal).unwrap() - 6f64.ln()).abs() < TOL);
}

#[test]
fn drift_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let agent = random_records(&mut rng);
        let human = random_records(&mut rng);
        let mut ds = Vec::new();
        for w in WORDS {
            let (a, h) = (naive_chips(&agent, w), naive_chips(&human, w));
            if !a.is_empty() && !h.is_empty() {
                ds.push(dist(naive_prototype(&a), naive_prototype(&h)));
            }
        }
        match semantic_drift(&agent, &human) {
            Ok(d) => assert!((d - ds.iter().sum::<f64>() / ds.len() as f64).abs() < TOL),
            Err(_) => assert!(ds.is_empty()),
        }
    }
}

#[test]
fn ease_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let mut lab = || {
            LabColor::new(rng.random_range(0.0..100.0), rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0))
        };
        let ctx = ColorContext { id: 0, target: lab(), distractors: [lab(), lab()], condition: Condition::Far };
        let expected =
            dist(tuple(ctx.target), tuple(ctx.distractors[0])).min(dist(tuple(ctx.target), tuple(ctx.distractors[1])));
        assert!((context_ease(&ctx) - expected).abs() < TOL);
    }
}

#[test]
fn metrics_are_order_invariant_and_scale_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..30 {
        let records = random_records(&mut rng);
        let Ok(il) = system_informativeness(&records) else { continue };
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rng);
        assert!((system_informativeness(&shuffled).unwrap() - il).abs() < TOL);
        assert_eq!(lexical_diversity(&shuffled), lexical_diversity(&records));
        let doubled: Vec<ProductionRecord> = records
            .iter()
            .map(|r| ProductionRecord { target: r.target.scaled(2.0), ease: r.ease * 2.0, ..r.clone() })
            .collect();
        assert!((system_informativeness(&doubled).unwrap() - il / 2.0).abs() < TOL);
    }
}

#[test]
fn rarefied_diversity_matches_subset_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mut records = random_records(&mut rng);
        records.truncate(rng.random_range(1..=12));
        let n = records.len();
        let m = rng.random_range(1..=n);
        // Mean distinct-word count over every m-subset.
        let (mut total, mut subsets) = (0.0, 0.0);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != m {
                continue;
            }
            let words: std::collections::BTreeSet<&str> =
                (0..n).filter(|i| mask >> i & 1 == 1).map(|i| records[i].word.as_str()).collect();
            total += words.len() as f64;
            subsets += 1.0;
        }
        assert!((rarefied_diversity(&records, m) - total / subsets).abs() < TOL);
    }
    let records = random_records(&mut rng);
    assert_eq!(rarefied_diversity(&records, records.len()), lexical_diversity(&records) as f64);
}
