use lexcom_core::color::LabColor;
use lexcom_core::context::Condition;
use lexcom_core::metrics::ProductionRecord;
use lexcom_core::stats::{adaptation_observations, compare_slopes, fit_within_slope, SlopeObservation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `I = 0.5 + beta * E + seed offset + target offset + noise`.
fn planted(beta: f64, seeds: u64, n: usize, rng: &mut ChaCha8Rng) -> Vec<SlopeObservation> {
    let noise = Normal::new(0.0, 0.03).unwrap();
    let targets: Vec<f64> = (0..200).map(|_| rng.random_range(-0.1..0.1)).collect();
    let offsets: Vec<f64> = (0..seeds).map(|_| rng.random_range(-0.2..0.2)).collect();
    (0..n)
        .map(|i| {
            let seed = i as u64 % seeds;
            let t = rng.random_range(0..targets.len());
            let ease = rng.random_range(5.0..90.0);
            SlopeObservation {
                seed,
                target: [t as u64, 0, 0],
                informativeness: 0.5 + beta * ease + offsets[seed as usize] + targets[t] + noise.sample(rng),
                ease,
            }
        })
        .collect()
}

#[test]
fn planted_slopes_recovered_within_two_se() {
    for (k, beta) in [-0.008, -0.005, 0.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10 + k as u64);
        let fit = fit_within_slope(&planted(beta, 5, 5000, &mut rng)).unwrap();
        assert!((fit.beta - beta).abs() <= 2.0 * fit.std_error, "beta {beta}: {fit:?}");
        assert!(fit.method.contains("within-OLS"));
    }
}

#[test]
fn contrast_detected_with_correct_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let far = planted(-0.003, 5, 5000, &mut rng);
    let close = planted(-0.005, 5, 5000, &mut rng);
    let cmp = compare_slopes(&[("AllFar".into(), far), ("AllClose".into(), close)]).unwrap();
    assert!(cmp.p_value < 0.05, "{cmp:?}");
    let c = &cmp.contrasts[0];
    assert!(c.estimate < 0.0 && c.p_value < 0.05);
    assert!(cmp.slopes[1].beta < cmp.slopes[0].beta);
}

#[test]
fn doubling_coordinates_keeps_slope_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mut records = Vec::new();
    let chips: Vec<LabColor> = (0..40)
        .map(|_| {
            LabColor::new(rng.random_range(0.0..100.0), rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0))
        })
        .collect();
    // Tight words for hard contexts, broad words for easy ones.
    for seed in 0..4u64 {
        for i in 0..800u64 {
            let hard = rng.random::<bool>();
            let chip = if hard { rng.random_range(0..10) } else { rng.random_range(0..40) };
            let word = if hard { format!("fine{}", chip % 5) } else { format!("basic{}", chip % 3) };
            records.push(ProductionRecord {
                seed,
                context_id: i,
                target: chips[chip],
                word,
                ease: if hard { rng.random_range(5.0..20.0) } else { rng.random_range(20.0..80.0) },
                condition: if hard { Condition::Close } else { Condition::Far },
            });
        }
    }
    let fit = fit_within_slope(&adaptation_observations(&records)).unwrap();
    let doubled: Vec<ProductionRecord> = records
        .iter()
        .map(|r| ProductionRecord { target: r.target.scaled(2.0), ease: r.ease * 2.0, ..r.clone() })
        .collect();
    let fit2 = fit_within_slope(&adaptation_observations(&doubled)).unwrap();
    assert!(fit.beta < 0.0);
    assert_eq!(fit.beta.signum(), fit2.beta.signum());
    assert!((fit2.beta - fit.beta / 4.0).abs() < 1e-9 * fit.beta.abs().max(1e-12) + 1e-15);
}

#[test]
fn singleton_targets_are_dropped_per_seed() {
    let rec = |seed, l: f64, word: &str| ProductionRecord {
        seed,
        context_id: 0,
        target: LabColor::new(l, 0.0, 0.0),
        word: word.into(),
        ease: 10.0,
        condition: Condition::Far,
    };
    // Chip 10 appears twice in seed 0 but once in seed 1.
    let records = vec![rec(0, 10.0, "a"), rec(0, 10.0, "a"), rec(0, 20.0, "a"), rec(1, 10.0, "a"), rec(1, 30.0, "a")];
    let obs = adaptation_observations(&records);
    assert_eq!(obs.len(), 2);
    assert!(obs.iter().all(|o| o.seed == 0 && o.target == LabColor::new(10.0, 0.0, 0.0).key()));
}
