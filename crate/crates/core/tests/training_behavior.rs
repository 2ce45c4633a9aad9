use lexcom_core::agents::{AgentConfig, Listener, Speaker, Vocabulary};
use lexcom_core::context::{generate_dataset, ColorContext, ConditionCounts, GenerationSpec};
use lexcom_core::nn::{AdamConfig, AdamState, Param};
use lexcom_core::training::{
    evaluate, reinforce_logit_grad, rl_epoch, run_pipeline, sl_listener_epoch, sl_speaker_epoch, Baseline,
    LabeledContext, MeanBaseline, PipelineConfig, PipelineData, TrainConfig,
};
use ndarray::{arr2, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs_sl: 3,
        epochs_rl: 2,
        batch_size: 16,
        adam: AdamConfig { lr: 1e-3, ..AdamConfig::default() },
        agent: AgentConfig { hidden: 16, dropout: 0.1 },
        ..TrainConfig::default()
    }
}

fn contexts(n: usize, seed: u64) -> Vec<ColorContext> {
    generate_dataset(&GenerationSpec::with_counts(ConditionCounts::new(n / 2, n / 4, n - n / 2 - n / 4), seed)).unwrap()
}

/// Word = coarse lightness bin of the target.
fn lightness_labels(ctx: &[ColorContext]) -> Vec<LabeledContext> {
    ctx.iter().map(|c| LabeledContext { context: *c, word: ((c.target.l / 34.0) as usize).min(2) }).collect()
}

#[test]
fn adam_matches_textbook_recurrence_for_five_steps() {
    let cfg = AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    let grads = [0.5, -0.3, 0.8, 0.1, -0.2];
    let mut p = Param::new(arr2(&[[1.0]]));
    let mut adam = AdamState::new(cfg);
    let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    for (t, g) in grads.iter().enumerate() {
        p.grad[[0, 0]] = *g;
        adam.step(vec![&mut p]).unwrap();
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let m_hat = m / (1.0 - 0.9f64.powi(t as i32 + 1));
        let v_hat = v / (1.0 - 0.999f64.powi(t as i32 + 1));
        w -= 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.value[[0, 0]] - w).abs() < 1e-14, "step {t}");
        assert_eq!(p.grad[[0, 0]], 0.0);
    }
}

#[test]
fn single_example_is_memorized() {
    let ctx = contexts(4, 1);
    let data = vec![LabeledContext { context: ctx[0], word: 2 }];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = AgentConfig { hidden: 16, dropout: 0.0 };
    let mut speaker = Speaker::new(&mut rng, 4, cfg, true);
    let mut listener = Listener::new(&mut rng, 4, cfg);
    let mut sa = AdamState::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() });
    let mut la = sa.clone();
    let first = sl_speaker_epoch(&mut speaker, &mut sa, &data, 32, &mut rng).unwrap();
    let mut last = first;
    for _ in 0..300 {
        last = sl_speaker_epoch(&mut speaker, &mut sa, &data, 32, &mut rng).unwrap();
        sl_listener_epoch(&mut listener, &mut la, &data, 32, &mut rng).unwrap();
    }
    assert!(last < 0.1 * first, "{first} -> {last}");
    let report = evaluate(&speaker, &listener, &[ctx[0]], Some(&[2]), false, &mut rng).unwrap();
    assert_eq!(report.overall().acc_spk, Some(1.0));
    assert_eq!(report.overall().acc_lst, Some(1.0));
}

#[test]
fn empty_data_and_bad_words_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = AgentConfig { hidden: 4, dropout: 0.1 };
    let mut speaker = Speaker::new(&mut rng, 2, cfg, true);
    let mut adam = AdamState::new(AdamConfig::default());
    assert!(sl_speaker_epoch(&mut speaker, &mut adam, &[], 32, &mut rng).is_err());
    let data = vec![LabeledContext { context: contexts(4, 1)[0], word: 7 }];
    assert!(sl_speaker_epoch(&mut speaker, &mut adam, &data, 32, &mut rng).is_err());
    let mut listener = Listener::new(&mut rng, 3, cfg);
    let mut la = AdamState::new(AdamConfig::default());
    let err = rl_epoch(
        &mut speaker,
        &mut listener,
        (&mut adam, &mut la),
        &mut MeanBaseline::default(),
        &contexts(4, 1),
        &small_config(),
        &mut rng,
    );
    assert!(matches!(err, Err(lexcom_core::Error::VocabularyMismatch(_))));
}

#[test]
fn supervised_loss_drops_after_first_epoch() {
    let data = lightness_labels(&contexts(400, 4));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = AgentConfig { hidden: 16, dropout: 0.1 };
    let mut speaker = Speaker::new(&mut rng, 3, cfg, false);
    let mut adam = AdamState::new(AdamConfig { lr: 1e-3, ..AdamConfig::default() });
    let losses: Vec<f64> =
        (0..5).map(|_| sl_speaker_epoch(&mut speaker, &mut adam, &data, 32, &mut rng).unwrap()).collect();
    assert!(losses[4] < losses[0], "{losses:?}");
}

#[test]
fn untrained_listener_near_chance() {
    let ctx = contexts(3000, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = AgentConfig { hidden: 16, dropout: 0.1 };
    let speaker = Speaker::new(&mut rng, 5, cfg, true);
    let listener = Listener::new(&mut rng, 5, cfg);
    let acc = evaluate(&speaker, &listener, &ctx, None, false, &mut rng).unwrap().overall().acc_comm;
    assert!((acc - 1.0 / 3.0).abs() < 0.1, "{acc}");
}

// Two-word bandit with one context. Speaker policy = softmax(z) over
// two words; a frozen listener gives reward r(w).

fn sampled_gradient(z: [f64; 2], reward: [f64; 2], baseline: f64, n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let logits = Array2::from_shape_vec((1, 2), z.to_vec()).unwrap();
    let p0 = 1.0 / (1.0 + (z[1] - z[0]).exp());
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let w = usize::from(rng.random::<f64>() >= p0);
        let g = reinforce_logit_grad(&logits, &[w], &[reward[w] - baseline], 0.0)[[0, 0]];
        sum += g;
        sum_sq += g * g;
    }
    let mean = sum / n as f64;
    let sd = (sum_sq / n as f64 - mean * mean).max(0.0).sqrt();
    (mean, sd / (n as f64).sqrt())
}

#[test]
fn uniform_listener_gives_zero_expected_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = (1.0f64 / 3.0).ln();
    let (mean, se) = sampled_gradient([0.3, -0.2], [r, r], 0.0, 100_000, &mut rng);
    assert!(mean.abs() <= 3.0 * se.max(1e-12), "{mean} +- {se}");
}

#[test]
fn mass_moves_toward_rewarded_word() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let reward = [0.9f64.ln(), 0.3f64.ln()];
    let z = [0.0, 0.0];
    let (plain, se_plain) = sampled_gradient(z, reward, 0.0, 100_000, &mut rng);
    let expected_reward = 0.5 * (reward[0] + reward[1]);
    let (based, se_based) = sampled_gradient(z, reward, expected_reward, 100_000, &mut rng);
    // Descending the loss raises z0 when its gradient is negative.
    assert!(plain < -3.0 * se_plain);
    assert!(based < -3.0 * se_based);
    assert!((plain - based).abs() <= 3.0 * (se_plain.powi(2) + se_based.powi(2)).sqrt());
    // Analytic expectation: -p0 p1 (r0 - r1).
    let analytic = -0.25 * (reward[0] - reward[1]);
    assert!((based - analytic).abs() <= (3.0 * se_based).max(1e-12));

    // Plain gradient descent on the expected loss increases p(word 0) monotonically.
    let mut z = [0.0f64, 0.0];
    let mut p_prev = 0.5;
    for _ in 0..50 {
        let p0 = 1.0 / (1.0 + (z[1] - z[0]).exp());
        let g0 = -p0 * (1.0 - p0) * (reward[0] - reward[1]);
        z[0] -= 0.5 * g0;
        z[1] += 0.5 * g0;
        let p = 1.0 / (1.0 + (z[1] - z[0]).exp());
        assert!(p > p_prev);
        p_prev = p;
    }
}

#[test]
fn rl_rewards_are_log_probabilities() {
    let ctx = contexts(64, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = small_config();
    let mut speaker = Speaker::new(&mut rng, 4, cfg.agent, true);
    let mut listener = Listener::new(&mut rng, 4, cfg.agent);
    let mut sa = AdamState::new(cfg.adam);
    let mut la = AdamState::new(cfg.adam);
    let mut baseline = MeanBaseline::default();
    for _ in 0..3 {
        let stats =
            rl_epoch(&mut speaker, &mut listener, (&mut sa, &mut la), &mut baseline, &ctx, &cfg, &mut rng).unwrap();
        assert!(stats.mean_reward <= 0.0);
        assert!((0.0..=1.0).contains(&stats.accuracy));
    }
    assert_eq!(baseline.count, 3 * 4);
}

fn tiny_run(pipeline: &PipelineConfig, seed: u64) -> lexcom_core::training::RunArtifact {
    let vocab = Vocabulary::new(["dark", "mid", "light"]).unwrap();
    let labeled = lightness_labels(&contexts(96, 12));
    let (train, test) = labeled.split_at(64);
    let rl = contexts(48, 13);
    let eval = contexts(48, 14);
    let data = PipelineData { sl_train: train, sl_test: test, rl_train: &rl, eval: &eval };
    run_pipeline(pipeline, &TrainConfig { baseline: Baseline::Mean, ..small_config() }, &vocab, data, seed).unwrap()
}

#[test]
fn pipelines_are_deterministic_and_complete() {
    let sl_only = PipelineConfig::standard(true, None);
    let a = tiny_run(&sl_only, 3);
    let b = tiny_run(&sl_only, 3);
    assert_eq!(a.curves, b.curves);
    assert_eq!(a.productions_final, b.productions_final);
    assert!(a.curves.iter().all(|p| p.phase == "sl"));
    assert_eq!(a.productions_final, a.productions_after_sl);
    assert_eq!(a.productions_final.len(), 48);

    let full = tiny_run(&PipelineConfig::standard(false, Some(true)), 3);
    assert!(full.curves.iter().any(|p| p.phase == "rl" && p.epoch == 0));
    assert!(full.curves.iter().any(|p| p.phase == "rl" && p.epoch == 2));
    assert!(full.last.speaker.context_aware);
    assert!(!full.after_sl.speaker.context_aware);
    assert_ne!(tiny_run(&sl_only, 4).curves, a.curves);
}
