mod common;

use std::collections::BTreeMap;

use curriculum_core::difficulty::{
    bin_by_agreement, bin_by_direct_annotation, score_self_taught, score_transfer, threshold_tau,
};
use curriculum_core::experiment::related_generator;
use curriculum_core::learner::{NoEval, Trainer, TrainingData};
use curriculum_core::synth::{generate, GenConfig};
use curriculum_core::{
    AnnotatedExample, ConfidenceScore, Dataset, Error, Granularity, LearnerConfig, Level, ScoreSource, TiePolicy,
};

fn quick_learner() -> LearnerConfig {
    LearnerConfig {
        epochs: 15,
        ..Default::default()
    }
}

fn small_gen(seed: u64) -> GenConfig {
    GenConfig {
        num_examples: 600,
        num_groups: 30,
        feature_dim: 8,
        seed,
        ..Default::default()
    }
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut r = vec![0.0; values.len()];
    for (rank, &i) in order.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - mean) * (y - mean)).sum();
    let var: f64 = ra.iter().map(|x| (x - mean).powi(2)).sum();
    cov / var
}

#[test]
fn separable_data_gets_confident_scores() {
    let ds = common::blobs(1000, 3, 2.0, 7);
    let config = LearnerConfig::default();
    let scores = score_self_taught(&ds, &config, 1).unwrap();
    assert_eq!(scores.scores.len(), 1000);
    let min = scores.scores.values().copied().fold(1.0, f64::min);
    assert!(min > 0.9, "least confident {min}");
    assert_eq!(scores, score_self_taught(&ds, &config, 1).unwrap());
}

#[test]
fn a_single_example_is_memorized() {
    let ds = common::blobs(1, 2, 0.5, 8);
    let scores = score_self_taught(&ds, &quick_learner(), 0).unwrap();
    assert!(scores.scores["x0000"] > 0.5);
}

#[test]
fn transfer_on_its_own_data_is_a_doubled_schedule() {
    let ds = common::blobs(60, 3, 0.1, 9);
    let config = quick_learner();
    let transfer = score_transfer(&ds, &ds, &config, 4).unwrap();

    let seeded = LearnerConfig {
        seed: 4,
        ..config.clone()
    };
    let gold = ds.gold_labels(TiePolicy::Error).unwrap();
    let data = TrainingData::new(&ds, &gold).unwrap();
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut t = Trainer::new(&seeded, 3).unwrap();
    t.fit_stage(&data, &rows, config.epochs, &mut NoEval).unwrap();
    t.fit_stage(&data, &rows, config.epochs, &mut NoEval).unwrap();
    for (ex, g) in ds.examples().iter().zip(&gold) {
        let p = t.model().forward(&ex.features).unwrap()[usize::from(g.label)];
        assert_eq!(transfer.scores[&ex.id], p);
    }
}

#[test]
fn transfer_scores_track_latent_ease() {
    let base = small_gen(21);
    let train = generate(&base).unwrap();
    let pretrain = generate(&related_generator(&base, 0.5)).unwrap();
    let scores = score_transfer(&train, &pretrain, &quick_learner(), 2).unwrap();
    let (conf, ease): (Vec<f64>, Vec<f64>) = train
        .examples()
        .iter()
        .map(|e| (scores.scores[&e.id], 1.0 - e.latent_difficulty.unwrap()))
        .unzip();
    let rho = spearman(&conf, &ease);
    assert!(rho > 0.1, "Spearman {rho}");
}

#[test]
fn unrelated_pretraining_still_gives_probabilities() {
    let train = generate(&small_gen(22)).unwrap();
    let other = generate(&GenConfig {
        seed: 99,
        class_mean_separation: -3.0,
        ..small_gen(22)
    })
    .unwrap();
    let scores = score_transfer(&train, &other, &quick_learner(), 3).unwrap();
    assert_eq!(scores.scores.len(), train.len());
    assert!(scores.scores.values().all(|s| (0.0..=1.0).contains(s)));
    let wide = generate(&GenConfig {
        feature_dim: 9,
        ..small_gen(22)
    })
    .unwrap();
    assert!(matches!(
        score_transfer(&train, &wide, &quick_learner(), 3),
        Err(Error::Schema(_))
    ));
}

#[test]
fn agreement_bins_depend_only_on_counts() {
    let ds = generate(&small_gen(5)).unwrap();
    let gold = ds.gold_labels(TiePolicy::Error).unwrap();
    let fine = bin_by_agreement(&ds, Granularity::Fine).unwrap();
    let coarse = bin_by_agreement(&ds, Granularity::Coarse).unwrap();
    let mut by_count: BTreeMap<usize, (Level, Level)> = BTreeMap::new();
    for (ex, g) in ds.examples().iter().zip(&gold) {
        let pair = (fine.get(&ex.id).unwrap().level, coarse.get(&ex.id).unwrap().level);
        assert_eq!(*by_count.entry(g.agreement_count).or_insert(pair), pair);
    }
    for (count, (f, c)) in by_count {
        assert_eq!(c == Level::Easy, count >= 6, "count {count}");
        assert_eq!(f, Level::FINE[7 - count]);
    }
}

#[test]
fn missing_direct_scores_are_listed() {
    let mut ds = generate(&small_gen(6)).unwrap().examples().to_vec();
    let mut missing = Vec::new();
    for (i, ex) in ds.iter_mut().enumerate() {
        if i % 2 == 1 {
            ex.direct_difficulty = None;
            missing.push(ex.id.clone());
        }
    }
    let ds = Dataset::new(ds, 7, 8, ["a".into(), "b".into()]).unwrap();
    match bin_by_direct_annotation(&ds) {
        Err(Error::MissingAnnotation { ids }) => assert_eq!(ids, missing),
        other => panic!("expected a missing-annotation error, got {other:?}"),
    }
    // Out-of-range scores never reach binning: the dataset itself rejects them.
    let zero = AnnotatedExample {
        direct_difficulty: Some(0),
        ..ds.examples()[0].clone()
    };
    assert!(matches!(
        Dataset::new(vec![zero], 7, 8, ["a".into(), "b".into()]),
        Err(Error::Schema(_))
    ));
}

#[test]
fn ten_scores_at_target_three_tenths() {
    let values = [0.91, 0.13, 0.55, 0.42, 0.78, 0.05, 0.66, 0.29, 0.37, 0.84];
    let scores = ConfidenceScore {
        source: ScoreSource::SelfTaught,
        scores: values.iter().enumerate().map(|(i, &v)| (format!("s{i}"), v)).collect(),
    };
    let sel = threshold_tau(&scores, 0.3).unwrap();
    assert_eq!(sel.tau, 0.66);
    let easy: Vec<&str> = sel.assignment.ids_at(Level::Easy);
    assert_eq!(easy, vec!["s0", "s4", "s9"]);
}
