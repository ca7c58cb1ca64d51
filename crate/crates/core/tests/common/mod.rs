#![allow(dead_code)]

use curriculum_core::{AnnotatedExample, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Linearly separable two-class blobs with unanimous annotators.
pub fn blobs(n: usize, dim: usize, gap: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let examples = (0..n)
        .map(|i| {
            let y = (i % 2) as u8;
            let sign = if y == 1 { 1.0 } else { -1.0 };
            let mut features: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            features[0] = sign * (gap + rng.random_range(0.0..1.0));
            AnnotatedExample {
                id: format!("x{i:04}"),
                group_id: format!("g{}", i % 10),
                features,
                annotator_labels: vec![y; 7],
                direct_difficulty: None,
                latent_difficulty: None,
                latent_truth: None,
            }
        })
        .collect();
    Dataset::new(examples, 7, dim, ["neg".into(), "pos".into()]).unwrap()
}
