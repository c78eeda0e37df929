//! Z-score normalization against a straightforward two-pass reference.

mod common;

use autorec_core::ablation::zscore_normalize;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::numeric::zscore_reference;

#[test]
fn standardizes_random_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let xs: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..40.0)).collect();
    let z = zscore_normalize(&xs);
    assert!(z.warning.is_none());
    let n = z.values.len() as f64;
    let m = z.values.iter().sum::<f64>() / n;
    let sd = (z.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
    assert!(m.abs() < 1e-12, "mean {m:e}");
    assert!((sd - 1.0).abs() < 1e-9, "std {sd}");
}

#[test]
fn matches_reference_on_random_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(2..300);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0) * scale).collect();
        let got = zscore_normalize(&xs).values;
        for (g, r) in got.iter().zip(zscore_reference(&xs)) {
            assert!((g - r).abs() <= 1e-12, "{g} vs {r}");
        }
    }
}

#[test]
fn constant_group_warns() {
    let z = zscore_normalize(&[0.3; 5]);
    assert_eq!(z.values, vec![0.0; 5]);
    assert!(z.warning.is_some());
}
