use autorec_core::sim::datasets::{covariance, ILLCOND_DIM};
use autorec_core::sim::{
    gen_interaction_logs, gen_supervised_dataset, simulate_online, DatasetName, OnlineParams,
    SimSpec, TrueEffects,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn illcond_eigenvalue_ratio() {
    for seed in [0, 1, 2] {
        let d = gen_supervised_dataset(DatasetName::Illcond100, seed);
        let n = d.rows();
        let mut centered = d.x.clone();
        for j in 0..ILLCOND_DIM {
            let mu = (0..n).map(|r| d.x[r * ILLCOND_DIM + j]).sum::<f64>() / n as f64;
            for r in 0..n {
                centered[r * ILLCOND_DIM + j] -= mu;
            }
        }
        let c = covariance(&centered, n, ILLCOND_DIM);
        let m = nalgebra::DMatrix::from_row_slice(ILLCOND_DIM, ILLCOND_DIM, &c);
        let eig = m.symmetric_eigenvalues();
        let ratio = eig.max() / eig.min();
        assert!((ratio / 100.0 - 1.0).abs() < 0.01, "seed {seed}: ratio {ratio}");
    }
}

#[test]
fn click_independent_of_latent_when_unlinked() {
    let logs = gen_interaction_logs(&SimSpec {
        a_click: 0.0,
        ..SimSpec::default()
    });
    let click: Vec<f64> = logs.table().column("click").unwrap().values.iter().map(|v| v.unwrap()).collect();
    let r = naive_pearson(&click, logs.oracle_latent());
    assert!(r.abs() < 0.02, "corr {r}");
}

#[test]
fn click_latent_correlation_matches_monte_carlo() {
    // independent generator: Box-Muller normals and a separate RNG family
    let mut rng = ChaCha20Rng::seed_from_u64(0xC0FFEE);
    let n = 1_000_000;
    let mut s = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for _ in 0..n {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let p = 1.0 / (1.0 + (-z).exp());
        c.push(if rng.random::<f64>() < p { 1.0 } else { 0.0 });
        s.push(z);
    }
    let oracle = naive_pearson(&c, &s);
    let logs = gen_interaction_logs(&SimSpec::default());
    let click: Vec<f64> = logs.table().column("click").unwrap().values.iter().map(|v| v.unwrap()).collect();
    let got = naive_pearson(&click, logs.oracle_latent());
    assert!((got - oracle).abs() < 0.03, "got {got}, oracle {oracle}");
}

#[test]
fn survey_null_rate_and_ranges() {
    let logs = gen_interaction_logs(&SimSpec::default());
    let t = logs.table();
    assert_eq!(t.rows(), 100_000);
    let survey = &t.column("survey_score").unwrap().values;
    let nulls = survey.iter().filter(|v| v.is_none()).count() as f64 / survey.len() as f64;
    assert!((nulls - 0.98).abs() < 0.005, "null rate {nulls}");
    assert!(survey.iter().flatten().all(|v| (1.0..=5.0).contains(v)));
    for name in ["channel_affinity", "quality_score"] {
        assert!(t.column(name).unwrap().values.iter().all(|v| (0.0..=1.0).contains(&v.unwrap())));
    }
    for name in ["watch_time", "dwell_time"] {
        assert!(t.column(name).unwrap().values.iter().all(|v| v.unwrap() >= 0.0));
    }
    assert!(t.column("latent_satisfaction").is_none());
}

#[test]
fn logs_deterministic_per_seed() {
    let spec = SimSpec { rows: 2000, seed: 5, ..SimSpec::default() };
    assert_eq!(gen_interaction_logs(&spec), gen_interaction_logs(&spec));
    let other = SimSpec { seed: 6, ..spec };
    assert_ne!(gen_interaction_logs(&spec), gen_interaction_logs(&other));
}

#[test]
fn first_report_exactly_at_delay() {
    for delay in [1, 3, 7, 10] {
        let p = OnlineParams { delay_ticks: delay, ..OnlineParams::default() };
        let stream = simulate_online(TrueEffects::default(), p, 14, 3);
        let first = stream.iter().position(Option::is_some).unwrap() as u32 + 1;
        assert_eq!(first, delay);
    }
}

#[test]
fn noise_scales_with_traffic_and_ticks() {
    for (traffic, ticks) in [(0.1, 7u32), (0.1, 14), (0.4, 10), (1.0, 20)] {
        let p = OnlineParams { delay_ticks: 1, noise_sigma: 0.002, traffic_fraction: traffic };
        let vals: Vec<f64> = (0..200u64)
            .map(|seed| simulate_online(TrueEffects::default(), p, ticks, seed)[ticks as usize - 1].unwrap().metric1)
            .collect();
        let m = vals.iter().sum::<f64>() / 200.0;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 199.0).sqrt();
        let expected = 0.002 / (traffic * ticks as f64).sqrt();
        assert!((sd / expected - 1.0).abs() < 0.2, "traffic {traffic} ticks {ticks}: {sd} vs {expected}");
    }
}

#[test]
fn aa_runs_stay_within_halfwidth() {
    let p = OnlineParams::default();
    let mut inside = [0usize; 3];
    for seed in 0..100u64 {
        let r = simulate_online(TrueEffects::default(), p, 14, seed)[13].unwrap();
        for (k, v) in [r.metric1, r.metric2, r.metric3].into_iter().enumerate() {
            if v.abs() <= r.confidence_halfwidth {
                inside[k] += 1;
            }
        }
    }
    assert!(inside.iter().all(|&c| c >= 90), "{inside:?}");
}
