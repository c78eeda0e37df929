//! Numerical checks against independent reference computations.

use autorec_core::config::{
    Activation, ArchSpec, Block, Config, OptimizerKind, OptimizerSpec, RewardSpec, RewardTerm, Signal, TrainingSpec,
    Transform,
};
use autorec_core::query::{execute_query, parse_query};
use autorec_core::table::{Column, Table};
use autorec_core::trainer::build_model;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};

fn random_arch(rng: &mut ChaCha8Rng) -> ArchSpec {
    let depth = rng.random_range(1..=3);
    let blocks = (0..depth)
        .map(|_| match rng.random_range(0..3) {
            0 => Block::Dense {
                units: rng.random_range(1..=5),
                activation: Activation::ALL[rng.random_range(0..Activation::ALL.len())],
            },
            1 => Block::GluGate { units: rng.random_range(1..=4) },
            _ => Block::LayerNorm,
        })
        .collect();
    ArchSpec::new(blocks)
}

/// Worst relative error over all coordinates for one random net.
pub fn max_rel_error(seed: u64) -> (f64, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut arch = random_arch(&mut rng);
    if arch.blocks.iter().all(|b| *b == Block::LayerNorm) {
        arch.blocks.insert(0, Block::GluGate { units: 2 });
    }
    let input_dim = rng.random_range(2..=4);
    let rows = rng.random_range(1..=6);
    let p = build_model(&arch, input_dim, seed);
    let x: Vec<f64> = (0..rows * input_dim).map(|_| rng.random_range(-1.5..1.5)).collect();
    let y: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grad) = p.gradients(&x, &y).unwrap();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..p.len() {
        let mut plus = p.clone();
        plus.values_mut()[k] += h;
        let mut minus = p.clone();
        minus.values_mut()[k] -= h;
        let numeric = (plus.mse(&x, &y).unwrap() - minus.mse(&x, &y).unwrap()) / (2.0 * h);
        let analytic = grad[k];
        let scale = analytic.abs().max(numeric.abs());
        // Coordinates whose gradient vanishes are compared absolutely.
        let err = if scale < 1e-6 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
        worst = worst.max(err);
    }
    (worst, format!("{arch:?} input_dim={input_dim} rows={rows}"))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn random_table(rng: &mut ChaCha20Rng) -> Table {
    let rows = rng.random_range(2..=1000);
    let cols = ["a", "b", "c"]
        .iter()
        .map(|name| {
            let null_rate = rng.random_range(0.0..0.3);
            let scale = 10f64.powi(rng.random_range(-2..4));
            let values = (0..rows)
                .map(|_| (!rng.random_bool(null_rate)).then(|| scale * (rng.random::<f64>() * 2.0 - 0.5)))
                .collect();
            Column::new(*name, values)
        })
        .collect();
    let groups = (0..rows).map(|_| Some(rng.random_range(0..4) as f64)).collect();
    let mut cols: Vec<Column> = cols;
    cols.push(Column::new("k", groups));
    Table::new("logs", cols)
}

pub fn present(t: &Table, name: &str, rows: &[usize]) -> Vec<f64> {
    let c = t.column(name).unwrap();
    rows.iter().filter_map(|&r| c.values[r]).collect()
}

pub fn naive_sum(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s
}

pub fn naive_std(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = naive_sum(v) / v.len() as f64;
    let mut ss = 0.0;
    for x in v {
        ss += (x - m) * (x - m);
    }
    Some((ss / (v.len() - 1) as f64).sqrt())
}

pub fn naive_corr(t: &Table, a: &str, b: &str, rows: &[usize]) -> Option<f64> {
    let (ca, cb) = (t.column(a).unwrap(), t.column(b).unwrap());
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|&r| Some((ca.values[r]?, cb.values[r]?)))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pairs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

pub fn check(got: Option<f64>, want: Option<f64>, what: &str) -> Result<(), String> {
    let ok = match (got, want) {
        (Some(g), Some(w)) => rel_close(g, w, 1e-9),
        (g, w) => g == w,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("{what}: {got:?} vs {want:?}"))
    }
}

/// One grouped aggregate query on a random table against per-group naive
/// recomputation.
pub fn query_case(rng: &mut ChaCha20Rng) -> Result<(), String> {
    let t = random_table(rng);
    let threshold: f64 = rng.random_range(-1.0..1.0);
    let sql = format!(
        "SELECT k, COUNT(*), COUNT(a), SUM(a), AVG(b), STDDEV(c), CORR(a, b), CORR(b, c) \
         FROM logs WHERE c > {threshold:?} OR c = NULL OR a < 0 GROUP BY k"
    );
    let res = execute_query(&parse_query(&sql).map_err(|e| e.to_string())?, &t).map_err(|e| e.to_string())?;
    let cc = t.column("c").unwrap();
    let ca = t.column("a").unwrap();
    let kept: Vec<usize> = (0..t.rows())
        .filter(|&r| cc.values[r].is_some_and(|v| v > threshold) || ca.values[r].is_some_and(|v| v < 0.0))
        .collect();
    let mut keys: Vec<f64> = kept.iter().map(|&r| t.column("k").unwrap().values[r].unwrap()).collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    if res.rows.len() != keys.len() {
        return Err(format!("{} groups, expected {}", res.rows.len(), keys.len()));
    }
    for (row, key) in res.rows.iter().zip(&keys) {
        let g: Vec<usize> = kept
            .iter()
            .copied()
            .filter(|&r| t.column("k").unwrap().values[r] == Some(*key))
            .collect();
        let a = present(&t, "a", &g);
        let b = present(&t, "b", &g);
        let c = present(&t, "c", &g);
        check(row[0], Some(*key), "key")?;
        check(row[1], Some(g.len() as f64), "count(*)")?;
        check(row[2], Some(a.len() as f64), "count")?;
        check(row[3], (!a.is_empty()).then(|| naive_sum(&a)), "sum")?;
        check(row[4], (!b.is_empty()).then(|| naive_sum(&b) / b.len() as f64), "avg")?;
        check(row[5], naive_std(&c), "stddev")?;
        check(row[6], naive_corr(&t, "a", "b", &g), "corr ab")?;
        check(row[7], naive_corr(&t, "b", "c", &g), "corr bc")?;
    }
    Ok(())
}

pub fn zscore_reference(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let mut sum = 0.0;
    for x in xs {
        sum += x;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    let sd = (ss / n).sqrt();
    xs.iter().map(|x| (x - mean) / sd).collect()
}

pub fn random_config(seed: u64) -> Config {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = OptimizerKind::ALL[rng.random_range(0..4)];
    let momentum = rng.random_range(0.0..0.99);
    let decay = rng.random_range(0.05..1.0);
    let epsilon = 10f64.powf(rng.random_range(-10.0..-3.0));
    let (momentum, decay, epsilon) = match kind {
        OptimizerKind::Sgd => (Some(momentum), None, None),
        OptimizerKind::Adagrad => (None, None, Some(epsilon)),
        OptimizerKind::Rmsprop => (Some(momentum), Some(decay), Some(epsilon)),
        OptimizerKind::Adam => (Some(momentum), None, Some(epsilon)),
    };
    let blocks = (0..rng.random_range(1..=4))
        .map(|_| match rng.random_range(0..3) {
            0 => Block::Dense {
                units: rng.random_range(1..=64),
                activation: Activation::ALL[rng.random_range(0..Activation::ALL.len())],
            },
            1 => Block::GluGate { units: rng.random_range(1..=64) },
            _ => Block::LayerNorm,
        })
        .collect();
    let mut signals = Signal::ALL.to_vec();
    signals.shuffle(&mut rng);
    let terms = signals[..rng.random_range(1..=Signal::ALL.len())]
        .iter()
        .map(|&signal| RewardTerm {
            signal,
            weight: if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-2.0..2.0) },
            transform: Transform::ALL[rng.random_range(0..3)],
        })
        .collect();
    let mut c = Config {
        optimizer: OptimizerSpec {
            kind,
            learning_rate: 10f64.powf(rng.random_range(-4.0..0.5)),
            momentum,
            decay,
            epsilon,
        },
        architecture: ArchSpec::new(blocks),
        reward: RewardSpec::new(terms),
        training: TrainingSpec {
            batch_size: rng.random_range(1..=512),
            epochs: rng.random_range(1..=100),
            seed: rng.random_range(-1000..1000),
        },
    };
    if c.reward.terms().iter().all(|t| t.weight == 0.0) {
        c.reward = RewardSpec::single(Signal::Click);
    }
    c
}
