//! Deterministic supervised benchmarks.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::math::{self, sigmoid};
use crate::trainer::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetName {
    /// `y = 2x + 1`, one feature, 1000 rows, noise-free.
    #[serde(rename = "linreg-easy")]
    LinregEasy,
    /// Linear target over 8 features whose sample covariance has condition number 100.
    #[serde(rename = "illcond-100")]
    Illcond100,
    /// Target driven by features 0..5 through a context gate keyed on feature 5;
    /// features 5..20 carry no additive signal.
    #[serde(rename = "gated-noise")]
    GatedNoise,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [Self::LinregEasy, Self::Illcond100, Self::GatedNoise];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LinregEasy => "linreg-easy",
            Self::Illcond100 => "illcond-100",
            Self::GatedNoise => "gated-noise",
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| alloc::format!("unknown dataset `{s}`"))
    }
}

/// A named dataset plus the seed it was generated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DatasetRef {
    pub name: DatasetName,
    pub seed: u64,
}

impl DatasetRef {
    pub fn new(name: DatasetName, seed: u64) -> Self {
        Self { name, seed }
    }

    pub fn load(&self) -> Dataset {
        gen_supervised_dataset(self.name, self.seed)
    }
}

pub const ILLCOND_DIM: usize = 8;
pub const ILLCOND_ROWS: usize = 5000;
pub const ILLCOND_NOISE: f64 = 0.1;
pub const GATED_DIM: usize = 20;
pub const GATED_ROWS: usize = 5000;
pub const GATED_NOISE: f64 = 0.05;
/// Gate sharpness on the context feature.
pub const GATED_SHARPNESS: f64 = 4.0;

pub fn gen_supervised_dataset(name: DatasetName, seed: u64) -> Dataset {
    match name {
        DatasetName::LinregEasy => linreg_easy(seed),
        DatasetName::Illcond100 => illcond(seed, ILLCOND_ROWS),
        DatasetName::GatedNoise => gated_noise(seed, GATED_ROWS),
    }
}

fn normal(rng: &mut math::Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn linreg_easy(seed: u64) -> Dataset {
    let mut rng = math::rng(seed, 0xD1);
    let n = 1000;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = x.iter().map(|v| 2.0 * v + 1.0).collect();
    Dataset {
        name: DatasetName::LinregEasy.to_string(),
        input_dim: 1,
        x,
        y,
    }
}

/// Eigenvalues of the target covariance, log-spaced from 1 to 100.
pub fn illcond_spectrum() -> [f64; ILLCOND_DIM] {
    let mut out = [0.0; ILLCOND_DIM];
    for (i, v) in out.iter_mut().enumerate() {
        *v = libm::pow(100.0, i as f64 / (ILLCOND_DIM - 1) as f64);
    }
    out
}

/// Features are whitened against their own sample covariance and then
/// rescaled and rotated, so the empirical covariance has exactly the target
/// spectrum rather than approximately.
fn illcond(seed: u64, n: usize) -> Dataset {
    let d = ILLCOND_DIM;
    let mut rng = math::rng(seed, 0xD2);
    let mut z: Vec<f64> = (0..n * d).map(|_| normal(&mut rng)).collect();
    center_columns(&mut z, n, d);
    let cov = covariance(&z, n, d);
    let l = cholesky(&cov, d).expect("sample covariance of gaussian draws is positive definite");
    // z <- z L^{-T}: solve L w = z_row for each row
    for r in 0..n {
        let row = &mut z[r * d..(r + 1) * d];
        for i in 0..d {
            let mut acc = row[i];
            for k in 0..i {
                acc -= l[i * d + k] * row[k];
            }
            row[i] = acc / l[i * d + i];
        }
    }
    let q = random_orthogonal(&mut rng, d);
    let spectrum = illcond_spectrum();
    // weights in the eigenbasis give each direction unit target variance
    let v: Vec<f64> = spectrum
        .iter()
        .map(|lam| {
            let u = normal(&mut rng);
            let u = if u.abs() < 0.5 { 0.5 * u.signum() + u } else { u };
            u / libm::sqrt(*lam)
        })
        .collect();
    let mut x = vec![0.0; n * d];
    let mut y = Vec::with_capacity(n);
    for r in 0..n {
        let mut target = 0.0;
        for j in 0..d {
            let e = z[r * d + j] * libm::sqrt(spectrum[j]);
            target += e * v[j];
            for (c, xv) in x[r * d..(r + 1) * d].iter_mut().enumerate() {
                *xv += e * q[c * d + j];
            }
        }
        y.push(target + ILLCOND_NOISE * normal(&mut rng));
    }
    Dataset {
        name: DatasetName::Illcond100.to_string(),
        input_dim: d,
        x,
        y,
    }
}

fn gated_noise(seed: u64, n: usize) -> Dataset {
    let d = GATED_DIM;
    let mut rng = math::rng(seed, 0xD3);
    let w: Vec<f64> = (0..5)
        .map(|_| {
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            s * rng.random_range(0.6..1.2)
        })
        .collect();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let start = x.len();
        for _ in 0..d {
            x.push(normal(&mut rng));
        }
        let row = &x[start..];
        let signal: f64 = row[..5].iter().zip(&w).map(|(a, b)| a * b).sum();
        let gate = sigmoid(GATED_SHARPNESS * row[5]);
        y.push(signal * gate + GATED_NOISE * normal(&mut rng));
    }
    Dataset {
        name: DatasetName::GatedNoise.to_string(),
        input_dim: d,
        x,
        y,
    }
}

fn center_columns(m: &mut [f64], n: usize, d: usize) {
    for j in 0..d {
        let mu = (0..n).map(|r| m[r * d + j]).sum::<f64>() / n as f64;
        for r in 0..n {
            m[r * d + j] -= mu;
        }
    }
}

/// Sample covariance (n − 1) of a centered row-major matrix.
pub fn covariance(m: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d * d];
    for r in 0..n {
        let row = &m[r * d..(r + 1) * d];
        for i in 0..d {
            for j in 0..=i {
                c[i * d + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = c[i * d + j] / (n - 1) as f64;
            c[i * d + j] = v;
            c[j * d + i] = v;
        }
    }
    c
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Orthonormal columns from Gram–Schmidt on a gaussian matrix.
fn random_orthogonal(rng: &mut math::Rng, d: usize) -> Vec<f64> {
    let mut q = vec![0.0; d * d];
    for j in 0..d {
        let mut col: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        for k in 0..j {
            let dot: f64 = (0..d).map(|r| col[r] * q[r * d + k]).sum();
            for r in 0..d {
                col[r] -= dot * q[r * d + k];
            }
        }
        let norm = libm::sqrt(col.iter().map(|v| v * v).sum::<f64>());
        for r in 0..d {
            q[r * d + j] = col[r] / norm;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linreg_is_exact() {
        let d = gen_supervised_dataset(DatasetName::LinregEasy, 3);
        assert_eq!(d.rows(), 1000);
        for i in 0..d.rows() {
            assert_eq!(d.y[i], 2.0 * d.x[i] + 1.0);
        }
    }

    #[test]
    fn deterministic() {
        for name in DatasetName::ALL {
            assert_eq!(gen_supervised_dataset(name, 9), gen_supervised_dataset(name, 9));
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("gated-noise".parse::<DatasetName>().unwrap(), DatasetName::GatedNoise);
        assert!("mnist".parse::<DatasetName>().is_err());
    }

    #[test]
    fn cholesky_small() {
        // [[4, 2], [2, 3]] = L L^T with L = [[2, 0], [1, sqrt(2)]]
        let l = cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-15);
        assert!((l[2] - 1.0).abs() < 1e-15);
        assert!((l[3] - libm::sqrt(2.0)).abs() < 1e-15);
    }
}
