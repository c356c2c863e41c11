//! Synthetic Weibull survival data for tests and demos.

use std::fs::File;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{write_csv, Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::rng;

pub const TIME_COLUMN: &str = "duration";
pub const EVENT_COLUMN: &str = "event";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// Log-hazard coefficients; defaults to alternating `±1/sqrt(p)`.
    pub coefficients: Option<Vec<f64>>,
    pub shape: f64,
    /// Median event time at `x = 0`.
    pub baseline_median: f64,
    pub censoring_target: f64,
}

impl SynthConfig {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        SynthConfig {
            n,
            p,
            seed,
            coefficients: None,
            shape: 1.5,
            baseline_median: 12.0,
            censoring_target: 0.3,
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.coefficients.clone().unwrap_or_else(|| {
            let scale = 1.0 / (self.p as f64).sqrt();
            (0..self.p).map(|j| if j % 2 == 0 { scale } else { -scale }).collect()
        })
    }
}

/// Everything needed to regenerate or interpret a synthetic file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub config: SynthConfig,
    pub coefficients: Vec<f64>,
    /// Weibull scale giving the requested baseline median.
    pub scale: f64,
    /// Censoring times are uniform on `[0, censoring_max]`.
    pub censoring_max: f64,
    pub censored_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub params: SynthParams,
}

/// `S(t | x) = exp(-(t / scale)^shape * exp(beta . x))` with independent
/// uniform censoring. The censoring bound is chosen so the expected censored
/// fraction given the drawn event times equals the target.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Synthetic> {
    if cfg.n == 0 || cfg.p == 0 {
        return Err(Error::InvalidArgument("n and p must be at least 1".into()));
    }
    let beta = cfg.coefficients();
    if beta.len() != cfg.p {
        return Err(Error::DimensionMismatch { expected: cfg.p, actual: beta.len() });
    }
    if !(cfg.shape > 0.0 && cfg.baseline_median > 0.0) {
        return Err(Error::InvalidArgument("shape and median must be positive".into()));
    }
    if !(cfg.censoring_target > 0.0 && cfg.censoring_target < 1.0) {
        return Err(Error::InvalidArgument("censoring target must lie in (0, 1)".into()));
    }
    let scale = cfg.baseline_median / std::f64::consts::LN_2.powf(1.0 / cfg.shape);
    let mut rng = rng::seeded(cfg.seed);

    let mut features = Vec::with_capacity(cfg.n);
    let mut latent = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x: Vec<f64> = (0..cfg.p).map(|_| rng.sample(StandardNormal)).collect();
        let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let u: f64 = 1.0 - rng.gen::<f64>();
        latent.push(scale * (-u.ln() * (-eta).exp()).powf(1.0 / cfg.shape));
        features.push(x);
    }
    let censoring_max = solve_censoring_bound(&latent, cfg.censoring_target);

    let records: Vec<SurvivalRecord> = features
        .into_iter()
        .zip(&latent)
        .map(|(features, &t)| {
            let c = censoring_max * rng.gen::<f64>();
            SurvivalRecord { features, time: t.min(c), event: t <= c }
        })
        .collect();
    let names = (0..cfg.p).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::new(records, names)?;
    let params = SynthParams {
        config: cfg.clone(),
        coefficients: beta,
        scale,
        censoring_max,
        censored_fraction: dataset.censored_fraction(),
    };
    Ok(Synthetic { dataset, params })
}

/// Expected censored fraction under `U(0, c)` censoring is `mean(min(T, c)) / c`,
/// decreasing in `c`; bisect for the target.
fn solve_censoring_bound(latent: &[f64], target: f64) -> f64 {
    let frac = |c: f64| latent.iter().map(|&t| t.min(c)).sum::<f64>() / (c * latent.len() as f64);
    let mut lo = 0.0;
    let mut hi = latent.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    while frac(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if frac(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Writes the CSV and a `<out>.json` sidecar with the generation parameters.
/// Returns the sidecar path.
pub fn write_synthetic(s: &Synthetic, out: impl AsRef<Path>) -> Result<PathBuf> {
    let out = out.as_ref();
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    write_csv(&s.dataset, file, TIME_COLUMN, EVENT_COLUMN)?;
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".json");
    let sidecar = PathBuf::from(sidecar);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&s.params)?).map_err(|e| Error::io(&sidecar, e))?;
    Ok(sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_csv;

    #[test]
    fn censoring_near_target() {
        for seed in 0..5 {
            let s = generate_synthetic(&SynthConfig::new(1000, 5, seed)).unwrap();
            let c = s.dataset.censored_fraction();
            assert!((c - 0.3).abs() <= 0.05, "seed {seed}: {c}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&SynthConfig::new(50, 3, 7)).unwrap();
        let b = generate_synthetic(&SynthConfig::new(50, 3, 7)).unwrap();
        let c = generate_synthetic(&SynthConfig::new(50, 3, 8)).unwrap();
        assert_eq!(a.dataset.records, b.dataset.records);
        assert_ne!(a.dataset.records, c.dataset.records);
    }

    #[test]
    fn censoring_bound_solves_expectation() {
        let latent = [1.0, 2.0, 3.0, 4.0];
        let c = solve_censoring_bound(&latent, 0.5);
        let f = latent.iter().map(|&t: &f64| t.min(c)).sum::<f64>() / (4.0 * c);
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn baseline_median_is_respected() {
        let mut cfg = SynthConfig::new(5, 1, 3);
        cfg.coefficients = Some(vec![0.0]);
        let s = generate_synthetic(&cfg).unwrap();
        // S(median) = 1/2 at x = 0
        let st = (-(cfg.baseline_median / s.params.scale).powf(cfg.shape)).exp();
        assert!((st - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate_synthetic(&SynthConfig::new(0, 1, 0)).is_err());
        let mut cfg = SynthConfig::new(5, 2, 0);
        cfg.coefficients = Some(vec![1.0]);
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn csv_and_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("synth.csv");
        let s = generate_synthetic(&SynthConfig::new(30, 2, 1)).unwrap();
        let sidecar = write_synthetic(&s, &out).unwrap();
        let back = load_csv(&out, TIME_COLUMN, EVENT_COLUMN).unwrap();
        assert_eq!(back.records, s.dataset.records);
        let params: SynthParams = serde_json::from_str(&std::fs::read_to_string(sidecar).unwrap()).unwrap();
        assert_eq!(params, s.params);
    }
}
