//! Survival datasets: CSV ingestion, feature standardization and index splits.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One patient: covariates, observed time and event indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub features: Vec<f64>,
    pub time: f64,
    /// `true` if the event was observed, `false` if censored.
    pub event: bool,
}

/// Per-feature `(mean, stddev)` fitted on a reference set of records.
///
/// Standard deviations are population (not sample) deviations. Constant
/// columns carry a zero deviation and map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn fit(records: &[SurvivalRecord]) -> Self {
        let p = records.first().map_or(0, |r| r.features.len());
        let n = records.len() as f64;
        let mut means = vec![0.0; p];
        for r in records {
            for (m, x) in means.iter_mut().zip(&r.features) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; p];
        for r in records {
            for ((s, x), m) in stds.iter_mut().zip(&r.features).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Standardization { means, stds }
    }

    pub fn transform(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }

    pub fn inverse(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    /// Applies these statistics to another dataset (e.g. a held-out fold).
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if d.standardization.is_some() {
            return Err(Error::InvalidArgument("dataset is already standardized".into()));
        }
        if d.num_features() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                actual: d.num_features(),
            });
        }
        let records = d
            .records
            .iter()
            .map(|r| SurvivalRecord {
                features: self.transform(&r.features),
                ..r.clone()
            })
            .collect();
        Ok(Dataset {
            records,
            feature_names: d.feature_names.clone(),
            standardization: Some(self.clone()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<SurvivalRecord>,
    pub feature_names: Vec<String>,
    pub standardization: Option<Standardization>,
}

impl Dataset {
    /// Builds a dataset, checking that every record has `feature_names.len()`
    /// features and a non-negative time.
    pub fn new(records: Vec<SurvivalRecord>, feature_names: Vec<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != feature_names.len() {
                return Err(Error::DimensionMismatch {
                    expected: feature_names.len(),
                    actual: r.features.len(),
                });
            }
            if !(r.time >= 0.0) || !r.time.is_finite() {
                return Err(Error::BadCell {
                    row: i + 1,
                    column: "time".into(),
                    message: format!("time must be finite and non-negative, got {}", r.time),
                });
            }
        }
        Ok(Dataset {
            records,
            feature_names,
            standardization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        let censored = self.records.iter().filter(|r| !r.event).count();
        censored as f64 / self.len() as f64
    }

    /// Row-major `n x p` feature matrix.
    pub fn features(&self) -> Array2<f64> {
        let p = self.num_features();
        let flat: Vec<f64> = self.records.iter().flat_map(|r| r.features.iter().copied()).collect();
        Array2::from_shape_vec((self.len(), p), flat).expect("records share feature length")
    }

    /// New dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            standardization: self.standardization.clone(),
        }
    }
}

/// Reads a comma-delimited file with one header row. Every column other than
/// `time_column` and `event_column` is parsed as a numeric feature.
///
/// Row numbers in errors count data rows from 1 (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, time_column: &str, event_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, time_column, event_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, time_column: &str, event_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_idx = position(time_column)?;
    let event_idx = position(event_column)?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != time_idx && c != event_idx).collect();
    let feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let cell = |c: usize| -> Result<f64> {
            let raw = row.get(c).unwrap_or("").trim();
            let bad = |message: String| Error::BadCell {
                row: line,
                column: headers[c].clone(),
                message,
            };
            if raw.is_empty() {
                return Err(bad("missing value".into()));
            }
            let v: f64 = raw.parse().map_err(|_| bad(format!("not a number: `{raw}`")))?;
            if !v.is_finite() {
                return Err(bad(format!("not a finite number: `{raw}`")));
            }
            Ok(v)
        };
        let time = cell(time_idx)?;
        if time < 0.0 {
            return Err(Error::BadCell {
                row: line,
                column: headers[time_idx].clone(),
                message: format!("negative time {time}"),
            });
        }
        let event = match cell(event_idx)? {
            0.0 => false,
            1.0 => true,
            v => {
                return Err(Error::BadCell {
                    row: line,
                    column: headers[event_idx].clone(),
                    message: format!("event must be 0 or 1, got {v}"),
                })
            }
        };
        let features = feature_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?;
        records.push(SurvivalRecord { features, time, event });
    }
    Dataset::new(records, feature_names)
}

/// Writes a dataset in the layout [`load_csv`] reads: features, then
/// `time_column`, then `event_column` (0/1).
pub fn write_csv<W: std::io::Write>(d: &Dataset, writer: W, time_column: &str, event_column: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = d.feature_names.clone();
    header.push(time_column.to_string());
    header.push(event_column.to_string());
    w.write_record(&header)?;
    for r in &d.records {
        let mut row: Vec<String> = r.features.iter().map(|x| x.to_string()).collect();
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Fits standardization on `d` and returns the transformed dataset together
/// with the fitted statistics.
pub fn standardize(d: &Dataset) -> Result<(Dataset, Standardization)> {
    let stats = Standardization::fit(&d.records);
    let out = stats.apply(d)?;
    Ok((out, stats))
}

/// Train/test index split. The test set holds `round(test_fraction * n)`
/// indices taken from the front of a seeded permutation.
pub fn train_test_split(d: &Dataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    split_indices(d.len(), test_fraction, seed)
}

pub(crate) fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} of {n} records leaves an empty partition"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let train = perm.split_off(n_test);
    Ok((train, perm))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// K-fold cross-validation over a seeded permutation. The first `n mod k`
/// folds hold one extra record. Index lists are returned sorted.
pub fn kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    kfold_indices(d.len(), k, seed)
}

pub(crate) fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!("k must lie in [2, {n}], got {k}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::seeded(seed));
    let blocks = contiguous_blocks(n, k);
    Ok(blocks
        .iter()
        .map(|range| {
            let mut test: Vec<usize> = perm[range.clone()].to_vec();
            let mut train: Vec<usize> = perm[..range.start]
                .iter()
                .chain(&perm[range.end..])
                .copied()
                .collect();
            test.sort_unstable();
            train.sort_unstable();
            FoldSplit {
                train_indices: train,
                test_indices: test,
            }
        })
        .collect())
}

/// Splits `0..n` into `k` contiguous ranges whose sizes differ by at most one,
/// larger ranges first.
pub(crate) fn contiguous_blocks(n: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}
