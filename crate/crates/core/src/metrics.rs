//! Evaluation: time-dependent concordance and the censoring-weighted Brier
//! score, both reading predicted survival through constant-density
//! interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{Segment, StepFunction, TimeGrid};

pub const DEFAULT_BRIER_POINTS: usize = 100;

/// Predicted survival curves (on a shared grid) with the observed outcomes
/// they are scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub grid: TimeGrid,
    /// `n x m`: survival at each grid cut, per patient.
    pub survival: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub events: Vec<bool>,
}

impl PredictionSet {
    pub fn new(grid: TimeGrid, survival: Vec<Vec<f64>>, times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        let n = survival.len();
        if times.len() != n || events.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: times.len().min(events.len()),
            });
        }
        for row in &survival {
            if row.len() != grid.m() {
                return Err(Error::DimensionMismatch {
                    expected: grid.m(),
                    actual: row.len(),
                });
            }
            let mut prev = 1.0;
            for &s in row {
                if !(0.0..=1.0).contains(&s) || s > prev {
                    return Err(Error::InvalidArgument(
                        "survival predictions must be non-increasing within [0, 1]".into(),
                    ));
                }
                prev = s;
            }
        }
        Ok(PredictionSet {
            grid,
            survival,
            times,
            events,
        })
    }

    /// Builds a set from per-patient step curves that all step on `grid`.
    pub fn from_curves(grid: TimeGrid, curves: &[StepFunction], times: Vec<f64>, events: Vec<bool>) -> Result<Self> {
        if curves.iter().any(|c| c.times != grid.cuts()) {
            return Err(Error::InvalidArgument("curves must step on the grid cuts".into()));
        }
        let survival = curves.iter().map(|c| c.values.clone()).collect();
        Self::new(grid, survival, times, events)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn curve(&self, i: usize) -> StepFunction {
        StepFunction {
            times: self.grid.cuts().to_vec(),
            values: self.survival[i].clone(),
            value_before_first: 1.0,
        }
    }

    /// Interpolated survival of patient `i` at time `t`.
    pub fn survival_at(&self, i: usize, t: f64) -> f64 {
        Segment::locate(self.grid.cuts(), t.max(0.0)).eval(&self.survival[i])
    }
}

/// Concordance is undefined when no pair is comparable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concordance {
    Defined { value: f64, concordant: u64, comparable: u64 },
    Undefined,
}

impl Concordance {
    pub fn value(self) -> Option<f64> {
        match self {
            Concordance::Defined { value, .. } => Some(value),
            Concordance::Undefined => None,
        }
    }
}

/// Time-dependent concordance. A pair `(i, j)` is comparable when `i` had
/// the event and either `t_i < t_j`, or `t_i == t_j` with `j` censored. It is
/// concordant when `S(t_i | x_i) < S(t_i | x_j)` strictly; ties earn nothing.
pub fn concordance_td(preds: &PredictionSet) -> Concordance {
    let n = preds.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| preds.times[a].total_cmp(&preds.times[b]));
    let mut concordant = 0u64;
    let mut comparable = 0u64;
    for i in 0..n {
        if !preds.events[i] {
            continue;
        }
        let ti = preds.times[i];
        let seg = Segment::locate(preds.grid.cuts(), ti.max(0.0));
        let own = seg.eval(&preds.survival[i]);
        // first position in time order with t >= t_i
        let start = order.partition_point(|&k| preds.times[k] < ti);
        for &j in &order[start..] {
            if j == i {
                continue;
            }
            let tj = preds.times[j];
            if tj == ti && preds.events[j] {
                continue;
            }
            comparable += 1;
            if own < seg.eval(&preds.survival[j]) {
                concordant += 1;
            }
        }
    }
    if comparable == 0 {
        Concordance::Undefined
    } else {
        Concordance::Defined {
            value: concordant as f64 / comparable as f64,
            concordant,
            comparable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrierPoint {
    pub time: f64,
    pub score: f64,
    /// Terms dropped because the censoring survival was zero.
    pub dropped: usize,
}

/// Censoring-weighted Brier score at `t`.
///
/// Patients with an event at or before `t` are scored against 0 with weight
/// `1 / G(t_i-)`; patients still under observation after `t` are scored
/// against 1 with weight `1 / G(t)`; patients censored at or before `t`
/// contribute nothing. The sum is divided by the full `n`.
pub fn brier_score(preds: &PredictionSet, t: f64, censor_curve: &StepFunction) -> BrierPoint {
    let n = preds.len();
    let g_t = censor_curve.at(t);
    let seg = Segment::locate(preds.grid.cuts(), t.max(0.0));
    let mut total = 0.0;
    let mut dropped = 0;
    for i in 0..n {
        let ti = preds.times[i];
        let (target, weight_base) = if ti <= t {
            if !preds.events[i] {
                continue;
            }
            (0.0, censor_curve.left_limit(ti))
        } else {
            (1.0, g_t)
        };
        if weight_base <= 0.0 {
            dropped += 1;
            continue;
        }
        let s = seg.eval(&preds.survival[i]);
        total += (target - s) * (target - s) / weight_base;
    }
    BrierPoint {
        time: t,
        score: total / n as f64,
        dropped,
    }
}

/// Brier score on `num_points` equally spaced times spanning the observed
/// times, integrated with the trapezoid rule and divided by the span.
pub fn integrated_brier(
    preds: &PredictionSet,
    censor_curve: &StepFunction,
    num_points: usize,
) -> Result<(f64, Vec<BrierPoint>)> {
    if num_points < 2 {
        return Err(Error::InvalidArgument("integration needs at least 2 points".into()));
    }
    let lo = preds.times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = preds.times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::InvalidArgument("observed times span an empty range".into()));
    }
    let step = (hi - lo) / (num_points - 1) as f64;
    let curve: Vec<BrierPoint> = (0..num_points)
        .map(|k| {
            let t = if k == num_points - 1 { hi } else { lo + step * k as f64 };
            brier_score(preds, t, censor_curve)
        })
        .collect();
    Ok((trapezoid(&curve) / (hi - lo), curve))
}

fn trapezoid(points: &[BrierPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| 0.5 * (w[0].score + w[1].score) * (w[1].time - w[0].time))
        .sum()
}

/// Scores for one evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub c_index: Option<f64>,
    pub integrated_brier: f64,
    pub brier_curve: Vec<(f64, f64)>,
}

impl MetricReport {
    /// Evaluates `preds`, fitting the censoring curve on the same set.
    pub fn evaluate(preds: &PredictionSet, num_points: usize) -> Result<Self> {
        let censor = crate::survival::censoring_km(&preds.times, &preds.events)?;
        let (ibs, curve) = integrated_brier(preds, &censor, num_points)?;
        Ok(MetricReport {
            c_index: concordance_td(preds).value(),
            integrated_brier: ibs,
            brier_curve: curve.iter().map(|p| (p.time, p.score)).collect(),
        })
    }
}

/// `x * 100` rounded to one decimal, the scale used in result tables.
pub fn rebase(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}
