//! Product-limit estimation, Kaplan-Meier quantile grids, discrete labels and
//! constant-density interpolation of step survival curves.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Tolerance used when comparing a KM value against a quantile level, so a
/// level that is hit exactly in exact arithmetic is not missed by rounding.
const LEVEL_EPS: f64 = 1e-12;

/// Right-continuous step function: `values[k]` holds on `[times[k], times[k+1])`
/// and `value_before_first` holds before `times[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub value_before_first: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, value_before_first: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("step times must be strictly increasing".into()));
        }
        Ok(StepFunction {
            times,
            values,
            value_before_first,
        })
    }

    /// Survival curve on `times` (starts at 1).
    pub fn survival(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, values, 1.0)
    }

    /// Value at `t` (right-continuous).
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x <= t) {
            0 => self.value_before_first,
            k => self.values[k - 1],
        }
    }

    /// Left limit `f(t-)`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x < t) {
            0 => self.value_before_first,
            k => self.values[k - 1],
        }
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.value_before_first)
    }

    /// Height of the largest single jump.
    pub fn max_step(&self) -> f64 {
        let mut prev = self.value_before_first;
        let mut best: f64 = 0.0;
        for &v in &self.values {
            best = best.max((prev - v).abs());
            prev = v;
        }
        best
    }
}

/// Ordered cut points `tau_1 < ... < tau_m`. Interval `j` (0-based) is
/// `[tau_j, tau_{j+1})` with `tau_0 = 0`; times at or past `tau_m` fall into
/// the last interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    cuts: Vec<f64>,
}

impl TimeGrid {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(Error::InvalidArgument("a time grid needs at least one cut".into()));
        }
        if cuts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("grid cuts must be finite and non-negative".into()));
        }
        if cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("grid cuts must be strictly increasing".into()));
        }
        Ok(TimeGrid { cuts })
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of intervals.
    pub fn m(&self) -> usize {
        self.cuts.len()
    }

    pub fn interval_of(&self, t: f64) -> usize {
        self.cuts.partition_point(|&c| c <= t).min(self.m() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscreteLabel {
    pub interval: usize,
    pub event: bool,
}

/// Product-limit estimate. Steps occur only at event times; the risk set at
/// time `t` is everyone with observed time `>= t`, so censorings tied with an
/// event are still counted at risk for it.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> Result<StepFunction> {
    if times.len() != events.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            actual: events.len(),
        });
    }
    if times.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("times must be non-negative".into()));
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk = times.len();
    let mut surv = 1.0;
    let (mut out_t, mut out_s) = (Vec::new(), Vec::new());
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let mut deaths = 0;
        let mut leaving = 0;
        while i < order.len() && times[order[i]] == t {
            deaths += usize::from(events[order[i]]);
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            surv *= 1.0 - deaths as f64 / at_risk as f64;
            out_t.push(t);
            out_s.push(surv);
        }
        at_risk -= leaving;
    }
    StepFunction::survival(out_t, out_s)
}

/// KM estimate of the censoring distribution: product-limit on flipped
/// indicators.
pub fn censoring_km(times: &[f64], events: &[bool]) -> Result<StepFunction> {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(times, &flipped)
}

/// Cuts where the KM curve first reaches the levels
/// `1 - j * (1 - S(tau_max)) / m` for `j = 1..m`, with the last cut placed at
/// the maximum observed time. Coinciding cuts are merged, so the returned
/// grid may have fewer than `m` intervals.
pub fn km_quantile_grid(times: &[f64], events: &[bool], m: usize) -> Result<TimeGrid> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let km = kaplan_meier(times, events)?;
    if km.times.is_empty() {
        return Err(Error::NoEvents);
    }
    let tau_max = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total_drop = 1.0 - km.last_value();
    let mut cuts = Vec::with_capacity(m);
    for j in 1..m {
        let level = 1.0 - j as f64 * total_drop / m as f64;
        let k = km
            .values
            .iter()
            .position(|&s| s <= level + LEVEL_EPS)
            .unwrap_or(km.values.len() - 1);
        cuts.push(km.times[k]);
    }
    cuts.push(tau_max);
    cuts.dedup();
    TimeGrid::new(cuts)
}

pub fn discretize(times: &[f64], events: &[bool], grid: &TimeGrid) -> Result<Vec<DiscreteLabel>> {
    times
        .iter()
        .zip(events)
        .map(|(&t, &event)| {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative time {t}")));
            }
            Ok(DiscreteLabel {
                interval: grid.interval_of(t),
                event,
            })
        })
        .collect()
}

pub fn discretize_labels(d: &Dataset, grid: &TimeGrid) -> Result<Vec<DiscreteLabel>> {
    discretize(&d.times(), &d.events(), grid)
}

/// `S_j = prod_{k <= j} (1 - h_k)`.
pub fn survival_from_hazards(hazards: &[f64]) -> Vec<f64> {
    hazards
        .iter()
        .scan(1.0, |s, h| {
            *s *= 1.0 - h;
            Some(*s)
        })
        .collect()
}

/// Where `t` falls among the knots `0 = tau_0, tau_1, ..., tau_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Segment {
    /// `t` in `(tau_{j}, tau_{j+1}]`, at relative position `frac`.
    Inside { j: usize, frac: f64 },
    /// `t` past the last knot.
    Beyond,
}

impl Segment {
    pub(crate) fn locate(cuts: &[f64], t: f64) -> Segment {
        let j = cuts.partition_point(|&c| c < t);
        if j == cuts.len() {
            return Segment::Beyond;
        }
        let lo = if j == 0 { 0.0 } else { cuts[j - 1] };
        let hi = cuts[j];
        let frac = if hi > lo { ((t - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
        Segment::Inside { j, frac }
    }

    /// Linear interpolation between the survival values at the bracketing
    /// knots; `values[j]` is the survival at `tau_{j+1}`.
    pub(crate) fn eval(self, values: &[f64]) -> f64 {
        match self {
            Segment::Beyond => values[values.len() - 1],
            Segment::Inside { j, frac } => {
                let prev = if j == 0 { 1.0 } else { values[j - 1] };
                prev + (values[j] - prev) * frac
            }
        }
    }
}

/// Constant-density interpolation of a survival step curve whose steps sit
/// on grid cuts. Starts from `S = 1` at time 0 and stays at `S(tau_m)` past
/// the last cut.
pub fn interpolate_survival(curve: &StepFunction, t: f64) -> f64 {
    if curve.times.is_empty() {
        return curve.value_before_first;
    }
    Segment::locate(&curve.times, t.max(0.0)).eval(&curve.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn km_all_events() {
        let km = kaplan_meier(&[1.0, 2.0, 3.0], &[true, true, true]).unwrap();
        assert!(close(km.at(1.0), 2.0 / 3.0));
        assert!(close(km.at(2.0), 1.0 / 3.0));
        assert_eq!(km.at(3.0), 0.0);
        assert_eq!(km.at(0.5), 1.0);
    }

    #[test]
    fn km_no_events_is_flat() {
        let km = kaplan_meier(&[1.0, 2.0, 5.0], &[false, false, false]).unwrap();
        assert!(km.times.is_empty());
        assert_eq!(km.at(100.0), 1.0);
    }

    #[test]
    fn km_censoring_shrinks_risk_set() {
        let km = kaplan_meier(&[1.0, 2.0], &[false, true]).unwrap();
        assert_eq!(km.at(1.0), 1.0);
        assert_eq!(km.at(2.0), 0.0);
    }

    #[test]
    fn km_ties_count_censored_at_risk() {
        // at t=1: 3 at risk (incl. the tied censoring), one death
        let km = kaplan_meier(&[1.0, 1.0, 2.0], &[true, false, true]).unwrap();
        assert!(close(km.at(1.0), 2.0 / 3.0));
        assert_eq!(km.at(2.0), 0.0);
        assert!(close(km.left_limit(2.0), 2.0 / 3.0));
    }

    #[test]
    fn km_rejects_bad_input() {
        assert!(kaplan_meier(&[], &[]).is_err());
        assert!(kaplan_meier(&[1.0], &[true, false]).is_err());
        assert!(kaplan_meier(&[-1.0], &[true]).is_err());
    }

    #[test]
    fn single_interval_grid_is_max_time() {
        let g = km_quantile_grid(&[1.0, 4.0, 9.0], &[true, true, false], 1).unwrap();
        assert_eq!(g.cuts(), &[9.0]);
    }

    #[test]
    fn grid_without_events_fails() {
        assert!(matches!(km_quantile_grid(&[1.0, 2.0], &[false, false], 3), Err(Error::NoEvents)));
    }

    #[test]
    fn grid_on_uncensored_uniform_times() {
        // 10 events at 1..10, m = 5: KM drops 0.1 per step, levels 0.8, 0.6, ...
        let times: Vec<f64> = (1..=10).map(f64::from).collect();
        let g = km_quantile_grid(&times, &[true; 10], 5).unwrap();
        assert_eq!(g.cuts(), &[2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn sparse_tail_collapses_cuts() {
        // one big KM jump swallows several levels
        let g = km_quantile_grid(&[1.0, 1.0, 1.0, 2.0], &[true, true, true, true], 4).unwrap();
        assert_eq!(g.cuts(), &[1.0, 2.0]);
        assert_eq!(g.m(), 2);
    }

    #[test]
    fn labels_use_half_open_intervals() {
        let grid = TimeGrid::new(vec![2.0, 5.0, 9.0]).unwrap();
        let labels = discretize(&[0.0, 1.9, 2.0, 5.0, 8.99, 9.0, 400.0], &[true; 7], &grid).unwrap();
        let got: Vec<usize> = labels.iter().map(|l| l.interval).collect();
        assert_eq!(got, vec![0, 0, 1, 2, 2, 2, 2]);
        assert!(discretize(&[-1.0], &[true], &grid).is_err());
    }

    #[test]
    fn survival_products() {
        assert_eq!(survival_from_hazards(&[0.0, 0.0, 0.0]), vec![1.0, 1.0, 1.0]);
        assert_eq!(survival_from_hazards(&[0.5, 0.5]), vec![0.5, 0.25]);
    }

    #[test]
    fn interpolation_endpoints_and_midpoints() {
        let curve = StepFunction::survival(vec![2.0, 6.0], vec![0.8, 0.4]).unwrap();
        assert_eq!(interpolate_survival(&curve, 0.0), 1.0);
        assert!(close(interpolate_survival(&curve, 1.0), 0.9));
        assert_eq!(interpolate_survival(&curve, 2.0), 0.8);
        assert!(close(interpolate_survival(&curve, 4.0), 0.6));
        assert_eq!(interpolate_survival(&curve, 6.0), 0.4);
        assert_eq!(interpolate_survival(&curve, 60.0), 0.4);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![]).is_err());
        assert!(TimeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![-1.0, 1.0]).is_err());
    }

    fn censored_sample() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0u32..40, prop::bool::weighted(0.6)), 1..60).prop_map(|v| {
            let times = v.iter().map(|(t, _)| f64::from(*t) * 0.5).collect();
            let events = v.iter().map(|(_, e)| *e).collect();
            (times, events)
        })
    }

    proptest! {
        #[test]
        fn km_without_censoring_is_one_minus_ecdf(raw in prop::collection::vec(0u32..30, 1..50)) {
            let times: Vec<f64> = raw.iter().map(|&t| f64::from(t)).collect();
            let km = kaplan_meier(&times, &vec![true; times.len()]).unwrap();
            let n = times.len() as f64;
            for &t in &times {
                let ecdf = times.iter().filter(|&&x| x <= t).count() as f64 / n;
                prop_assert!((km.at(t) - (1.0 - ecdf)).abs() < 1e-12);
            }
        }

        #[test]
        fn km_is_non_increasing_in_unit_interval((times, events) in censored_sample()) {
            let km = kaplan_meier(&times, &events).unwrap();
            let mut prev = 1.0;
            for &v in &km.values {
                prop_assert!((0.0..=1.0).contains(&v) && v <= prev);
                prev = v;
            }
        }

        #[test]
        fn grid_cuts_are_observed_and_end_at_max((times, events) in censored_sample(), m in 1usize..15) {
            prop_assume!(events.iter().any(|&e| e));
            let g = km_quantile_grid(&times, &events, m).unwrap();
            let tmax = times.iter().copied().fold(f64::MIN, f64::max);
            prop_assert!(g.m() <= m);
            prop_assert_eq!(*g.cuts().last().unwrap(), tmax);
            prop_assert!(g.cuts().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.cuts().iter().all(|c| times.contains(c)));
        }

        #[test]
        fn labels_are_total(cuts in prop::collection::btree_set(1u32..100, 1..12),
                            ts in prop::collection::vec(0.0f64..500.0, 1..40)) {
            let grid = TimeGrid::new(cuts.iter().map(|&c| f64::from(c)).collect()).unwrap();
            let labels = discretize(&ts, &vec![false; ts.len()], &grid).unwrap();
            prop_assert!(labels.iter().all(|l| l.interval < grid.m()));
        }

        #[test]
        fn interpolation_is_monotone_and_continuous(
            hazards in prop::collection::vec(0.0f64..1.0, 1..10),
            gaps in prop::collection::vec(0.1f64..10.0, 10),
            probes in prop::collection::vec(0.0f64..80.0, 2..30),
        ) {
            let cuts: Vec<f64> = gaps.iter().take(hazards.len())
                .scan(0.0, |acc, g| { *acc += g; Some(*acc) }).collect();
            let curve = StepFunction::survival(cuts.clone(), survival_from_hazards(&hazards)).unwrap();
            let mut probes = probes;
            probes.sort_by(f64::total_cmp);
            let vals: Vec<f64> = probes.iter().map(|&t| interpolate_survival(&curve, t)).collect();
            prop_assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-15));
            for &c in &cuts {
                let l = interpolate_survival(&curve, c - 1e-9);
                let r = interpolate_survival(&curve, c + 1e-9);
                prop_assert!((l - r).abs() < 1e-6);
            }
        }
    }
}
