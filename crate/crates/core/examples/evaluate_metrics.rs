//! Time-dependent concordance and the censoring-weighted Brier score on a
//! handful of hand-written predictions.

use fedsurv::metrics::{brier_score, concordance_td, MetricReport, PredictionSet};
use fedsurv::survival::{censoring_km, TimeGrid};

fn main() -> fedsurv::Result<()> {
    let grid = TimeGrid::new(vec![2.0, 4.0, 6.0])?;
    let survival = vec![
        vec![0.5, 0.2, 0.1],
        vec![0.9, 0.7, 0.4],
        vec![0.8, 0.6, 0.5],
        vec![0.95, 0.9, 0.85],
    ];
    let times = vec![1.5, 3.0, 5.0, 6.0];
    let events = vec![true, false, true, false];
    let preds = PredictionSet::new(grid, survival, times.clone(), events.clone())?;

    println!("c-index: {:?}", concordance_td(&preds));
    let g = censoring_km(&times, &events)?;
    for t in [1.0, 2.5, 4.0, 5.5] {
        let b = brier_score(&preds, t, &g);
        println!("Brier({t}) = {:.4}", b.score);
    }
    let report = MetricReport::evaluate(&preds, 100)?;
    println!("integrated Brier: {:.4}", report.integrated_brier);
    Ok(())
}
