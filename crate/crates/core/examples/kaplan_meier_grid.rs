//! Kaplan-Meier curve, quantile time grid and discrete labels.
//!
//! Pass a CSV with `duration` and `event` columns, or run without
//! arguments to use synthetic data.

use fedsurv::data::load_csv;
use fedsurv::survival::{discretize_labels, kaplan_meier, km_quantile_grid};
use fedsurv::synth::{generate_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let d = match std::env::args().nth(1) {
        Some(path) => load_csv(path, "duration", "event")?,
        None => generate_synthetic(&SynthConfig::new(500, 3, 1))?.dataset,
    };
    let (times, events) = (d.times(), d.events());
    let km = kaplan_meier(&times, &events)?;
    let grid = km_quantile_grid(&times, &events, 10)?;

    println!("{:>10} {:>8} {:>8}", "cut", "S(cut)", "labels");
    let labels = discretize_labels(&d, &grid)?;
    for (j, &c) in grid.cuts().iter().enumerate() {
        let count = labels.iter().filter(|l| l.interval == j).count();
        println!("{c:>10.2} {:>8.4} {count:>8}", km.at(c));
    }
    Ok(())
}
