//! Generate a synthetic Weibull cohort and write it as CSV.
//!
//! cargo run --example synthetic_dataset -- /tmp/synth.csv

use fedsurv::synth::{generate_synthetic, write_synthetic, SynthConfig};

fn main() -> fedsurv::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic.csv".into());
    let s = generate_synthetic(&SynthConfig::new(1000, 5, 42))?;
    let sidecar = write_synthetic(&s, &out)?;
    println!("wrote {} rows to {out} ({})", s.dataset.len(), sidecar.display());
    println!("censored: {:.1}%", 100.0 * s.dataset.censored_fraction());
    println!("coefficients: {:?}", s.params.coefficients);
    Ok(())
}
