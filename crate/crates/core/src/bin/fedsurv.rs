use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedsurv::experiment::{run_experiment, sweep_fineness, write_sweep_csv, DataMode, ExperimentConfig};
use fedsurv::model::ModelKind;
use fedsurv::synth::{generate_synthetic, write_synthetic, SynthConfig};
use fedsurv::{data, Error, Result};

#[derive(Parser)]
#[command(name = "fedsurv", version, about = "Federated discrete-time survival models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated experiment; prints the report as JSON.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long = "time-steps")]
        steps: Option<usize>,
    },
    /// Discretization-fineness sweep with 100 global and 1 local round.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long = "time-steps", value_delimiter = ',', required = true)]
        steps: Vec<usize>,
        #[arg(long = "models", value_delimiter = ',', default_value = "linear-ph,nn-ph,nn-nonph")]
        models: Vec<ModelKind>,
        #[arg(long = "modes", value_delimiter = ',', default_value = "pooled,iid,stratified")]
        modes: Vec<DataMode>,
    },
    /// Writes a synthetic Weibull dataset plus a `.json` parameter sidecar.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    event_col: Option<String>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    mode: Option<DataMode>,
    #[arg(long)]
    centres: Option<usize>,
    #[arg(long)]
    global_rounds: Option<usize>,
    #[arg(long)]
    local_rounds: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, conflicts_with = "lr_grid")]
    lr: Option<f64>,
    #[arg(long)]
    lr_grid: bool,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run folds on all cores.
    #[arg(long)]
    parallel: bool,
}

impl Overrides {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(dataset, time_col, event_col, model, mode, centres, global_rounds, local_rounds, folds, batch_size, seed);
        if let Some(lr) = self.lr {
            c.lr = lr;
            c.lr_grid = false;
        }
        c.lr_grid |= self.lr_grid;
        c.parallel |= self.parallel;
        if self.out.is_some() {
            c.out = self.out;
        }
        if c.dataset.as_os_str().is_empty() {
            return Err(Error::Config("no dataset given".into()));
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let obj = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{obj}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { overrides, steps } => {
            let mut cfg = overrides.resolve()?;
            if let Some(m) = steps {
                cfg.time_steps = m;
            }
            println!("{}", run_experiment(&cfg)?.to_json()?);
        }
        Command::Sweep { overrides, steps, models, modes } => {
            let cfg = overrides.resolve()?;
            let d = data::load_csv(&cfg.dataset, &cfg.time_col, &cfg.event_col)?;
            let (rows, reports) = sweep_fineness(&cfg, &d, &steps, &models, &modes)?;
            match &cfg.out {
                Some(out) => {
                    let f = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
                    write_sweep_csv(&rows, f)?;
                    let mut json = out.as_os_str().to_owned();
                    json.push(".json");
                    std::fs::write(&json, serde_json::to_string_pretty(&reports)?)
                        .map_err(|e| Error::io(PathBuf::from(&json), e))?;
                }
                None => write_sweep_csv(&rows, std::io::stdout())?,
            }
        }
        Command::Synth { n, p, seed, out } => {
            let s = generate_synthetic(&SynthConfig::new(n, p, seed))?;
            write_synthetic(&s, &out)?;
            println!("{}", serde_json::to_string(&s.params)?);
        }
    }
    Ok(())
}
