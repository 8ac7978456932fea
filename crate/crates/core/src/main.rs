use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gridsplit::delaunay::DuplicatePolicy;
use gridsplit::harness::{run_once, run_sweep, Inputs, Methods, SweepParameter, SweepSpec};
use gridsplit::synthgen::{generate, ScenarioSpec};
use gridsplit::{Error, Result};

/// Least-cost split of a radial distribution network into grid and
/// off-grid supply.
#[derive(Parser)]
#[command(name = "gridsplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Partition a network with one or both engines.
    Run {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, value_enum, default_value = "topdown")]
        method: MethodArg,
        /// Output directory.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Repeat a run across values of one cost parameter.
    Sweep {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
        #[arg(long, value_enum)]
        param: ParamArg,
        /// Comma-separated, strictly monotone.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Write a synthetic network document.
    Generate {
        /// Defaults to 1 for presets.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "default")]
        preset: PresetArg,
        /// Scenario spec as JSON; overrides the preset (its own seed is kept
        /// unless --seed is given).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Network document (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Cost configuration (JSON); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Equipment catalog (JSON); defaults when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Generation cost table (CSV) used instead of the parametric model.
    #[arg(long)]
    lookup: Option<PathBuf>,
    /// Fail on coincident consumers instead of nudging them apart.
    #[arg(long)]
    reject_duplicates: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Topdown,
    Bottomup,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    FuelCost,
    GridReliability,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Default,
    Full,
}

impl MethodArg {
    fn methods(self) -> Methods {
        match self {
            MethodArg::Topdown => Methods::TopDown,
            MethodArg::Bottomup => Methods::BottomUp,
            MethodArg::Both => Methods::Both,
        }
    }
}

impl InputArgs {
    fn load(&self) -> Result<Inputs> {
        let mut inputs = Inputs::load(
            &self.network,
            self.config.as_deref(),
            self.catalog.as_deref(),
            self.lookup.as_deref(),
        )?;
        if self.reject_duplicates {
            inputs.duplicates = DuplicatePolicy::Reject;
        }
        Ok(inputs)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { inputs, method, out } => {
            let outs = run_once(&inputs.load()?, method.methods(), &out)?;
            for o in &outs {
                println!(
                    "{}: {} on-grid, {} off-grid, total {:.2} $/yr",
                    o.result.method.as_str(),
                    o.result.ongrid_consumers.len(),
                    o.result.offgrid_consumers.len(),
                    o.result.total_cost_usd_yr
                );
            }
        }
        Command::Sweep {
            inputs,
            method,
            param,
            values,
            out,
        } => {
            let parameter = match param {
                ParamArg::FuelCost => SweepParameter::FuelCost,
                ParamArg::GridReliability => SweepParameter::GridReliability,
            };
            let spec = SweepSpec::new(parameter, values)?;
            let rows = run_sweep(&spec, &inputs.load()?, method.methods(), Some(&out))?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows written to {}", rows.len(), out.join("report.csv").display());
            if failed > 0 {
                eprintln!("{failed} run(s) failed; see the error column");
            }
        }
        Command::Generate {
            seed,
            preset,
            spec,
            out,
        } => {
            let spec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    let mut s = ScenarioSpec::from_json(&text)?;
                    s.seed = seed.unwrap_or(s.seed);
                    s
                }
                None => match preset {
                    PresetArg::Default => ScenarioSpec::default_scenario(seed.unwrap_or(1)),
                    PresetArg::Full => ScenarioSpec::full_scale(seed.unwrap_or(1)),
                },
            };
            let doc = generate(&spec)?;
            std::fs::write(&out, doc.to_json()).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {} {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
