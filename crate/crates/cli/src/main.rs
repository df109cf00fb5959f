use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use eon_power_cli::{parse_override, parse_seeds, run, Algo, CliError, Experiment, Plan};

/// Launch-power assignment experiments for elastic optical networks.
#[derive(Parser, Debug)]
#[command(name = "eon-power", version)]
struct Args {
    /// ipo | allocate | cpos | pareto | opm-noise | ageing | perturbation | complexity
    experiment: String,
    /// Comma-separated algorithms (chso, hso, gd); default depends on the experiment.
    #[arg(long, value_delimiter = ',')]
    algo: Vec<String>,
    /// Network config; the bundled 12-channel network when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed list such as `7`, `1,2,3` or `1..100`.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Lifetime point in years.
    #[arg(long)]
    tau: Option<f64>,
    /// `key=value`; dotted config keys, or `algo.<param>` for the optimizer.
    #[arg(long = "override")]
    overrides: Vec<String>,
    /// Complexity loadings.
    #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
    scenarios: Vec<String>,
}

fn plan(args: Args) -> Result<Plan, CliError> {
    let mut plan = Plan::new(args.experiment.parse::<Experiment>()?, args.out);
    plan.config = args.config;
    plan.algos = args.algo.iter().map(|a| a.parse::<Algo>()).collect::<Result<_, _>>()?;
    plan.seeds = parse_seeds(&args.seeds)?;
    plan.tau = args.tau;
    plan.overrides = args.overrides.iter().map(|o| parse_override(o)).collect::<Result<_, _>>()?;
    plan.scenarios = args.scenarios;
    Ok(plan)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match plan(args).and_then(|p| run(&p)) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
