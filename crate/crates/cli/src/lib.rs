//! Experiment runner: loads a network config, runs one named experiment
//! and writes CSV/JSON artifacts into an output directory.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use eon_power::gd::{optimize_gd, reference_optimum, GdParams};
use eon_power::hurricane::{HurricaneParams, Variant};
use eon_power::ipo::{self, IpoConfig, Surface};
use eon_power::metrics::{self, FlopAlgorithm, FlopModel};
use eon_power::network::{load_config, load_config_file, LoadedConfig, Network, PhysicalParams};
use eon_power::qot::{PowerVector, QotModel};
use eon_power::report::{RunReport, SCHEMA_VERSION};
use eon_power::scenarios::{self, Monitoring, OptimizerChoice};
use eon_power::units::linear_to_db;

/// Initial eye, dBm.
pub const P0_DBM: f64 = 0.0;
/// Monitoring noise used by `opm-noise` when the config leaves it perfect.
pub const DEFAULT_OPM: Monitoring = Monitoring::Lognormal {
    mu_db: 0.0,
    sigma_db: 0.16,
};
/// Iterations averaged for the asymptotic NMSE of a noisy run.
pub const PLATEAU_WINDOW: usize = 20;
/// Optimized complexity figures quoted for the bundled network, Mflops.
pub const QUOTED_MFLOPS_CHSO: f64 = 17.371;
pub const QUOTED_MFLOPS_HSO: f64 = 24.986;

#[derive(Debug)]
pub enum CliError {
    /// Bad plan or config (exit code 1).
    Validation(String),
    /// Failure while running or writing (exit code 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

fn runtime(e: eon_power::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Ipo,
    Allocate,
    Cpos,
    Pareto,
    OpmNoise,
    Ageing,
    Perturbation,
    Complexity,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Ipo,
        Experiment::Allocate,
        Experiment::Cpos,
        Experiment::Pareto,
        Experiment::OpmNoise,
        Experiment::Ageing,
        Experiment::Perturbation,
        Experiment::Complexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Ipo => "ipo",
            Experiment::Allocate => "allocate",
            Experiment::Cpos => "cpos",
            Experiment::Pareto => "pareto",
            Experiment::OpmNoise => "opm-noise",
            Experiment::Ageing => "ageing",
            Experiment::Perturbation => "perturbation",
            Experiment::Complexity => "complexity",
        }
    }
}

impl FromStr for Experiment {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CliError::Validation(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    Chso,
    Hso,
    Gd,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Chso => "chso",
            Algo::Hso => "hso",
            Algo::Gd => "gd",
        }
    }

    /// Table defaults for the two hurricane variants.
    pub fn hurricane(self) -> Option<HurricaneParams> {
        match self {
            Algo::Chso => Some(HurricaneParams::chso()),
            Algo::Hso => Some(HurricaneParams::hso()),
            Algo::Gd => None,
        }
    }
}

impl FromStr for Algo {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chso" => Ok(Algo::Chso),
            "hso" => Ok(Algo::Hso),
            "gd" => Ok(Algo::Gd),
            _ => Err(CliError::Validation(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Parses `7`, `1,2,5` or `1..100` (inclusive) and mixes thereof.
pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::Validation(format!("bad seed list `{s}`"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> CliResult<(String, String)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(CliError::Validation(format!("override `{s}` is not key=value"))),
    }
}

/// Complexity loading: A = 12 channels, B = 10×, C = 20×.
pub fn scenario_replicas(name: &str) -> CliResult<usize> {
    match name.trim().to_ascii_uppercase().as_str() {
        "A" => Ok(1),
        "B" => Ok(10),
        "C" => Ok(20),
        other => Err(CliError::Validation(format!("unknown complexity scenario `{other}`"))),
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub experiment: Experiment,
    /// `None` uses the bundled network.
    pub config: Option<PathBuf>,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub tau: Option<f64>,
    /// Config overrides; keys under `algo.` set optimizer parameters.
    pub overrides: Vec<(String, String)>,
    pub scenarios: Vec<String>,
}

impl Plan {
    pub fn new(experiment: Experiment, out: impl Into<PathBuf>) -> Plan {
        Plan {
            experiment,
            config: None,
            algos: Vec::new(),
            seeds: vec![1],
            out: out.into(),
            tau: None,
            overrides: Vec::new(),
            scenarios: vec!["A".into(), "B".into(), "C".into()],
        }
    }

    fn algos_or(&self, default: &[Algo]) -> Vec<Algo> {
        if self.algos.is_empty() {
            default.to_vec()
        } else {
            self.algos.clone()
        }
    }
}

/// Config plus optimizer parameter overrides.
pub struct Setup {
    pub config: LoadedConfig,
    pub algo_overrides: Vec<(String, String)>,
}

impl Setup {
    pub fn load(plan: &Plan) -> CliResult<Setup> {
        let (algo_overrides, cfg_overrides): (Vec<_>, Vec<_>) =
            plan.overrides.iter().cloned().partition(|(k, _)| k.starts_with("algo."));
        let config = match &plan.config {
            Some(path) => load_config_file(path, &cfg_overrides),
            None => load_config(eon_power::network::TABLE3_CONFIG, &cfg_overrides),
        }
        .map_err(|e| CliError::Validation(e.to_string()))?;
        let setup = Setup {
            config,
            algo_overrides,
        };
        for a in [Algo::Chso, Algo::Hso] {
            setup.hurricane(a)?;
        }
        setup.gd()?;
        Ok(setup)
    }

    pub fn network(&self) -> &Network {
        &self.config.network
    }

    pub fn physical(&self) -> &PhysicalParams {
        &self.config.physical
    }

    pub fn p0(&self) -> CliResult<PowerVector> {
        PowerVector::uniform_dbm(self.network().len(), P0_DBM).map_err(runtime)
    }

    pub fn hurricane(&self, algo: Algo) -> CliResult<HurricaneParams> {
        let mut p = match algo.hurricane() {
            Some(p) => p,
            None => return Err(CliError::Validation("gd has no hurricane parameters".into())),
        };
        for (key, value) in &self.algo_overrides {
            let key = key.trim_start_matches("algo.");
            let bad = || CliError::Validation(format!("bad value `{value}` for algo.{key}"));
            let num = || value.parse::<f64>().map_err(|_| bad());
            let int = || value.parse::<usize>().map_err(|_| bad());
            match key {
                "parcels" | "k" => p.parcels = int()?,
                "iterations" | "nf" => p.iterations = int()?,
                "r0" => p.r0 = num()?,
                "omega" => p.omega = num()?,
                "mu" => p.mu = num()?,
                "upsilon" => p.upsilon = num()?,
                "latency" => p.latency = int()?,
                "max_iterations" | "sufficient_decrease" | "shrink" | "gradient_tolerance" | "fd_step_db"
                | "initial_step_db" | "max_backtracks" => {}
                _ => return Err(CliError::Validation(format!("unknown optimizer parameter `algo.{key}`"))),
            }
        }
        p.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(p)
    }

    pub fn gd(&self) -> CliResult<GdParams> {
        let mut p = GdParams::default();
        for (key, value) in &self.algo_overrides {
            let key = key.trim_start_matches("algo.");
            let bad = || CliError::Validation(format!("bad value `{value}` for algo.{key}"));
            let num = || value.parse::<f64>().map_err(|_| bad());
            let int = || value.parse::<usize>().map_err(|_| bad());
            match key {
                "max_iterations" => p.max_iterations = int()?,
                "sufficient_decrease" => p.sufficient_decrease = num()?,
                "shrink" => p.shrink = num()?,
                "gradient_tolerance" => p.gradient_tolerance = num()?,
                "fd_step_db" => p.fd_step_db = num()?,
                "initial_step_db" => p.initial_step_db = num()?,
                "max_backtracks" => p.max_backtracks = int()?,
                _ => {}
            }
        }
        p.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(p)
    }

    pub fn choice(&self, algo: Algo) -> CliResult<OptimizerChoice> {
        Ok(match algo {
            Algo::Gd => OptimizerChoice::Gd(self.gd()?),
            a => OptimizerChoice::Hurricane(self.hurricane(a)?),
        })
    }

    pub fn model(&self, tau: f64) -> CliResult<QotModel> {
        QotModel::new(self.network(), self.physical(), tau).map_err(|e| CliError::Validation(e.to_string()))
    }
}

/// Files written by one experiment, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Outcome {
    pub files: Vec<String>,
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Out<'_> {
    fn create(&mut self, rel: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut w = self.create(rel)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn csv(&mut self, rel: &str, header: &str, rows: impl IntoIterator<Item = String>) -> CliResult<()> {
        let mut w = self.create(rel)?;
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned<T: Serialize>(body: &T) -> Versioned<'_, T> {
    Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    }
}

/// Runs the plan and writes its artifacts plus `manifest.json`.
pub fn run(plan: &Plan) -> CliResult<Outcome> {
    if plan.seeds.is_empty() {
        return Err(CliError::Validation("seed list is empty".into()));
    }
    let setup = Setup::load(plan)?;
    fs::create_dir_all(&plan.out)
        .map_err(|e| CliError::Validation(format!("output directory {}: {e}", plan.out.display())))?;
    let mut out = Out {
        dir: &plan.out,
        files: Vec::new(),
    };
    match plan.experiment {
        Experiment::Allocate => allocate(plan, &setup, &mut out, Monitoring::Perfect)?,
        Experiment::OpmNoise => {
            let monitoring = match setup.config.scenario.as_ref().map(|s| s.monitoring) {
                Some(m @ Monitoring::Lognormal { .. }) => m,
                _ => DEFAULT_OPM,
            };
            allocate(plan, &setup, &mut out, monitoring)?
        }
        Experiment::Ipo => ipo_experiment(plan, &setup, &mut out)?,
        Experiment::Cpos => cpos(plan, &setup, &mut out)?,
        Experiment::Pareto => pareto(plan, &setup, &mut out)?,
        Experiment::Ageing => ageing(plan, &setup, &mut out)?,
        Experiment::Perturbation => perturbation(plan, &setup, &mut out)?,
        Experiment::Complexity => complexity(plan, &setup, &mut out)?,
    }
    let outcome = Outcome { files: out.files };
    write_manifest(plan, &outcome)?;
    Ok(outcome)
}

fn write_manifest(plan: &Plan, outcome: &Outcome) -> CliResult<()> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        schema_version: u32,
        experiment: &'a str,
        created_unix_s: u64,
        config: Option<String>,
        algorithms: Vec<&'a str>,
        seeds: &'a [u64],
        tau: Option<f64>,
        overrides: &'a [(String, String)],
        files: &'a [String],
    }
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment: plan.experiment.name(),
        created_unix_s: created,
        config: plan.config.as_ref().map(|p| p.display().to_string()),
        algorithms: plan.algos.iter().map(|a| a.name()).collect(),
        seeds: &plan.seeds,
        tau: plan.tau,
        overrides: &plan.overrides,
        files: &outcome.files,
    };
    let f = File::create(plan.out.join("manifest.json"))?;
    serde_json::to_writer_pretty(f, &m).map_err(|e| CliError::Runtime(e.to_string()))
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

/// One report per seed (GD is deterministic: a single report) against
/// the matched reference optimum.
pub fn allocation_runs(
    setup: &Setup,
    algo: Algo,
    seeds: &[u64],
    tau: f64,
    monitoring: Monitoring,
) -> CliResult<Vec<RunReport>> {
    let model = setup.model(tau)?;
    let reference = reference_optimum(&model).map_err(runtime)?;
    allocation_runs_with(setup, &model, &reference, algo, seeds, monitoring)
}

pub fn allocation_runs_with(
    setup: &Setup,
    model: &QotModel,
    reference: &[f64],
    algo: Algo,
    seeds: &[u64],
    monitoring: Monitoring,
) -> CliResult<Vec<RunReport>> {
    let choice = setup.choice(algo)?;
    let p0 = setup.p0()?;
    let seeds: &[u64] = if algo == Algo::Gd && monitoring == Monitoring::Perfect {
        &seeds[..1]
    } else {
        seeds
    };
    seeds
        .par_iter()
        .map(|&s| scenarios::run_point_with_reference(model, reference, &choice, monitoring, &p0, s))
        .collect::<eon_power::Result<Vec<_>>>()
        .map_err(runtime)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationSummary {
    pub algorithm: String,
    pub runs: usize,
    pub tau: f64,
    pub mean_final_nmse: f64,
    pub median_final_nmse: f64,
    /// Mean NMSE over the last iterations, averaged over runs.
    pub plateau_nmse: f64,
    pub max_abs_power_penalty_db: f64,
    pub mean_max_abs_power_penalty_db: f64,
    pub mean_settling_iteration: Option<f64>,
    pub unsettled_runs: usize,
    pub mean_rm_integral_db: f64,
    pub success_rate: f64,
    pub mean_flops: f64,
}

impl AllocationSummary {
    pub fn of(reports: &[RunReport]) -> AllocationSummary {
        let nmse: Vec<f64> = reports.iter().filter_map(RunReport::final_nmse).collect();
        let mut sorted = nmse.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted.get(sorted.len() / 2).copied().unwrap_or(f64::NAN);
        let pp: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.power_penalty_db().map(|p| metrics::max_abs(&p)))
            .collect();
        let settled: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.settling.as_ref().and_then(|s| s.mean()))
            .collect();
        let plateau: Vec<f64> = reports
            .iter()
            .map(|r| {
                let tail: Vec<f64> = r
                    .rows
                    .iter()
                    .rev()
                    .take(PLATEAU_WINDOW)
                    .filter_map(|row| row.nmse)
                    .collect();
                mean(&tail)
            })
            .collect();
        let n = reports.len().max(1) as f64;
        AllocationSummary {
            algorithm: reports.first().map(|r| r.algorithm.clone()).unwrap_or_default(),
            runs: reports.len(),
            tau: reports.first().map(|r| r.tau).unwrap_or(0.0),
            mean_final_nmse: mean(&nmse),
            median_final_nmse: median,
            plateau_nmse: mean(&plateau),
            max_abs_power_penalty_db: pp.iter().copied().fold(0.0, f64::max),
            mean_max_abs_power_penalty_db: mean(&pp),
            mean_settling_iteration: (!settled.is_empty()).then(|| mean(&settled)),
            unsettled_runs: reports.len() - settled.len(),
            mean_rm_integral_db: reports.iter().map(|r| r.rm_integral_db).sum::<f64>() / n,
            success_rate: reports.iter().filter(|r| r.success()).count() as f64 / n,
            mean_flops: reports.iter().map(|r| r.flops).sum::<f64>() / n,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-iteration mean NMSE and mean J₁ over runs.
pub fn mean_traces(reports: &[RunReport]) -> Vec<(usize, f64, f64)> {
    let len = reports.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| {
            let nmse: Vec<f64> = reports.iter().filter_map(|r| r.rows[i].nmse).collect();
            let j1: Vec<f64> = reports.iter().map(|r| r.rows[i].j1).collect();
            (reports[0].rows[i].iteration, mean(&nmse), mean(&j1))
        })
        .collect()
}

fn allocate(plan: &Plan, setup: &Setup, out: &mut Out, monitoring: Monitoring) -> CliResult<()> {
    let tau = plan.tau.unwrap_or(setup.physical().tau0);
    let model = setup.model(tau)?;
    let reference = reference_optimum(&model).map_err(runtime)?;
    let prefix = plan.experiment.name();
    let ids: Vec<String> = model.network().lightpaths().iter().map(|l| l.id().to_string()).collect();
    out.csv(
        &format!("{prefix}/reference.csv"),
        "channel,p_star_w,p_star_dbm",
        ids.iter()
            .zip(&reference)
            .map(|(id, &w)| format!("{id},{},{}", f(w), f(eon_power::units::watt_to_dbm(w)))),
    )?;
    let mut summaries = Vec::new();
    for algo in plan.algos_or(&[Algo::Chso, Algo::Hso]) {
        let reports = allocation_runs_with(setup, &model, &reference, algo, &plan.seeds, monitoring)?;
        for r in &reports {
            let tag = r.seed.map(|s| format!("seed_{s}")).unwrap_or_else(|| "run".into());
            let mut w = out.create(&format!("{prefix}/{}/{tag}_trace.csv", algo.name()))?;
            r.write_trace_csv(&mut w)?;
            w.flush()?;
            let mut w = out.create(&format!("{prefix}/{}/{tag}_summary.json", algo.name()))?;
            r.write_summary_json(&mut w)?;
            w.flush()?;
        }
        out.csv(
            &format!("{prefix}/{}_nmse.csv", algo.name()),
            "iteration,mean_nmse,mean_j1",
            mean_traces(&reports)
                .into_iter()
                .map(|(n, e, j)| format!("{n},{},{}", f(e), f(j))),
        )?;
        summaries.push(AllocationSummary::of(&reports));
    }
    out.csv(
        &format!("{prefix}/comparison.csv"),
        "algorithm,runs,mean_final_nmse,median_final_nmse,plateau_nmse,max_abs_pp_db,mean_settling_iteration,mean_rm_integral_db,success_rate,mean_flops",
        summaries.iter().map(|s| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                s.algorithm,
                s.runs,
                f(s.mean_final_nmse),
                f(s.median_final_nmse),
                f(s.plateau_nmse),
                f(s.max_abs_power_penalty_db),
                opt(s.mean_settling_iteration),
                f(s.mean_rm_integral_db),
                s.success_rate,
                f(s.mean_flops)
            )
        }),
    )?;
    #[derive(Serialize)]
    struct Body<'a> {
        monitoring: Monitoring,
        summaries: &'a [AllocationSummary],
    }
    out.json(
        &format!("{prefix}/summary.json"),
        &versioned(&Body {
            monitoring,
            summaries: &summaries,
        }),
    )
}

fn ipo_experiment(plan: &Plan, setup: &Setup, out: &mut Out) -> CliResult<()> {
    let tau = plan.tau.unwrap_or(setup.physical().tau0);
    let model = setup.model(tau)?;
    let p0 = setup.p0()?;
    let cfg = IpoConfig {
        realizations: plan.seeds.len(),
        ..IpoConfig::default()
    };
    let mut results = Vec::new();
    for algo in plan.algos_or(&[Algo::Chso, Algo::Hso]) {
        let base = setup.hurricane(algo)?;
        let outcome = ipo::run_ipo(&cfg, base.r0, base.omega, |r0, omega| {
            let params = HurricaneParams { r0, omega, ..base };
            ipo::final_j1_stats(&model, &params, &p0, &plan.seeds)
        })
        .map_err(runtime)?;
        out.csv(
            &format!("ipo/{}_steps.csv", algo.name()),
            "loop,target,r0,omega,mean_j1,std_j1",
            outcome.steps.iter().map(|s| {
                format!(
                    "{},{:?},{},{},{},{}",
                    s.loop_index,
                    s.target,
                    f(s.r0),
                    f(s.omega),
                    f(s.mean_j1),
                    f(s.std_j1)
                )
            }),
        )?;
        results.push((algo.name(), outcome));
    }
    #[derive(Serialize)]
    struct Entry<'a> {
        algorithm: &'a str,
        r0: f64,
        omega: f64,
        per_loop: &'a [(f64, f64)],
    }
    let entries: Vec<Entry> = results
        .iter()
        .map(|(a, o)| Entry {
            algorithm: a,
            r0: o.r0,
            omega: o.omega,
            per_loop: &o.per_loop,
        })
        .collect();
    #[derive(Serialize)]
    struct Body<'a> {
        algorithms: Vec<Entry<'a>>,
    }
    out.json("ipo/outcome.json", &versioned(&Body { algorithms: entries }))
}

/// Log-spaced r0 grid of the success-band scan.
pub fn r0_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=8).map(|k| 10f64.powf(-8.0 + 0.5 * k as f64)).collect();
    g.extend([5e-6, 5.8318e-6, 5e-5]);
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn write_surface(out: &mut Out, rel: &str, surface: &Surface) -> CliResult<()> {
    let mut w = out.create(rel)?;
    surface.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cpos(plan: &Plan, setup: &Setup, out: &mut Out) -> CliResult<()> {
    let tau = plan.tau.unwrap_or(setup.physical().tau0);
    let model = setup.model(tau)?;
    let p0 = setup.p0()?;
    for algo in plan.algos_or(&[Algo::Chso, Algo::Hso]) {
        let base = setup.hurricane(algo)?;
        let checkpoints: Vec<usize> = (0..=base.iterations).step_by(10).collect();
        let surface = ipo::cpos_ps1(&model, &base, &p0, &r0_grid(), &checkpoints, &plan.seeds).map_err(runtime)?;
        write_surface(out, &format!("cpos/{}_ps1.csv", algo.name()), &surface)?;
    }
    Ok(())
}

fn pareto(plan: &Plan, setup: &Setup, out: &mut Out) -> CliResult<()> {
    let tau = plan.tau.unwrap_or(setup.physical().tau0);
    let model = setup.model(tau)?;
    let p0 = setup.p0()?;
    let m = model.len();
    let route_sum = model.network().route_element_sum();
    let k_grid: Vec<usize> = (1..=20).map(|nw| nw * m).collect();
    let nf_grid: Vec<usize> = (100..=500).step_by(50).collect();
    #[derive(Serialize)]
    struct Entry {
        algorithm: String,
        frontier: Vec<ipo::ParetoPoint>,
        selected: Option<ipo::ParetoPoint>,
    }
    let mut entries = Vec::new();
    for algo in plan.algos_or(&[Algo::Chso, Algo::Hso]) {
        let base = setup.hurricane(algo)?;
        let surface = ipo::cpos_ps2(&model, &base, &p0, &k_grid, &nf_grid, &plan.seeds).map_err(runtime)?;
        write_surface(out, &format!("pareto/{}_ps2.csv", algo.name()), &surface)?;
        let fa = flop_algorithm(algo);
        let frontier = ipo::pareto_frontier(&surface.success_set(), |k, nf| {
            metrics::flops(&FlopModel::hurricane(fa, m as u64, k as u64, nf as u64, route_sum))
        });
        entries.push(Entry {
            algorithm: algo.name().into(),
            selected: ipo::select_tradeoff(&frontier),
            frontier,
        });
    }
    #[derive(Serialize)]
    struct Body {
        algorithms: Vec<Entry>,
    }
    out.json("pareto/frontier.json", &versioned(&Body { algorithms: entries }))
}

fn flop_algorithm(algo: Algo) -> FlopAlgorithm {
    match algo {
        Algo::Chso => FlopAlgorithm::Chso,
        Algo::Hso => FlopAlgorithm::Hso,
        Algo::Gd => FlopAlgorithm::Gd,
    }
}

fn taus(plan: &Plan, setup: &Setup) -> Vec<f64> {
    if let Some(t) = plan.tau {
        return vec![t];
    }
    match &setup.config.scenario {
        Some(s) if s.tau_schedule.len() > 1 => s.tau_schedule.clone(),
        _ => (0..=5).map(|k| 2.0 * k as f64).collect(),
    }
}

/// Power-penalty band implied by the residual-margin tolerances, dB.
pub fn penalty_band_db(physical: &PhysicalParams) -> (f64, f64) {
    (linear_to_db(1.0 - physical.lambda1), linear_to_db(1.0 + physical.lambda2))
}

fn ageing(plan: &Plan, setup: &Setup, out: &mut Out) -> CliResult<()> {
    let schedule = taus(plan, setup);
    let p0 = setup.p0()?;
    let (lower, upper) = penalty_band_db(setup.physical());
    #[derive(Serialize)]
    struct Entry {
        algorithm: String,
        points: Vec<scenarios::AgeingPoint>,
        crosses_lower_bound: bool,
    }
    let mut entries = Vec::new();
    for algo in plan.algos_or(&[Algo::Chso, Algo::Hso]) {
        let choice = setup.choice(algo)?;
        let seeds: &[u64] = if algo == Algo::Gd { &plan.seeds[..1] } else { &plan.seeds };
        let points = scenarios::run_ageing(setup.network(), setup.physical(), &choice, &schedule, seeds, &p0)
            .map_err(runtime)?;
        out.csv(
            &format!("ageing/{}.csv", algo.name()),
            "tau,mean_pp_db,std_pp_db,min_channel_pp_db,success_rate",
            points.iter().map(|p| {
                format!(
                    "{},{},{},{},{}",
                    p.tau,
                    f(p.mean_pp_db),
                    f(p.std_pp_db),
                    f(p.min_channel_pp_db),
                    p.success_rate
                )
            }),
        )?;
        entries.push(Entry {
            algorithm: algo.name().into(),
            crosses_lower_bound: points.iter().any(|p| p.mean_pp_db < lower),
            points,
        });
    }
    #[derive(Serialize)]
    struct Body<'a> {
        lower_bound_db: f64,
        upper_bound_db: f64,
        series: &'a [Entry],
    }
    out.json(
        "ageing/summary.json",
        &versioned(&Body {
            lower_bound_db: lower,
            upper_bound_db: upper,
            series: &entries,
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropSeries {
    pub algorithm: String,
    pub iterations: Vec<usize>,
    pub mean_compensated: Vec<f64>,
    pub mean_uncompensated: Vec<f64>,
}

impl DropSeries {
    pub fn last_compensated(&self) -> f64 {
        *self.mean_compensated.last().unwrap_or(&f64::NAN)
    }

    pub fn last_uncompensated(&self) -> f64 {
        *self.mean_uncompensated.last().unwrap_or(&f64::NAN)
    }
}

/// Seed-averaged drop trajectories.
pub fn drop_series(setup: &Setup, algo: Algo, seeds: &[u64]) -> CliResult<DropSeries> {
    let spec = setup
        .config
        .scenario
        .clone()
        .ok_or_else(|| CliError::Validation("config has no [scenario] section".into()))?;
    if spec.drops.is_empty() {
        return Err(CliError::Validation("scenario defines no drops".into()));
    }
    let params = setup.hurricane(algo)?;
    let p0 = setup.p0()?;
    let runs = seeds
        .par_iter()
        .map(|&s| scenarios::run_drop(setup.network(), setup.physical(), &params, &spec, &p0, s))
        .collect::<eon_power::Result<Vec<_>>>()
        .map_err(runtime)?;
    let len = runs[0].iterations.len();
    let avg = |pick: fn(&scenarios::DropTrajectory) -> &Vec<f64>| -> Vec<f64> {
        (0..len)
            .map(|i| runs.iter().map(|r| pick(r)[i]).sum::<f64>() / runs.len() as f64)
            .collect()
    };
    Ok(DropSeries {
        algorithm: algo.name().into(),
        iterations: runs[0].iterations.clone(),
        mean_compensated: avg(|r| &r.nmse_compensated),
        mean_uncompensated: avg(|r| &r.nmse_uncompensated),
    })
}

fn perturbation(plan: &Plan, setup: &Setup, out: &mut Out) -> CliResult<()> {
    let algos: Vec<Algo> = plan
        .algos_or(&[Algo::Chso, Algo::Hso])
        .into_iter()
        .filter(|&a| a != Algo::Gd)
        .collect();
    if algos.is_empty() {
        return Err(CliError::Validation("perturbation needs chso or hso".into()));
    }
    let series = algos
        .iter()
        .map(|&a| drop_series(setup, a, &plan.seeds))
        .collect::<CliResult<Vec<_>>>()?;
    let mut header = String::from("iteration");
    for s in &series {
        header.push_str(&format!(",nmse_compensated_{0},nmse_uncompensated_{0}", s.algorithm));
    }
    let rows = (0..series[0].iterations.len()).map(|i| {
        let mut row = series[0].iterations[i].to_string();
        for s in &series {
            row.push_str(&format!(",{},{}", f(s.mean_compensated[i]), f(s.mean_uncompensated[i])));
        }
        row
    });
    out.csv("perturbation/nmse.csv", &header, rows)?;
    #[derive(Serialize)]
    struct Final<'a> {
        algorithm: &'a str,
        iteration: usize,
        nmse_compensated: f64,
        nmse_uncompensated: f64,
    }
    let finals: Vec<Final> = series
        .iter()
        .map(|s| Final {
            algorithm: &s.algorithm,
            iteration: *s.iterations.last().unwrap_or(&0),
            nmse_compensated: s.last_compensated(),
            nmse_uncompensated: s.last_uncompensated(),
        })
        .collect();
    #[derive(Serialize)]
    struct Body<'a> {
        finals: Vec<Final<'a>>,
    }
    out.json("perturbation/summary.json", &versioned(&Body { finals }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub scenario: String,
    pub m: usize,
    pub algorithm: String,
    pub k: usize,
    pub nf: usize,
    pub nbt: f64,
    pub route_sum: u64,
    pub flops: f64,
}

/// Log-log slope of flops against M between the first and last rows of
/// one algorithm.
pub fn loglog_slope(rows: &[ComplexityRow], algorithm: &str) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.algorithm == algorithm)
        .map(|r| ((r.m as f64).ln(), r.flops.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    // Least squares.
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn complexity_rows(setup: &Setup, scenario_names: &[String]) -> CliResult<Vec<ComplexityRow>> {
    // GD iteration and backtrack counts measured once on the base network.
    let base = setup.model(setup.physical().tau0)?;
    let gd_run = optimize_gd(&base, &setup.gd()?, &setup.p0()?).map_err(runtime)?;
    let chso = setup.hurricane(Algo::Chso)?;
    let hso = setup.hurricane(Algo::Hso)?;
    let mut rows = Vec::new();
    for name in scenario_names {
        let times = scenario_replicas(name)?;
        let net = setup
            .network()
            .replicate(times)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let m = net.len();
        let route_sum = net.route_element_sum();
        for (algo, p) in [(Algo::Chso, chso), (Algo::Hso, hso)] {
            rows.push(ComplexityRow {
                scenario: name.to_ascii_uppercase(),
                m,
                algorithm: algo.name().into(),
                k: p.parcels,
                nf: p.iterations,
                nbt: 0.0,
                route_sum,
                flops: metrics::flops(&FlopModel::hurricane(
                    flop_algorithm(algo),
                    m as u64,
                    p.parcels as u64,
                    p.iterations as u64,
                    route_sum,
                )),
            });
        }
        rows.push(ComplexityRow {
            scenario: name.to_ascii_uppercase(),
            m,
            algorithm: "gd".into(),
            k: 0,
            nf: gd_run.iterations(),
            nbt: gd_run.mean_backtracks(),
            route_sum,
            flops: metrics::flops(&FlopModel::gd(
                m as u64,
                gd_run.iterations() as u64,
                gd_run.mean_backtracks(),
                route_sum,
            )),
        });
    }
    Ok(rows)
}

fn complexity(plan: &Plan, setup: &Setup, out: &mut Out) -> CliResult<()> {
    let rows = complexity_rows(setup, &plan.scenarios)?;
    out.csv(
        "complexity/flops.csv",
        "scenario,m,algorithm,k,nf,nbt,route_sum,flops,mflops",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.m,
                r.algorithm,
                r.k,
                r.nf,
                r.nbt,
                r.route_sum,
                f(r.flops),
                r.flops / 1e6
            )
        }),
    )?;
    #[derive(Serialize)]
    struct Quoted {
        algorithm: &'static str,
        quoted_mflops: f64,
        computed_mflops: Option<f64>,
    }
    let computed = |a: &str| {
        rows.iter()
            .find(|r| r.algorithm == a && r.scenario == "A")
            .map(|r| r.flops / 1e6)
    };
    #[derive(Serialize)]
    struct Body<'a> {
        rows: &'a [ComplexityRow],
        loglog_slope: Vec<(&'static str, Option<f64>)>,
        quoted_vs_computed: Vec<Quoted>,
    }
    out.json(
        "complexity/summary.json",
        &versioned(&Body {
            rows: &rows,
            loglog_slope: ["chso", "hso", "gd"]
                .into_iter()
                .map(|a| (a, loglog_slope(&rows, a)))
                .collect(),
            quoted_vs_computed: vec![
                Quoted {
                    algorithm: "chso",
                    quoted_mflops: QUOTED_MFLOPS_CHSO,
                    computed_mflops: computed("chso"),
                },
                Quoted {
                    algorithm: "hso",
                    quoted_mflops: QUOTED_MFLOPS_HSO,
                    computed_mflops: computed("hso"),
                },
            ],
        }),
    )
}

/// Variant name of a parameter set, for labels.
pub fn variant_name(p: &HurricaneParams) -> &'static str {
    match p.variant {
        Variant::Chaotic => "chso",
        Variant::Uniform => "hso",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("1,2").unwrap(), vec![1, 2]);
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("3, 1..2").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("fig9".parse::<Experiment>().is_err());
        assert_eq!("CHSO".parse::<Algo>().unwrap(), Algo::Chso);
    }

    #[test]
    fn overrides_reach_optimizer() {
        let mut plan = Plan::new(Experiment::Allocate, "unused");
        plan.overrides = vec![
            ("algo.r0".into(), "1e-5".into()),
            ("algo.iterations".into(), "12".into()),
            ("physical.nli_scale".into(), "0.003".into()),
        ];
        let setup = Setup::load(&plan).unwrap();
        let p = setup.hurricane(Algo::Chso).unwrap();
        assert_eq!(p.r0, 1e-5);
        assert_eq!(p.iterations, 12);
        assert_eq!(setup.physical().nli_scale, 0.003);

        plan.overrides = vec![("algo.bogus".into(), "1".into())];
        assert_eq!(Setup::load(&plan).err().unwrap().exit_code(), 1);
    }

    #[test]
    fn band_matches_tolerances() {
        let (lo, hi) = penalty_band_db(&PhysicalParams::default());
        assert!((lo + 1.7407e-2).abs() < 1e-5);
        assert!(hi > 0.0);
    }

    #[test]
    fn slope_of_power_law() {
        let rows: Vec<ComplexityRow> = [12usize, 120, 240]
            .iter()
            .map(|&m| ComplexityRow {
                scenario: String::new(),
                m,
                algorithm: "x".into(),
                k: 0,
                nf: 0,
                nbt: 0.0,
                route_sum: 0,
                flops: 3.0 * (m as f64).powi(2),
            })
            .collect();
        assert!((loglog_slope(&rows, "x").unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&rows, "y").is_none());
    }
}
