//! Imperfect operating conditions: noisy SNR monitoring, ageing, and
//! power transients after channel drops.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gd::{minimize, reference_optimum, GdParams};
use crate::hurricane::{optimize_with, z_source, Bounds, HurricaneParams};
use crate::metrics;
use crate::network::{Network, PhysicalParams};
use crate::pressure::Pressure;
use crate::qot::{j1_from_psi, PowerVector, QotModel};
use crate::report::RunReport;
use crate::units::{db_to_linear, dbm_to_watt};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Monitoring {
    #[default]
    Perfect,
    /// Observed SNR = SNR·(1 + ε), ε = 10^(X/10) − 1, X ~ N(μ, σ) in dB.
    Lognormal { mu_db: f64, sigma_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// Peak A^n.
    #[default]
    Geometric,
    /// Peak A.
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Perturbation {
    #[default]
    Off,
    /// Active for start < n ≤ end, indexed from the window start.
    Sine {
        amplitude_db: f64,
        start: usize,
        end: usize,
        #[serde(default)]
        envelope: Envelope,
    },
}

impl Perturbation {
    /// dB offset at global iteration n.
    pub fn offset_db(&self, n: usize) -> f64 {
        match *self {
            Perturbation::Off => 0.0,
            Perturbation::Sine {
                amplitude_db,
                start,
                end,
                envelope,
            } => {
                if n > start && n <= end {
                    perturbation_db(n - start, amplitude_db, envelope)
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropEvent {
    pub route: String,
    /// The route is removed after this iteration.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub monitoring: Monitoring,
    pub tau_schedule: Vec<f64>,
    pub perturbation: Perturbation,
    pub drops: Vec<DropEvent>,
    /// Channels passing through this node are perturbed.
    pub perturbed_node: Option<String>,
    /// Length of a drop trajectory; defaults to the last drop plus N_f.
    pub total_iterations: Option<usize>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            monitoring: Monitoring::Perfect,
            tau_schedule: vec![0.0],
            perturbation: Perturbation::Off,
            drops: Vec::new(),
            perturbed_node: None,
            total_iterations: None,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self, physical: &PhysicalParams, network: &Network) -> Result<()> {
        if let Monitoring::Lognormal { mu_db, sigma_db } = self.monitoring {
            if !(sigma_db.is_finite() && sigma_db >= 0.0 && mu_db.is_finite()) {
                return Err(Error::invalid("scenario.monitoring.sigma_db", "must be finite and >= 0"));
            }
        }
        for (k, &tau) in self.tau_schedule.iter().enumerate() {
            if !(tau >= physical.tau0 && tau <= physical.tau_end) {
                return Err(Error::invalid(
                    format!("scenario.tau_schedule[{k}]"),
                    format!("{tau} outside [{}, {}]", physical.tau0, physical.tau_end),
                ));
            }
        }
        if let Perturbation::Sine {
            amplitude_db, start, end, ..
        } = self.perturbation
        {
            if !(amplitude_db.is_finite() && amplitude_db >= 0.0) || end < start {
                return Err(Error::invalid("scenario.perturbation", "need amplitude >= 0 and start <= end"));
            }
        }
        for (k, d) in self.drops.iter().enumerate() {
            if network.index_of(&d.route).is_none() {
                return Err(Error::invalid(
                    format!("scenario.drops[{k}].route"),
                    format!("unknown route `{}`", d.route),
                ));
            }
            if let Some(total) = self.total_iterations {
                if d.iteration >= total {
                    return Err(Error::invalid(
                        format!("scenario.drops[{k}].iteration"),
                        "must precede the end of the trajectory",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// ε drawn in the dB domain and truncated at −1.
pub fn lognormal_epsilon<R: rand::Rng + ?Sized>(mu_db: f64, sigma_db: f64, rng: &mut R) -> f64 {
    let x = if sigma_db == 0.0 {
        mu_db
    } else {
        Normal::new(mu_db, sigma_db).expect("finite sigma").sample(rng)
    };
    (db_to_linear(x) - 1.0).max(-1.0)
}

pub fn noisy_snr<R: rand::Rng + ?Sized>(true_snr: f64, mu_db: f64, sigma_db: f64, rng: &mut R) -> f64 {
    true_snr * (1.0 + lognormal_epsilon(mu_db, sigma_db, rng))
}

/// A^n·sin(nπ/2) (or A·sin(nπ/2) for a constant envelope), in dB.
pub fn perturbation_db(n: usize, amplitude_db: f64, envelope: Envelope) -> f64 {
    let sine = match n % 4 {
        1 => 1.0,
        3 => -1.0,
        _ => return 0.0,
    };
    let peak = match envelope {
        Envelope::Geometric => amplitude_db.powi(n as i32),
        Envelope::Constant => amplitude_db,
    };
    sine * peak
}

/// Pressure seen through monitoring noise and power transients.
pub struct ScenarioPressure<'a> {
    model: &'a QotModel,
    upsilon: f64,
    monitoring: Monitoring,
    perturbation: Perturbation,
    affected: Vec<bool>,
    offset: usize,
    current: usize,
    rng: ChaCha8Rng,
    buf: Vec<f64>,
}

impl<'a> ScenarioPressure<'a> {
    pub fn new(model: &'a QotModel, upsilon: f64, monitoring: Monitoring, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        ScenarioPressure {
            model,
            upsilon,
            monitoring,
            perturbation: Perturbation::Off,
            affected: vec![false; model.len()],
            offset: 0,
            current: 0,
            rng,
            buf: vec![0.0; model.len()],
        }
    }

    /// Applies `perturbation` to the `affected` channels; local iteration
    /// n corresponds to global iteration `offset + n`.
    pub fn with_perturbation(mut self, perturbation: Perturbation, affected: Vec<bool>, offset: usize) -> Self {
        self.perturbation = perturbation;
        self.affected = affected;
        self.offset = offset;
        self
    }

    /// Powers actually on the line for nominal `p` at global iteration n.
    pub fn launched(&self, p: &[f64], n: usize) -> Vec<f64> {
        launched(p, &self.affected, self.perturbation.offset_db(n))
    }
}

fn launched(p: &[f64], affected: &[bool], offset_db: f64) -> Vec<f64> {
    let factor = db_to_linear(offset_db);
    p.iter()
        .zip(affected)
        .map(|(&w, &a)| if a && offset_db != 0.0 { w * factor } else { w })
        .collect()
}

impl Pressure for ScenarioPressure<'_> {
    fn begin_iteration(&mut self, n: usize) {
        self.current = self.offset + n;
    }

    fn pressure(&mut self, p: &[f64]) -> f64 {
        let off = self.perturbation.offset_db(self.current);
        let line: &[f64] = if off != 0.0 {
            let factor = db_to_linear(off);
            for i in 0..p.len() {
                self.buf[i] = if self.affected[i] { p[i] * factor } else { p[i] };
            }
            &self.buf
        } else {
            p
        };
        match self.monitoring {
            Monitoring::Perfect => self.upsilon * self.model.j1(line),
            Monitoring::Lognormal { mu_db, sigma_db } => {
                let mut snr = self.model.snr_all(line);
                for s in &mut snr {
                    *s = noisy_snr(*s, mu_db, sigma_db, &mut self.rng);
                }
                self.upsilon * j1_from_psi(&self.model.psi_from_snr(&snr))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OptimizerChoice {
    Hurricane(HurricaneParams),
    Gd(GdParams),
}

/// Runs one optimizer at one lifetime point under the given monitoring,
/// reporting against the matched-condition reference optimum.
pub fn run_point(
    network: &Network,
    physical: &PhysicalParams,
    choice: &OptimizerChoice,
    monitoring: Monitoring,
    tau: f64,
    p0: &PowerVector,
    seed: u64,
) -> Result<RunReport> {
    let model = QotModel::new(network, physical, tau)?;
    let reference = reference_optimum(&model)?;
    run_point_with_reference(&model, &reference, choice, monitoring, p0, seed)
}

pub fn run_point_with_reference(
    model: &QotModel,
    reference: &[f64],
    choice: &OptimizerChoice,
    monitoring: Monitoring,
    p0: &PowerVector,
    seed: u64,
) -> Result<RunReport> {
    match choice {
        OptimizerChoice::Hurricane(params) => {
            let params = params.with_seed(seed);
            let mut pressure = ScenarioPressure::new(model, params.upsilon, monitoring, seed);
            let mut z = z_source(&params);
            let run = optimize_with(p0.watts(), &params, Bounds::of(model.params()), &mut pressure, z.as_mut())?;
            RunReport::from_hurricane(model, &run, Some(reference))
        }
        OptimizerChoice::Gd(params) => {
            let mut pressure = ScenarioPressure::new(model, 1.0, monitoring, seed);
            let pp = model.params();
            let run = minimize(
                |x: &[f64]| {
                    let w: Vec<f64> = x.iter().map(|&d| dbm_to_watt(d)).collect();
                    pressure.pressure(&w)
                },
                &p0.to_dbm(),
                pp.p_min_dbm,
                pp.p_max_dbm,
                params,
            )?;
            RunReport::from_gd(model, &run, Some(reference))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeingPoint {
    pub tau: f64,
    /// Mean power penalty over runs and channels, dB.
    pub mean_pp_db: f64,
    pub std_pp_db: f64,
    /// Most negative per-channel mean penalty, dB.
    pub min_channel_pp_db: f64,
    pub runs: usize,
    pub success_rate: f64,
}

/// Cold-start runs at every τ against per-τ reference optima.
pub fn run_ageing(
    network: &Network,
    physical: &PhysicalParams,
    choice: &OptimizerChoice,
    taus: &[f64],
    seeds: &[u64],
    p0: &PowerVector,
) -> Result<Vec<AgeingPoint>> {
    if taus.is_empty() || seeds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    taus.iter()
        .map(|&tau| {
            let model = QotModel::new(network, physical, tau)?;
            let reference = reference_optimum(&model)?;
            let reports = seeds
                .par_iter()
                .map(|&s| run_point_with_reference(&model, &reference, choice, Monitoring::Perfect, p0, s))
                .collect::<Result<Vec<_>>>()?;
            let m = model.len();
            let mut all = Vec::with_capacity(m * reports.len());
            let mut per_channel = vec![0.0; m];
            for r in &reports {
                let pp = metrics::power_penalty_db(&r.final_powers_w, &reference)?;
                for (acc, v) in per_channel.iter_mut().zip(&pp) {
                    *acc += v / reports.len() as f64;
                }
                all.extend(pp);
            }
            let stats = crate::ipo::EvalStats::of(&all);
            Ok(AgeingPoint {
                tau,
                mean_pp_db: stats.mean,
                std_pp_db: stats.std,
                min_channel_pp_db: per_channel.iter().copied().fold(f64::INFINITY, f64::min),
                runs: reports.len(),
                success_rate: reports.iter().filter(|r| r.success()).count() as f64 / reports.len() as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropTrajectory {
    /// Global iterations 1..=total.
    pub iterations: Vec<usize>,
    pub channels: Vec<Vec<String>>,
    /// NMSE of the re-optimized launch powers.
    pub nmse_compensated: Vec<f64>,
    /// NMSE when the pre-drop powers are kept.
    pub nmse_uncompensated: Vec<f64>,
    pub final_powers_w: Vec<f64>,
    pub reference_w: Vec<f64>,
}

impl DropTrajectory {
    pub fn final_compensated(&self) -> f64 {
        *self.nmse_compensated.last().unwrap_or(&f64::NAN)
    }

    pub fn final_uncompensated(&self) -> f64 {
        *self.nmse_uncompensated.last().unwrap_or(&f64::NAN)
    }
}

fn phase_seed(seed: u64, phase: usize) -> u64 {
    seed.wrapping_add((phase as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Drop trajectory: the optimizer first settles the full network from
/// `p0`, then runs on, re-starting on the surviving channels after every
/// drop while the transient hits the channels through the perturbed node.
pub fn run_drop(
    network: &Network,
    physical: &PhysicalParams,
    params: &HurricaneParams,
    spec: &ScenarioSpec,
    p0: &PowerVector,
    seed: u64,
) -> Result<DropTrajectory> {
    spec.validate(physical, network)?;
    let tau = spec.tau_schedule.first().copied().unwrap_or(physical.tau0);
    let mut boundaries: Vec<usize> = spec.drops.iter().map(|d| d.iteration).collect();
    boundaries.sort_unstable();
    boundaries.dedup();
    let total = spec
        .total_iterations
        .unwrap_or(boundaries.last().copied().unwrap_or(0) + params.iterations);
    if boundaries.iter().any(|&b| b >= total) {
        return Err(Error::InvalidParams("drops must precede the end of the trajectory".into()));
    }

    let full = QotModel::new(network, physical, tau)?;
    let settle = optimize_with(
        p0.watts(),
        &params.with_seed(seed),
        Bounds::of(physical),
        &mut ScenarioPressure::new(&full, params.upsilon, spec.monitoring, seed),
        z_source(&params.with_seed(seed)).as_mut(),
    )?;

    let mut current = network.clone();
    let mut eye = settle.eye().to_vec();
    let mut frozen = eye.clone();
    let mut out = DropTrajectory {
        iterations: Vec::with_capacity(total),
        channels: Vec::new(),
        nmse_compensated: Vec::with_capacity(total),
        nmse_uncompensated: Vec::with_capacity(total),
        final_powers_w: Vec::new(),
        reference_w: Vec::new(),
    };
    let mut edges = vec![0];
    edges.extend(&boundaries);
    edges.push(total);
    for (phase, w) in edges.windows(2).enumerate() {
        let (start, end) = (w[0], w[1]);
        if phase > 0 {
            let gone: Vec<&str> = spec
                .drops
                .iter()
                .filter(|d| d.iteration == start)
                .map(|d| d.route.as_str())
                .collect();
            let (next, keep) = current.without(&gone)?;
            eye = keep.iter().map(|&k| eye[k]).collect();
            frozen = keep.iter().map(|&k| frozen[k]).collect();
            current = next;
        }
        out.channels
            .push(current.lightpaths().iter().map(|l| l.id().to_string()).collect());
        if end == start {
            continue;
        }
        let model = QotModel::new(&current, physical, tau)?;
        let reference = reference_optimum(&model)?;
        let affected: Vec<bool> = current
            .lightpaths()
            .iter()
            .map(|l| spec.perturbed_node.as_deref().is_some_and(|n| l.route.traverses(n)))
            .collect();
        let phase_params = HurricaneParams {
            iterations: end - start,
            seed: phase_seed(seed, phase + 1),
            ..*params
        };
        let mut pressure = ScenarioPressure::new(&model, params.upsilon, spec.monitoring, phase_params.seed)
            .with_perturbation(spec.perturbation, affected.clone(), start);
        let run = optimize_with(
            &eye,
            &phase_params,
            Bounds::of(physical),
            &mut pressure,
            z_source(&phase_params).as_mut(),
        )?;
        for local in 1..=(end - start) {
            let n = start + local;
            let off = spec.perturbation.offset_db(n);
            let comp = launched(run.applied(local), &affected, off);
            let unc = launched(&frozen, &affected, off);
            out.iterations.push(n);
            out.nmse_compensated.push(metrics::nmse(&comp, &reference)?);
            out.nmse_uncompensated.push(metrics::nmse(&unc, &reference)?);
        }
        eye = run.eye().to_vec();
        out.reference_w = reference;
    }
    out.final_powers_w = eye;
    Ok(out)
}
