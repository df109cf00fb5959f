//! Input-parameter optimization: golden-section tuning of r0 and ω,
//! success-probability surfaces, and the (K, N_f) Pareto frontier.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hurricane::{optimize, HurricaneParams, OMEGA_MAX};
use crate::metrics::within_band;
use crate::qot::{PowerVector, QotModel};

/// φ = (1 + √5) / 2.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Ps threshold defining success.
pub const SUCCESS_THRESHOLD: f64 = 0.94;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenResult {
    /// Midpoint of the final bracket.
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
    /// Bracket width before each reduction and after the last.
    pub widths: Vec<f64>,
    /// (point, objective) in evaluation order.
    pub samples: Vec<(f64, f64)>,
}

/// Golden-section minimization of a unimodal `f` on [lo, hi], stopping
/// once the bracket is narrower than `tol`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<GoldenResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidParams(format!("bad bracket [{lo}, {hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let inv = 1.0 / GOLDEN_RATIO;
    let mut samples = Vec::new();
    let mut eval = |x: f64, samples: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective(x));
        }
        samples.push((x, v));
        Ok(v)
    };
    let (mut a, mut b) = (lo, hi);
    let mut widths = vec![b - a];
    if b - a > tol {
        let mut c = b - inv * (b - a);
        let mut d = a + inv * (b - a);
        let mut fc = eval(c, &mut samples)?;
        let mut fd = eval(d, &mut samples)?;
        while b - a > tol {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv * (b - a);
                fc = eval(c, &mut samples)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv * (b - a);
                fd = eval(d, &mut samples)?;
            }
            widths.push(b - a);
        }
    }
    Ok(GoldenResult {
        x: 0.5 * (a + b),
        lo: a,
        hi: b,
        widths,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneTarget {
    R0,
    Omega,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpoConfig {
    /// N_lps
    pub loops: usize,
    /// Bracket tolerance on log10(r0).
    pub tol_r0: f64,
    pub tol_omega: f64,
    /// log10 of the r0 search box, watts.
    pub r0_box_log10: (f64, f64),
    pub omega_box: (f64, f64),
    /// N_r
    pub realizations: usize,
}

impl Default for IpoConfig {
    fn default() -> Self {
        IpoConfig {
            loops: 2,
            tol_r0: 0.1,
            tol_omega: 0.05,
            r0_box_log10: (-13.0, -1.0),
            omega_box: (1e-3, OMEGA_MAX),
            realizations: 30,
        }
    }
}

impl IpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loops == 0 || self.realizations == 0 {
            return Err(Error::InvalidParams("loops and realizations must be >= 1".into()));
        }
        if !(self.tol_r0 > 0.0 && self.tol_omega > 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        for (lo, hi) in [self.r0_box_log10, self.omega_box] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParams(format!("bad search box [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Bracket for loop `n` (1-based): the whole box first, then an interval
/// centred on the previous value that shrinks by φ per loop.
pub fn loop_bracket(n: usize, previous: f64, box_lo: f64, box_hi: f64) -> (f64, f64) {
    if n <= 1 {
        return (box_lo, box_hi);
    }
    let d = (previous - box_lo).abs().min((previous - box_hi).abs());
    let width = d / (0.5 * GOLDEN_RATIO.powi(n as i32 - 2));
    (
        (previous - width / 2.0).max(box_lo),
        (previous + width / 2.0).min(box_hi),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub mean: f64,
    pub std: f64,
}

impl EvalStats {
    pub fn of(values: &[f64]) -> EvalStats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        EvalStats { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpoStep {
    pub loop_index: usize,
    pub target: TuneTarget,
    pub r0: f64,
    pub omega: f64,
    pub mean_j1: f64,
    pub std_j1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpoOutcome {
    pub r0: f64,
    pub omega: f64,
    /// Tuned (r0, ω) after each loop.
    pub per_loop: Vec<(f64, f64)>,
    pub steps: Vec<IpoStep>,
}

/// Tunes one parameter with the other held fixed. r0 is searched over
/// log10(r0); the returned value is in natural units.
pub fn tune_parameter<F>(
    target: TuneTarget,
    fixed: f64,
    bracket: (f64, f64),
    tol: f64,
    loop_index: usize,
    eval: &mut F,
    steps: &mut Vec<IpoStep>,
) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<EvalStats>,
{
    let res = golden_section(
        |x| {
            let (r0, omega) = match target {
                TuneTarget::R0 => (10f64.powf(x), fixed),
                TuneTarget::Omega => (fixed, x),
            };
            let s = eval(r0, omega)?;
            if !s.mean.is_finite() {
                return Err(Error::NonFiniteObjective(x));
            }
            steps.push(IpoStep {
                loop_index,
                target,
                r0,
                omega,
                mean_j1: s.mean,
                std_j1: s.std,
            });
            Ok(s.mean)
        },
        bracket.0,
        bracket.1,
        tol,
    )?;
    Ok(match target {
        TuneTarget::R0 => 10f64.powf(res.x),
        TuneTarget::Omega => res.x,
    })
}

/// Alternates r0 and ω tuning for `cfg.loops` loops. `eval(r0, ω)`
/// returns the statistics of the final J₁ over the realizations.
pub fn run_ipo<F>(cfg: &IpoConfig, r0_start: f64, omega_start: f64, mut eval: F) -> Result<IpoOutcome>
where
    F: FnMut(f64, f64) -> Result<EvalStats>,
{
    cfg.validate()?;
    let mut r0 = r0_start;
    let mut omega = omega_start;
    let mut steps = Vec::new();
    let mut per_loop = Vec::with_capacity(cfg.loops);
    for n in 1..=cfg.loops {
        let (lo, hi) = cfg.r0_box_log10;
        let bracket = loop_bracket(n, r0.log10().clamp(lo, hi), lo, hi);
        r0 = tune_parameter(TuneTarget::R0, omega, bracket, cfg.tol_r0, n, &mut eval, &mut steps)?;
        let (lo, hi) = cfg.omega_box;
        let bracket = loop_bracket(n, omega.clamp(lo, hi), lo, hi);
        omega = tune_parameter(TuneTarget::Omega, r0, bracket, cfg.tol_omega, n, &mut eval, &mut steps)?;
        per_loop.push((r0, omega));
    }
    Ok(IpoOutcome {
        r0,
        omega,
        per_loop,
        steps,
    })
}

/// Final ground-truth J₁ over seeded runs of the search.
pub fn final_j1_stats(model: &QotModel, params: &HurricaneParams, p0: &PowerVector, seeds: &[u64]) -> Result<EvalStats> {
    if seeds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let values = seeds
        .par_iter()
        .map(|&s| optimize(model, &params.with_seed(s), p0).map(|run| model.j1(run.eye())))
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvalStats::of(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub ps: f64,
}

/// Long-form success-probability surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub x_name: String,
    pub y_name: String,
    pub realizations: usize,
    pub points: Vec<SurfacePoint>,
}

impl Surface {
    pub fn get(&self, x: f64, y: f64) -> Option<f64> {
        self.points.iter().find(|p| p.x == x && p.y == y).map(|p| p.ps)
    }

    pub fn success_set(&self) -> Vec<SurfacePoint> {
        self.points.iter().copied().filter(|p| p.ps >= SUCCESS_THRESHOLD).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},{},ps", self.x_name, self.y_name)?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.x, p.y, p.ps)?;
        }
        Ok(())
    }
}

/// Success flags of one run at each checkpoint iteration.
fn run_checkpoints(
    model: &QotModel,
    params: &HurricaneParams,
    p0: &PowerVector,
    checkpoints: &[usize],
) -> Result<Vec<bool>> {
    let pp = model.params();
    let run = optimize(model, params, p0)?;
    Ok(checkpoints
        .iter()
        .map(|&n| n > 0 && within_band(&model.residual_margin(&run.trace[n]), pp.lambda1, pp.lambda2))
        .collect())
}

fn tally(flags: &[Vec<bool>], cells: usize) -> Vec<f64> {
    (0..cells)
        .map(|c| flags.iter().filter(|f| f[c]).count() as f64 / flags.len() as f64)
        .collect()
}

/// Ps₁ over r0 × iteration n at fixed ω.
pub fn cpos_ps1(
    model: &QotModel,
    base: &HurricaneParams,
    p0: &PowerVector,
    r0_grid: &[f64],
    checkpoints: &[usize],
    seeds: &[u64],
) -> Result<Surface> {
    if r0_grid.is_empty() || checkpoints.is_empty() || seeds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let horizon = checkpoints.iter().copied().max().unwrap_or(0).max(1);
    let mut points = Vec::new();
    for &r0 in r0_grid {
        let params = HurricaneParams {
            r0,
            iterations: horizon,
            ..*base
        };
        let flags = seeds
            .par_iter()
            .map(|&s| run_checkpoints(model, &params.with_seed(s), p0, checkpoints))
            .collect::<Result<Vec<_>>>()?;
        for (&n, ps) in checkpoints.iter().zip(tally(&flags, checkpoints.len())) {
            points.push(SurfacePoint { x: r0, y: n as f64, ps });
        }
    }
    Ok(Surface {
        x_name: "r0".into(),
        y_name: "n".into(),
        realizations: seeds.len(),
        points,
    })
}

/// Ps₂ over K × N_f at fixed r0 and ω.
pub fn cpos_ps2(
    model: &QotModel,
    base: &HurricaneParams,
    p0: &PowerVector,
    k_grid: &[usize],
    nf_grid: &[usize],
    seeds: &[u64],
) -> Result<Surface> {
    if k_grid.is_empty() || nf_grid.is_empty() || seeds.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let horizon = nf_grid.iter().copied().max().unwrap_or(0).max(1);
    let mut points = Vec::new();
    for &k in k_grid {
        let ps = if k == 0 {
            vec![0.0; nf_grid.len()]
        } else {
            let params = HurricaneParams {
                parcels: k,
                iterations: horizon,
                ..*base
            };
            let flags = seeds
                .par_iter()
                .map(|&s| run_checkpoints(model, &params.with_seed(s), p0, nf_grid))
                .collect::<Result<Vec<_>>>()?;
            tally(&flags, nf_grid.len())
        };
        for (&nf, ps) in nf_grid.iter().zip(ps) {
            points.push(SurfacePoint {
                x: k as f64,
                y: nf as f64,
                ps,
            });
        }
    }
    Ok(Surface {
        x_name: "k".into(),
        y_name: "nf".into(),
        realizations: seeds.len(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub k: usize,
    pub nf: usize,
    pub ps: f64,
    pub flops: f64,
}

/// Pareto-minimal (K, N_f) pairs of the success set, by increasing N_f
/// (hence decreasing K).
pub fn pareto_frontier<C: Fn(usize, usize) -> f64>(success: &[SurfacePoint], cost: C) -> Vec<ParetoPoint> {
    let mut cells: Vec<(usize, usize, f64)> = success
        .iter()
        .map(|p| (p.x as usize, p.y as usize, p.ps))
        .collect();
    cells.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut frontier: Vec<ParetoPoint> = Vec::new();
    let mut best_k = usize::MAX;
    for (k, nf, ps) in cells {
        if k < best_k {
            // Equal N_f with a smaller K was seen first; skip dominated ones.
            if let Some(last) = frontier.last() {
                if last.nf == nf {
                    continue;
                }
            }
            best_k = k;
            frontier.push(ParetoPoint {
                k,
                nf,
                ps,
                flops: cost(k, nf),
            });
        }
    }
    frontier
}

/// Frontier point with the lowest cost.
pub fn select_tradeoff(frontier: &[ParetoPoint]) -> Option<ParetoPoint> {
    frontier.iter().copied().min_by(|a, b| {
        a.flops
            .total_cmp(&b.flops)
            .then((a.k * a.nf).cmp(&(b.k * b.nf)))
            .then(a.k.cmp(&b.k))
    })
}
