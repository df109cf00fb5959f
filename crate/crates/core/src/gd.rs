//! Projected gradient descent on J₁ over dBm powers, with central
//! finite-difference gradients and backtracking line search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qot::{PowerVector, QotModel};
use crate::units::{dbm_to_watt, watt_to_dbm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdParams {
    pub max_iterations: usize,
    /// Armijo coefficient c.
    pub sufficient_decrease: f64,
    /// Step shrink factor per backtrack.
    pub shrink: f64,
    pub gradient_tolerance: f64,
    /// Finite-difference step, dB.
    pub fd_step_db: f64,
    /// First trial step of every line search, dB.
    pub initial_step_db: f64,
    pub max_backtracks: usize,
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams {
            max_iterations: 5000,
            sufficient_decrease: 1e-4,
            shrink: 0.5,
            gradient_tolerance: 1e-9,
            fd_step_db: 1e-5,
            initial_step_db: 1.0,
            max_backtracks: 60,
        }
    }
}

impl GdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParams(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease <= 0.5) {
            return Err(Error::InvalidParams(format!(
                "sufficient decrease must lie in (0, 0.5], got {}",
                self.sufficient_decrease
            )));
        }
        if !(self.fd_step_db > 0.0 && self.initial_step_db > 0.0 && self.gradient_tolerance >= 0.0) {
            return Err(Error::InvalidParams("steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GdStatus {
    GradientTolerance,
    /// No step size passed the line search.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GdRun {
    /// Iterate after each accepted step; entry 0 is the start.
    pub trace_dbm: Vec<Vec<f64>>,
    pub j1_trace: Vec<f64>,
    /// Backtracks spent in each line search, including the failing one.
    pub backtracks: Vec<usize>,
    pub status: GdStatus,
    pub evaluations: u64,
}

impl GdRun {
    pub fn final_dbm(&self) -> &[f64] {
        self.trace_dbm.last().expect("trace holds the start point")
    }

    pub fn final_watts(&self) -> Vec<f64> {
        self.final_dbm().iter().map(|&d| dbm_to_watt(d)).collect()
    }

    pub fn final_j1(&self) -> f64 {
        *self.j1_trace.last().expect("trace holds the start point")
    }

    pub fn accepted_steps(&self) -> usize {
        self.trace_dbm.len() - 1
    }

    /// Line searches performed (N_f^GD).
    pub fn iterations(&self) -> usize {
        self.backtracks.len()
    }

    /// Mean backtracks per line search (N_bt^GD).
    pub fn mean_backtracks(&self) -> f64 {
        if self.backtracks.is_empty() {
            0.0
        } else {
            self.backtracks.iter().sum::<usize>() as f64 / self.backtracks.len() as f64
        }
    }
}

/// Finite-difference gradient of `f` at `x`: central where both probes
/// stay in [lo, hi], one-sided at the box edges.
pub fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut fx: Option<f64> = None;
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        let up = xi + h <= hi;
        let down = xi - h >= lo;
        let gi = if up && down {
            probe[i] = xi + h;
            let a = f(&probe);
            probe[i] = xi - h;
            let b = f(&probe);
            (a - b) / (2.0 * h)
        } else {
            let f0 = *fx.get_or_insert_with(|| f(x));
            if up {
                probe[i] = xi + h;
                (f(&probe) - f0) / h
            } else {
                probe[i] = xi - h;
                (f0 - f(&probe)) / h
            }
        };
        probe[i] = xi;
        g.push(gi);
    }
    g
}

/// ∇J₁ with respect to dBm powers.
pub fn gradient_j1(model: &QotModel, p_dbm: &[f64], params: &GdParams) -> Vec<f64> {
    let pp = model.params();
    let mut f = |x: &[f64]| model.j1_dbm(x);
    gradient(&mut f, p_dbm, params.fd_step_db, pp.p_min_dbm, pp.p_max_dbm)
}

/// Minimizes `f` over the box [lo, hi]^M starting from `x0`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], lo: f64, hi: f64, params: &GdParams) -> Result<GdRun> {
    params.validate()?;
    if let Some(&bad) = x0.iter().find(|v| !(**v >= lo && **v <= hi)) {
        return Err(Error::InfeasibleStart(format!("{bad} outside [{lo}, {hi}]")));
    }
    let mut evaluations = 0u64;
    let mut eval = |x: &[f64], n: &mut u64| {
        *n += 1;
        f(x)
    };
    let mut x = x0.to_vec();
    let mut fx = eval(&x, &mut evaluations);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective(fx));
    }
    let mut run = GdRun {
        trace_dbm: vec![x.clone()],
        j1_trace: vec![fx],
        backtracks: Vec::new(),
        status: GdStatus::MaxIterations,
        evaluations: 0,
    };
    let mut cand = vec![0.0; x.len()];
    for _ in 0..params.max_iterations {
        let g = {
            let mut probe = |p: &[f64]| eval(p, &mut evaluations);
            gradient(&mut probe, &x, params.fd_step_db, lo, hi)
        };
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= params.gradient_tolerance {
            run.status = GdStatus::GradientTolerance;
            break;
        }
        let mut t = params.initial_step_db;
        let mut tries = 0;
        let mut accepted = false;
        while tries <= params.max_backtracks {
            for k in 0..x.len() {
                cand[k] = (x[k] - t * g[k] / norm).clamp(lo, hi);
            }
            let fc = eval(&cand, &mut evaluations);
            let slope: f64 = g.iter().zip(&cand).zip(&x).map(|((gk, c), xk)| gk * (c - xk)).sum();
            if fc < fx && fc <= fx + params.sufficient_decrease * slope {
                accepted = true;
                x.copy_from_slice(&cand);
                fx = fc;
                break;
            }
            t *= params.shrink;
            tries += 1;
        }
        run.backtracks.push(tries.min(params.max_backtracks));
        if !accepted {
            run.status = GdStatus::Stalled;
            break;
        }
        run.trace_dbm.push(x.clone());
        run.j1_trace.push(fx);
    }
    run.evaluations = evaluations;
    Ok(run)
}

pub fn optimize_gd(model: &QotModel, params: &GdParams, p0: &PowerVector) -> Result<GdRun> {
    if p0.len() != model.len() {
        return Err(Error::DimensionMismatch {
            expected: model.len(),
            got: p0.len(),
        });
    }
    let pp = model.params();
    minimize(|x| model.j1_dbm(x), &p0.to_dbm(), pp.p_min_dbm, pp.p_max_dbm, params)
}

/// Reference optimum p*: gradient descent from 0 dBm on every channel.
pub fn reference_optimum(model: &QotModel) -> Result<Vec<f64>> {
    let p0 = PowerVector::uniform_dbm(model.len(), 0.0)?;
    let run = optimize_gd(model, &GdParams::default(), &p0)?;
    Ok(run.final_dbm().iter().map(|&d| dbm_to_watt(d)).collect())
}

/// dBm view of a watt vector.
pub fn to_dbm(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&w| watt_to_dbm(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::table3;
    use proptest::prelude::*;

    fn model() -> QotModel {
        let cfg = table3().unwrap();
        QotModel::new(&cfg.network, &cfg.physical, 0.0).unwrap()
    }

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 4.0 * (x[1] + 2.0).powi(2);
        let run = minimize(f, &[5.0, 5.0], -10.0, 10.0, &GdParams::default()).unwrap();
        let x = run.final_dbm();
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 2.0).abs() < 1e-4, "{x:?}");
        assert!(run.j1_trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn projection_onto_box() {
        let f = |x: &[f64]| -x[0];
        let run = minimize(f, &[0.0], -1.0, 2.0, &GdParams::default()).unwrap();
        assert_eq!(run.final_dbm(), &[2.0]);
    }

    #[test]
    fn one_sided_at_edges() {
        let mut f = |x: &[f64]| 3.0 * x[0] + x[1] * x[1];
        let g = gradient(&mut f, &[1.0, 0.5], 1e-4, 0.0, 1.0);
        assert!((g[0] - 3.0).abs() < 1e-9);
        assert!((g[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_params() {
        let p = GdParams { shrink: 1.0, ..GdParams::default() };
        assert!(minimize(|x| x[0], &[0.0], -1.0, 1.0, &p).is_err());
        let p = GdParams { sufficient_decrease: 0.7, ..GdParams::default() };
        assert!(minimize(|x| x[0], &[0.0], -1.0, 1.0, &p).is_err());
    }

    #[test]
    fn reference_run_meets_targets() {
        let m = model();
        let p0 = PowerVector::uniform_dbm(12, 0.0).unwrap();
        let run = optimize_gd(&m, &GdParams::default(), &p0).unwrap();
        assert!(run.final_j1() < 1e-3, "J1 = {}", run.final_j1());
        assert!(run.j1_trace.windows(2).all(|w| w[1] < w[0]));
        let w = run.final_watts();
        assert!(m.check_constraints(&w).unwrap().all_feasible());

        // Restarting at the optimum accepts nothing.
        let again = optimize_gd(&m, &GdParams::default(), &PowerVector::from_watts(w).unwrap()).unwrap();
        assert_eq!(again.accepted_steps(), 0);
    }

    #[test]
    fn gradient_matches_independent_difference() {
        let m = model();
        let p: Vec<f64> = (0..12).map(|i| -6.0 + 0.5 * i as f64).collect();
        let g = gradient_j1(&m, &p, &GdParams::default());
        let h = 1e-4;
        for i in 0..12 {
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            let fd = (m.j1_dbm(&a) - m.j1_dbm(&b)) / (2.0 * h);
            assert!(((g[i] - fd) / fd).abs() < 1e-6, "{i}: {} vs {fd}", g[i]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn armijo_on_accepted_steps(start in proptest::collection::vec(-8.0f64..3.0, 12)) {
            let m = model();
            let params = GdParams { max_iterations: 30, ..GdParams::default() };
            let run = minimize(|x| m.j1_dbm(x), &start, -100.0, 20.0, &params).unwrap();
            for w in run.j1_trace.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }
    }
}
