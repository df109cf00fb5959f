//! Per-run reports: an iteration trace (CSV) and a summary (JSON).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gd::GdRun;
use crate::hurricane::{HurricaneRun, Variant};
use crate::metrics::{self, FlopAlgorithm, FlopModel, SETTLING_TOLERANCE_W};
use crate::qot::QotModel;
use crate::units::{dbm_to_watt, watt_to_dbm};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Pressure as seen by the optimizer.
    pub pressure: f64,
    /// Ground-truth J₁.
    pub j1: f64,
    pub nmse: Option<f64>,
    pub powers_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub algorithm: String,
    pub seed: Option<u64>,
    pub tau: f64,
    pub channel_ids: Vec<String>,
    pub rows: Vec<TraceRow>,
    pub final_powers_w: Vec<f64>,
    pub final_psi: Vec<f64>,
    pub reference_w: Option<Vec<f64>>,
    pub pressure_evaluations: u64,
    pub flops: f64,
    pub status: String,
    pub lambda1: f64,
    pub lambda2: f64,
    pub settling: Option<metrics::Settling>,
    pub rm_integral_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub algorithm: String,
    pub seed: Option<u64>,
    pub tau: f64,
    pub iterations: usize,
    pub channels: Vec<String>,
    pub final_powers_dbm: Vec<f64>,
    pub final_j1: f64,
    pub final_nmse: Option<f64>,
    pub power_penalty_db: Option<Vec<f64>>,
    pub max_abs_power_penalty_db: Option<f64>,
    pub mean_settling_iteration: Option<f64>,
    pub rm_integral_db: f64,
    pub flops: f64,
    pub pressure_evaluations: u64,
    pub success: bool,
    pub status: String,
}

fn rows_from(model: &QotModel, trace: &[Vec<f64>], pressure: &[f64], reference: Option<&[f64]>) -> Result<Vec<TraceRow>> {
    trace
        .iter()
        .zip(pressure)
        .enumerate()
        .map(|(n, (p, &pr))| {
            Ok(TraceRow {
                iteration: n,
                pressure: pr,
                j1: model.j1(p),
                nmse: reference.map(|r| metrics::nmse(p, r)).transpose()?,
                powers_dbm: p.iter().map(|&w| watt_to_dbm(w)).collect(),
            })
        })
        .collect()
}

impl RunReport {
    pub fn from_hurricane(model: &QotModel, run: &HurricaneRun, reference: Option<&[f64]>) -> Result<RunReport> {
        let applied: Vec<Vec<f64>> = (0..run.trace.len()).map(|n| run.applied(n).to_vec()).collect();
        let rows = rows_from(model, &applied, &run.pressure_trace, reference)?;
        let final_powers_w = applied.last().cloned().unwrap_or_default();
        let algorithm = match run.params.variant {
            Variant::Chaotic => FlopAlgorithm::Chso,
            Variant::Uniform => FlopAlgorithm::Hso,
        };
        let flops = metrics::flops(&FlopModel::hurricane(
            algorithm,
            model.len() as u64,
            run.params.parcels as u64,
            run.params.iterations as u64,
            model.network().route_element_sum(),
        ));
        Self::assemble(
            model,
            match algorithm {
                FlopAlgorithm::Chso => "chso",
                _ => "hso",
            },
            Some(run.params.seed),
            rows,
            &applied,
            final_powers_w,
            reference,
            run.candidate_evaluations + run.eye_evaluations,
            flops,
            "completed".into(),
        )
    }

    pub fn from_gd(model: &QotModel, run: &GdRun, reference: Option<&[f64]>) -> Result<RunReport> {
        let watts: Vec<Vec<f64>> = run
            .trace_dbm
            .iter()
            .map(|row| row.iter().map(|&d| dbm_to_watt(d)).collect())
            .collect();
        let rows = rows_from(model, &watts, &run.j1_trace, reference)?;
        let flops = metrics::flops(&FlopModel::gd(
            model.len() as u64,
            run.iterations() as u64,
            run.mean_backtracks(),
            model.network().route_element_sum(),
        ));
        let final_powers_w = run.final_watts();
        Self::assemble(
            model,
            "gd",
            None,
            rows,
            &watts,
            final_powers_w,
            reference,
            run.evaluations,
            flops,
            format!("{:?}", run.status),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        model: &QotModel,
        algorithm: &str,
        seed: Option<u64>,
        rows: Vec<TraceRow>,
        trace: &[Vec<f64>],
        final_powers_w: Vec<f64>,
        reference: Option<&[f64]>,
        pressure_evaluations: u64,
        flops: f64,
        status: String,
    ) -> Result<RunReport> {
        let psi_trace: Vec<Vec<f64>> = trace[1.min(trace.len() - 1)..]
            .iter()
            .map(|p| model.residual_margin(p))
            .collect();
        let settling = match reference {
            Some(r) if trace.len() > 1 => Some(metrics::settling_iteration(&trace[1..], r, SETTLING_TOLERANCE_W)?),
            _ => None,
        };
        Ok(RunReport {
            algorithm: algorithm.to_string(),
            seed,
            tau: model.tau(),
            channel_ids: model.network().lightpaths().iter().map(|l| l.id().to_string()).collect(),
            final_psi: model.residual_margin(&final_powers_w),
            rows,
            final_powers_w,
            reference_w: reference.map(<[f64]>::to_vec),
            pressure_evaluations,
            flops,
            status,
            lambda1: model.params().lambda1,
            lambda2: model.params().lambda2,
            settling,
            rm_integral_db: metrics::rm_integral(&psi_trace)?,
        })
    }

    /// Every channel inside the residual-margin band at the end of the run.
    pub fn success(&self) -> bool {
        metrics::within_band(&self.final_psi, self.lambda1, self.lambda2)
    }

    pub fn final_nmse(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.nmse)
    }

    pub fn power_penalty_db(&self) -> Option<Vec<f64>> {
        let r = self.reference_w.as_ref()?;
        metrics::power_penalty_db(&self.final_powers_w, r).ok()
    }

    pub fn summary(&self) -> RunSummary {
        let pp = self.power_penalty_db();
        RunSummary {
            schema_version: SCHEMA_VERSION,
            algorithm: self.algorithm.clone(),
            seed: self.seed,
            tau: self.tau,
            iterations: self.rows.len().saturating_sub(1),
            channels: self.channel_ids.clone(),
            final_powers_dbm: self.final_powers_w.iter().map(|&w| watt_to_dbm(w)).collect(),
            final_j1: self.rows.last().map(|r| r.j1).unwrap_or(f64::NAN),
            final_nmse: self.final_nmse(),
            max_abs_power_penalty_db: pp.as_deref().map(metrics::max_abs),
            power_penalty_db: pp,
            mean_settling_iteration: self.settling.as_ref().and_then(metrics::Settling::mean),
            rm_integral_db: self.rm_integral_db,
            flops: self.flops,
            pressure_evaluations: self.pressure_evaluations,
            success: self.success(),
            status: self.status.clone(),
        }
    }

    /// `iteration,pressure,j1,nmse,<channel>_dbm...`; empty NMSE cells
    /// when no reference was given.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "iteration,pressure,j1,nmse")?;
        for id in &self.channel_ids {
            write!(w, ",{id}_dbm")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{},{},{},", r.iteration, r.pressure, r.j1)?;
            if let Some(v) = r.nmse {
                write!(w, "{v}")?;
            }
            for p in &r.powers_dbm {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_summary_json<W: Write>(&self, w: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(w, &self.summary()).map_err(std::io::Error::other)
    }
}
