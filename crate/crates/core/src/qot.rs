//! Gaussian-noise model quality of transmission.
//!
//! Powers are linear watts. Signal PSD is taken flat over the channel,
//! so G_i = p_i / Δf_i.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{Lightpath, ModulationFormat, Network, ParamsAt, PhysicalParams, Span, XciSpanMode};
use crate::units::{db_to_linear, dbm_to_watt, linear_to_db, watt_to_dbm};

/// Launch powers of all channels, in watts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn from_watts(p: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = p.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositivePower(bad));
        }
        Ok(PowerVector(p))
    }

    pub fn from_dbm(p: &[f64]) -> Result<Self> {
        PowerVector::from_watts(p.iter().map(|&d| dbm_to_watt(d)).collect())
    }

    pub fn uniform_dbm(m: usize, dbm: f64) -> Result<Self> {
        PowerVector::from_dbm(&vec![dbm; m])
    }

    pub fn watts(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dbm(&self) -> Vec<f64> {
        self.0.iter().map(|&w| watt_to_dbm(w)).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A_span = L·α + c·c_loss + s·s_loss, in dB.
pub fn span_loss_db(span: &Span, at: &ParamsAt) -> f64 {
    span.length_km * at.alpha_db_per_km
        + f64::from(span.connectors) * at.connector_loss_db
        + f64::from(span.splices) * at.splice_loss_db
}

/// ASE PSD accumulated over the ROADMs and amplified spans of a lightpath.
pub fn ase_psd(lightpath: &Lightpath, params: &PhysicalParams, at: &ParamsAt) -> f64 {
    let nf = db_to_linear(at.edfa_nf_db);
    let roadms = f64::from(lightpath.route.roadm_count) * (db_to_linear(at.roadm_loss_db) - 1.0);
    let spans: f64 = lightpath
        .route
        .spans
        .iter()
        .map(|s| db_to_linear(span_loss_db(s, at)) - 1.0)
        .sum();
    params.planck * params.carrier_hz * nf * (roadms + spans)
}

/// Per-span SCI coefficient η with G_SCI = η·G³·N_s.
pub fn sci_coefficient(bandwidth_hz: f64, params: &PhysicalParams, at: &ParamsAt) -> f64 {
    let a = at.alpha_field();
    let b = params.beta2.abs();
    let g2 = params.gamma * params.gamma;
    params.nli_scale * 3.0 * g2 / (2.0 * PI * a * b) * (PI * PI * b * bandwidth_hz * bandwidth_hz / (2.0 * a)).asinh()
}

/// Per-span XCI coefficient for an interferer of bandwidth `bandwidth_j_hz`
/// whose center sits `gap_hz` away: G_XCI += χ·G_i·G_j²·N_s.
pub fn xci_coefficient(gap_hz: f64, bandwidth_j_hz: f64, params: &PhysicalParams, at: &ParamsAt) -> Result<f64> {
    let half = bandwidth_j_hz / 2.0;
    if !(gap_hz > half) {
        return Err(Error::InvalidParams(format!(
            "interferer {:.3} GHz away overlaps a {:.3} GHz channel",
            gap_hz / 1e9,
            bandwidth_j_hz / 1e9
        )));
    }
    let a = at.alpha_field();
    let b = params.beta2.abs();
    let g2 = params.gamma * params.gamma;
    Ok(params.nli_scale * (6.0 * g2 / (a * a)) * (a / (4.0 * PI * b)) * ((gap_hz + half) / (gap_hz - half)).ln())
}

pub fn sci_psd(lightpath: &Lightpath, power_w: f64, params: &PhysicalParams, at: &ParamsAt) -> Result<f64> {
    let bw = lightpath.bandwidth_hz;
    if bw == 0.0 {
        return Err(Error::ZeroBandwidth(0));
    }
    let g = power_w / bw;
    Ok(sci_coefficient(bw, params, at) * g * g * g * f64::from(lightpath.route.span_count()))
}

pub fn xci_psd(network: &Network, i: usize, powers: &[f64], params: &PhysicalParams, at: &ParamsAt) -> Result<f64> {
    let m = network.len();
    let lp_i = network.lightpath(i)?;
    if powers.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: powers.len(),
        });
    }
    let g_i = powers[i] / lp_i.bandwidth_hz;
    let mut sum = 0.0;
    for (j, lp_j) in network.lightpaths().iter().enumerate() {
        if j == i {
            continue;
        }
        let spans = match params.xci_span_mode {
            XciSpanMode::Shared => network.shared_spans(i, j)?,
            XciSpanMode::Own => lp_i.route.span_count(),
        };
        let gap = (lp_i.center_frequency_hz - lp_j.center_frequency_hz).abs();
        if gap == 0.0 {
            return Err(Error::GridViolation { i, j });
        }
        if spans == 0 {
            continue;
        }
        let g_j = powers[j] / lp_j.bandwidth_hz;
        sum += xci_coefficient(gap, lp_j.bandwidth_hz, params, at)? * g_j * g_j * f64::from(spans);
    }
    Ok(g_i * sum)
}

/// Ψ* − Ψ distance.
pub fn j1_from_psi(psi: &[f64]) -> f64 {
    psi.iter().map(|&x| (1.0 - x) * (1.0 - x)).sum::<f64>().sqrt()
}

/// Uncalibrated AWGN bit-error rate for a PM format.
fn ber_awgn(modulation: ModulationFormat, snr: f64) -> f64 {
    use libm::erfc;
    match modulation {
        ModulationFormat::PmBpsk => 0.5 * erfc(snr.sqrt()),
        ModulationFormat::PmQpsk => 0.5 * erfc((snr / 2.0).sqrt()),
        _ => {
            let m = f64::from(modulation.constellation_size());
            (2.0 / m.log2()) * (1.0 - 1.0 / m.sqrt()) * erfc((3.0 * snr / (2.0 * (m - 1.0))).sqrt())
        }
    }
}

/// Scale on SNR that puts the AWGN curve through (SNR*, BER*).
fn ber_calibration(modulation: ModulationFormat, ber_target: f64) -> f64 {
    let anchor = db_to_linear(modulation.snr_b2b_target_db());
    let (mut lo, mut hi) = (-6.0f64, 6.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber_awgn(modulation, anchor * mid.exp()) > ber_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Calibrated BER of a lightpath at a back-to-back SNR (linear).
pub fn ber(modulation: ModulationFormat, snr_b2b: f64, ber_target: f64) -> f64 {
    if !(snr_b2b > 0.0) {
        return 0.5;
    }
    ber_awgn(modulation, snr_b2b * ber_calibration(modulation, ber_target)).min(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChannelVerdict {
    /// Ψ_i ≥ 1 − Λ₁.
    pub snr_ok: bool,
    /// Rate and format are fixed inputs.
    pub rate_ok: bool,
    pub power_ok: bool,
}

impl ChannelVerdict {
    pub fn feasible(&self) -> bool {
        self.snr_ok && self.rate_ok && self.power_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub channels: Vec<ChannelVerdict>,
}

impl Feasibility {
    pub fn all_feasible(&self) -> bool {
        self.channels.iter().all(ChannelVerdict::feasible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelQot {
    pub id: String,
    pub modulation: ModulationFormat,
    pub power_dbm: f64,
    pub g_ase: f64,
    pub g_sci: f64,
    pub g_xci: f64,
    pub snr: f64,
    pub snr_b2b: f64,
    pub psi: f64,
    pub ber: f64,
    pub verdict: ChannelVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QotBreakdown {
    pub tau: f64,
    pub channels: Vec<ChannelQot>,
}

impl QotBreakdown {
    pub const CSV_HEADER: &'static str =
        "channel,modulation,power_dbm,g_ase_w_hz,g_sci_w_hz,g_xci_w_hz,snr_db,snr_b2b_db,psi,ber,c1_snr,c2_rate,c3_power";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for c in &self.channels {
            writeln!(
                w,
                "{},{},{:.6},{:.6e},{:.6e},{:.6e},{:.6},{:.6},{:.9},{:.6e},{},{},{}",
                c.id,
                c.modulation,
                c.power_dbm,
                c.g_ase,
                c.g_sci,
                c.g_xci,
                linear_to_db(c.snr),
                linear_to_db(c.snr_b2b),
                c.psi,
                c.ber,
                c.verdict.snr_ok,
                c.verdict.rate_ok,
                c.verdict.power_ok
            )?;
        }
        Ok(())
    }
}

/// QoT evaluator for one network at one point of its lifetime, with the
/// power-independent factors of every PSD precomputed.
#[derive(Debug, Clone)]
pub struct QotModel {
    network: Network,
    params: PhysicalParams,
    at: ParamsAt,
    bandwidth: Vec<f64>,
    ase: Vec<f64>,
    sci: Vec<f64>,
    xci: Vec<f64>,
    target: Vec<f64>,
    margin: f64,
}

impl QotModel {
    pub fn new(network: &Network, params: &PhysicalParams, tau: f64) -> Result<QotModel> {
        let at = params.at(tau)?;
        let m = network.len();
        let mut bandwidth = Vec::with_capacity(m);
        let mut ase = Vec::with_capacity(m);
        let mut sci = Vec::with_capacity(m);
        let mut target = Vec::with_capacity(m);
        for (i, lp) in network.lightpaths().iter().enumerate() {
            if !(lp.bandwidth_hz > 0.0) {
                return Err(Error::ZeroBandwidth(i));
            }
            bandwidth.push(lp.bandwidth_hz);
            ase.push(ase_psd(lp, params, &at));
            sci.push(sci_coefficient(lp.bandwidth_hz, params, &at) * f64::from(lp.route.span_count()));
            target.push(db_to_linear(lp.modulation.snr_b2b_target_db()));
        }
        let mut xci = vec![0.0; m * m];
        for i in 0..m {
            let lp_i = &network.lightpaths()[i];
            for j in 0..m {
                if i == j {
                    continue;
                }
                let lp_j = &network.lightpaths()[j];
                let gap = (lp_i.center_frequency_hz - lp_j.center_frequency_hz).abs();
                if gap == 0.0 {
                    return Err(Error::GridViolation { i, j });
                }
                let spans = match params.xci_span_mode {
                    XciSpanMode::Shared => network.shared_spans(i, j)?,
                    XciSpanMode::Own => lp_i.route.span_count(),
                };
                if spans > 0 {
                    xci[i * m + j] = xci_coefficient(gap, lp_j.bandwidth_hz, params, &at)? * f64::from(spans);
                }
            }
        }
        Ok(QotModel {
            network: network.clone(),
            params: params.clone(),
            at,
            bandwidth,
            ase,
            sci,
            xci,
            target,
            margin: db_to_linear(-at.total_margin_db()),
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn at(&self) -> &ParamsAt {
        &self.at
    }

    pub fn tau(&self) -> f64 {
        self.at.tau
    }

    pub fn len(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bandwidth.is_empty()
    }

    /// Linear SNR targets per channel.
    pub fn targets(&self) -> &[f64] {
        &self.target
    }

    /// (ASE, SCI, XCI) PSDs of channel i.
    pub fn noise_psd(&self, i: usize, p: &[f64]) -> (f64, f64, f64) {
        let m = self.len();
        let g_i = p[i] / self.bandwidth[i];
        let row = &self.xci[i * m..(i + 1) * m];
        let mut cross = 0.0;
        for j in 0..m {
            let g_j = p[j] / self.bandwidth[j];
            cross += row[j] * g_j * g_j;
        }
        (self.ase[i], self.sci[i] * g_i * g_i * g_i, g_i * cross)
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: p.len(),
            });
        }
        Ok(())
    }

    pub fn snr(&self, i: usize, p: &[f64]) -> Result<f64> {
        self.check_dim(p)?;
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.len() });
        }
        let (a, s, x) = self.noise_psd(i, p);
        let total = a + s + x;
        if total == 0.0 {
            return Err(Error::ZeroNoise(i));
        }
        Ok(p[i] / (total * self.bandwidth[i]))
    }

    pub fn snr_b2b(&self, i: usize, p: &[f64]) -> Result<f64> {
        Ok(self.snr(i, p)? * self.margin)
    }

    /// SNR of every channel, without error checks.
    pub fn snr_all(&self, p: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (a, s, x) = self.noise_psd(i, p);
                p[i] / ((a + s + x) * self.bandwidth[i])
            })
            .collect()
    }

    /// Ψ from (possibly observed) line SNRs.
    pub fn psi_from_snr(&self, snr: &[f64]) -> Vec<f64> {
        snr.iter()
            .zip(&self.target)
            .map(|(&s, &t)| s * self.margin / t)
            .collect()
    }

    pub fn residual_margin(&self, p: &[f64]) -> Vec<f64> {
        self.psi_from_snr(&self.snr_all(p))
    }

    /// J₁ = ‖1 − Ψ‖₂.
    pub fn j1(&self, p: &[f64]) -> f64 {
        let m = self.len();
        let mut acc = 0.0;
        for i in 0..m {
            let (a, s, x) = self.noise_psd(i, p);
            let psi = p[i] / ((a + s + x) * self.bandwidth[i]) * self.margin / self.target[i];
            acc += (1.0 - psi) * (1.0 - psi);
        }
        acc.sqrt()
    }

    pub fn j1_dbm(&self, p_dbm: &[f64]) -> f64 {
        let w: Vec<f64> = p_dbm.iter().map(|&d| dbm_to_watt(d)).collect();
        self.j1(&w)
    }

    pub fn check_constraints(&self, p: &[f64]) -> Result<Feasibility> {
        self.check_dim(p)?;
        let lo = self.params.p_min_watt();
        let hi = self.params.p_max_watt();
        let psi = self.residual_margin(p);
        Ok(Feasibility {
            channels: psi
                .iter()
                .zip(p)
                .map(|(&s, &w)| ChannelVerdict {
                    snr_ok: s >= 1.0 - self.params.lambda1,
                    rate_ok: true,
                    power_ok: w >= lo && w <= hi,
                })
                .collect(),
        })
    }

    pub fn breakdown(&self, p: &[f64]) -> Result<QotBreakdown> {
        self.check_dim(p)?;
        let verdicts = self.check_constraints(p)?;
        let mut channels = Vec::with_capacity(self.len());
        for (i, lp) in self.network.lightpaths().iter().enumerate() {
            let (g_ase, g_sci, g_xci) = self.noise_psd(i, p);
            let snr = self.snr(i, p)?;
            let snr_b2b = snr * self.margin;
            channels.push(ChannelQot {
                id: lp.id().to_string(),
                modulation: lp.modulation,
                power_dbm: watt_to_dbm(p[i]),
                g_ase,
                g_sci,
                g_xci,
                snr,
                snr_b2b,
                psi: snr_b2b / self.target[i],
                ber: ber(lp.modulation, snr_b2b, self.params.ber_target),
                verdict: verdicts.channels[i],
            });
        }
        Ok(QotBreakdown {
            tau: self.at.tau,
            channels,
        })
    }
}
