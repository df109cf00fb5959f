use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Begin-of-life / end-of-life values of an ageing quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct AgeingPair {
    pub bol: f64,
    pub eol: f64,
}

impl AgeingPair {
    pub const fn new(bol: f64, eol: f64) -> Self {
        AgeingPair { bol, eol }
    }
}

impl From<[f64; 2]> for AgeingPair {
    fn from(v: [f64; 2]) -> Self {
        AgeingPair { bol: v[0], eol: v[1] }
    }
}

impl From<AgeingPair> for [f64; 2] {
    fn from(p: AgeingPair) -> Self {
        [p.bol, p.eol]
    }
}

/// Affine interpolation of an ageing pair anchored at the BoL value.
pub fn interpolate_param(pair: AgeingPair, tau: f64, tau0: f64, tau_end: f64) -> Result<f64> {
    if !(tau >= tau0 && tau <= tau_end) {
        return Err(Error::TauOutOfRange { tau, tau0, tau_end });
    }
    if tau_end == tau0 {
        return Ok(pair.bol);
    }
    if tau == tau_end {
        return Ok(pair.eol);
    }
    Ok(pair.bol + (pair.eol - pair.bol) * (tau - tau0) / (tau_end - tau0))
}

/// Which span count multiplies each XCI interferer term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XciSpanMode {
    /// Spans shared by channel i and interferer j.
    #[default]
    Shared,
    /// All spans of channel i.
    Own,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub ber_target: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    /// J·s
    pub planck: f64,
    /// Hz
    pub carrier_hz: f64,
    /// |β2| in s²/km.
    pub beta2: f64,
    /// 1/(W·km)
    pub gamma: f64,
    /// Maximum amplified span length used to split links into spans.
    pub span_length_km: f64,
    pub alpha_db_per_km: AgeingPair,
    pub connector_loss_db: AgeingPair,
    pub splice_loss_db: AgeingPair,
    pub connectors_per_span: u32,
    pub splices_per_span: u32,
    pub edfa_nf_db: AgeingPair,
    pub roadm_loss_db: AgeingPair,
    pub transponder_margin_db: AgeingPair,
    pub design_margin_db: AgeingPair,
    pub tau0: f64,
    pub tau_end: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub a_pert_db: f64,
    /// Multiplier on the SCI and XCI PSDs.
    pub nli_scale: f64,
    pub xci_span_mode: XciSpanMode,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            ber_target: 4e-3,
            p_min_dbm: -100.0,
            p_max_dbm: 20.0,
            planck: 6.6261e-34,
            carrier_hz: 193.55e12,
            beta2: 2.07e-23,
            gamma: 1.3,
            span_length_km: 100.0,
            alpha_db_per_km: AgeingPair::new(0.22, 0.23),
            connector_loss_db: AgeingPair::new(0.20, 0.30),
            splice_loss_db: AgeingPair::new(0.30, 0.50),
            connectors_per_span: 2,
            splices_per_span: 2,
            edfa_nf_db: AgeingPair::new(4.5, 5.5),
            roadm_loss_db: AgeingPair::new(20.0, 23.0),
            transponder_margin_db: AgeingPair::new(1.0, 1.5),
            design_margin_db: AgeingPair::new(2.0, 1.0),
            tau0: 0.0,
            tau_end: 10.0,
            lambda1: 4e-3,
            lambda2: 1e-3,
            a_pert_db: 1.0,
            nli_scale: 1.0,
            xci_span_mode: XciSpanMode::Shared,
        }
    }
}

/// Ageing-dependent quantities resolved at one point of the lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsAt {
    pub tau: f64,
    pub alpha_db_per_km: f64,
    pub connector_loss_db: f64,
    pub splice_loss_db: f64,
    pub edfa_nf_db: f64,
    pub roadm_loss_db: f64,
    pub transponder_margin_db: f64,
    pub design_margin_db: f64,
}

impl ParamsAt {
    /// Field attenuation coefficient in 1/km.
    pub fn alpha_field(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 20.0
    }

    pub fn total_margin_db(&self) -> f64 {
        self.design_margin_db + self.transponder_margin_db
    }
}

impl PhysicalParams {
    pub fn p_min_watt(&self) -> f64 {
        crate::units::dbm_to_watt(self.p_min_dbm)
    }

    pub fn p_max_watt(&self) -> f64 {
        crate::units::dbm_to_watt(self.p_max_dbm)
    }

    pub fn at(&self, tau: f64) -> Result<ParamsAt> {
        let f = |pair| interpolate_param(pair, tau, self.tau0, self.tau_end);
        Ok(ParamsAt {
            tau,
            alpha_db_per_km: f(self.alpha_db_per_km)?,
            connector_loss_db: f(self.connector_loss_db)?,
            splice_loss_db: f(self.splice_loss_db)?,
            edfa_nf_db: f(self.edfa_nf_db)?,
            roadm_loss_db: f(self.roadm_loss_db)?,
            transponder_margin_db: f(self.transponder_margin_db)?,
            design_margin_db: f(self.design_margin_db)?,
        })
    }

    /// Checks the invariants, naming the offending field under `prefix`.
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let path = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        let positive = [
            ("ber_target", self.ber_target),
            ("planck", self.planck),
            ("carrier_hz", self.carrier_hz),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
            ("span_length_km", self.span_length_km),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(path(name), format!("must be positive, got {v}")));
            }
        }
        if !(self.ber_target < 0.5) {
            return Err(Error::invalid(path("ber_target"), "must be below 0.5"));
        }
        if !(self.p_min_dbm.is_finite() && self.p_max_dbm.is_finite() && self.p_min_dbm < self.p_max_dbm) {
            return Err(Error::invalid(
                path("p_min_dbm"),
                format!("p_min ({}) must be below p_max ({})", self.p_min_dbm, self.p_max_dbm),
            ));
        }
        if !(self.tau0.is_finite() && self.tau_end.is_finite() && self.tau0 <= self.tau_end) {
            return Err(Error::invalid(path("tau_end"), "lifetime must satisfy tau0 <= tau_end"));
        }
        if !(self.nli_scale.is_finite() && self.nli_scale >= 0.0) {
            return Err(Error::invalid(path("nli_scale"), "must be finite and >= 0"));
        }
        if !(self.a_pert_db.is_finite() && self.a_pert_db >= 0.0) {
            return Err(Error::invalid(path("a_pert_db"), "must be finite and >= 0"));
        }
        // Losses and noise only degrade with age; margins may move either way.
        let degrading = [
            ("alpha_db_per_km", self.alpha_db_per_km),
            ("connector_loss_db", self.connector_loss_db),
            ("splice_loss_db", self.splice_loss_db),
            ("edfa_nf_db", self.edfa_nf_db),
            ("roadm_loss_db", self.roadm_loss_db),
        ];
        for (name, pair) in degrading {
            if !(pair.bol.is_finite() && pair.eol.is_finite() && pair.bol >= 0.0 && pair.eol >= pair.bol) {
                return Err(Error::invalid(
                    path(name),
                    format!("expected 0 <= BoL <= EoL, got [{}, {}]", pair.bol, pair.eol),
                ));
            }
        }
        if !(self.alpha_db_per_km.bol > 0.0) {
            return Err(Error::invalid(path("alpha_db_per_km"), "attenuation must be positive"));
        }
        for (name, pair) in [
            ("transponder_margin_db", self.transponder_margin_db),
            ("design_margin_db", self.design_margin_db),
        ] {
            if !(pair.bol.is_finite() && pair.eol.is_finite() && pair.bol >= 0.0 && pair.eol >= 0.0) {
                return Err(Error::invalid(path(name), "margins must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn transponder_margin_endpoints() {
        let mt = AgeingPair::new(1.0, 1.5);
        assert_eq!(interpolate_param(mt, 10.0, 0.0, 10.0).unwrap(), 1.5);
        assert_eq!(interpolate_param(mt, 0.0, 0.0, 10.0).unwrap(), 1.0);
    }

    #[test]
    fn alpha_midpoint() {
        let a = AgeingPair::new(0.22, 0.23);
        let v = interpolate_param(a, 5.0, 0.0, 10.0).unwrap();
        assert!((v - 0.225).abs() < 1e-15);
    }

    #[test]
    fn tau_outside_lifetime() {
        let a = AgeingPair::new(0.22, 0.23);
        assert!(matches!(
            interpolate_param(a, 10.5, 0.0, 10.0),
            Err(Error::TauOutOfRange { .. })
        ));
        assert!(interpolate_param(a, -0.1, 0.0, 10.0).is_err());
        assert!(interpolate_param(a, f64::NAN, 0.0, 10.0).is_err());
    }

    #[test]
    fn defaults_validate() {
        PhysicalParams::default().validate("physical").unwrap();
        let at = PhysicalParams::default().at(10.0).unwrap();
        assert_eq!(at.total_margin_db(), 2.5);
        let at = PhysicalParams::default().at(0.0).unwrap();
        assert_eq!(at.total_margin_db(), 3.0);
    }

    #[test]
    fn validation_names_field() {
        let mut p = PhysicalParams::default();
        p.p_min_dbm = 30.0;
        let err = p.validate("physical").unwrap_err().to_string();
        assert!(err.starts_with("physical.p_min_dbm"), "{err}");
        let mut p = PhysicalParams::default();
        p.edfa_nf_db = AgeingPair::new(5.5, 4.5);
        let err = p.validate("physical").unwrap_err().to_string();
        assert!(err.starts_with("physical.edfa_nf_db"), "{err}");
    }

    proptest! {
        #[test]
        fn interpolation_exact_and_monotone(
            bol in -10.0f64..10.0,
            delta in 0.0f64..5.0,
            t1 in 0.0f64..10.0,
            t2 in 0.0f64..10.0,
        ) {
            let pair = AgeingPair::new(bol, bol + delta);
            prop_assert_eq!(interpolate_param(pair, 0.0, 0.0, 10.0).unwrap(), pair.bol);
            prop_assert_eq!(interpolate_param(pair, 10.0, 0.0, 10.0).unwrap(), pair.eol);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = interpolate_param(pair, lo, 0.0, 10.0).unwrap();
            let b = interpolate_param(pair, hi, 0.0, 10.0).unwrap();
            prop_assert!(a <= b + 1e-12);
        }
    }
}
