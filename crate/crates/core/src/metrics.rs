//! Evaluation metrics and closed-form flop counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::linear_to_db;

/// Settling tolerance on |p* − p|, watts.
pub const SETTLING_TOLERANCE_W: f64 = 1e-7;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    Ok(())
}

/// ‖p̂ − p*‖² / ‖p*‖².
pub fn nmse(candidate: &[f64], reference: &[f64]) -> Result<f64> {
    same_len(candidate, reference)?;
    let den: f64 = reference.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num: f64 = candidate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(num / den)
}

/// NMSE averaged over realizations.
pub fn mean_nmse(candidates: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut acc = 0.0;
    for c in candidates {
        acc += nmse(c, reference)?;
    }
    Ok(acc / candidates.len() as f64)
}

/// 10·log10(p_i / p*_i) per channel.
pub fn power_penalty_db(p: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    same_len(p, reference)?;
    p.iter()
        .zip(reference)
        .map(|(&a, &b)| {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::NonPositivePower(a));
            }
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::NonPositivePower(b));
            }
            Ok(linear_to_db(a / b))
        })
        .collect()
}

/// True when every Ψ_i lies in [1 − Λ₁, 1 + Λ₂].
pub fn within_band(psi: &[f64], lambda1: f64, lambda2: f64) -> bool {
    psi.iter().all(|&x| x >= 1.0 - lambda1 && x <= 1.0 + lambda2)
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settling {
    /// 1-based iteration from which the channel stays within tolerance;
    /// `None` if it never does.
    pub per_channel: Vec<Option<usize>>,
}

impl Settling {
    /// Mean over channels, `None` unless every channel settled.
    pub fn mean(&self) -> Option<f64> {
        let n = self.per_channel.len();
        if n == 0 {
            return None;
        }
        let mut sum = 0usize;
        for s in &self.per_channel {
            sum += (*s)?;
        }
        Some(sum as f64 / n as f64)
    }
}

/// `trace[k]` holds the powers after iteration k + 1.
pub fn settling_iteration(trace: &[Vec<f64>], reference: &[f64], tolerance: f64) -> Result<Settling> {
    if trace.is_empty() {
        return Err(Error::InvalidParams("settling needs a nonempty trace".into()));
    }
    for row in trace {
        same_len(row, reference)?;
    }
    let per_channel = (0..reference.len())
        .map(|i| {
            let outside = trace
                .iter()
                .rposition(|row| !((row[i] - reference[i]).abs() <= tolerance));
            match outside {
                None => Some(1),
                Some(last) if last + 1 < trace.len() => Some(last + 2),
                Some(_) => None,
            }
        })
        .collect();
    Ok(Settling { per_channel })
}

/// Mean over channels of Σ_n |10·log10 Ψ_i[n]|, in dB.
pub fn rm_integral(psi_trace: &[Vec<f64>]) -> Result<f64> {
    let first = psi_trace
        .first()
        .ok_or_else(|| Error::InvalidParams("residual-margin integral needs a nonempty trace".into()))?;
    let m = first.len();
    if m == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for row in psi_trace {
        if row.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: row.len(),
            });
        }
        total += row.iter().map(|&x| linear_to_db(x).abs()).sum::<f64>();
    }
    Ok(total / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlopAlgorithm {
    Hso,
    Chso,
    Gd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopModel {
    pub algorithm: FlopAlgorithm,
    pub m: u64,
    pub k: u64,
    pub nf: u64,
    pub nf_gd: u64,
    /// Mean backtracks per GD iteration.
    pub nbt_gd: f64,
    /// Σ_i (N_i^ROADM + N_i^span).
    pub route_sum: u64,
}

impl FlopModel {
    pub fn hurricane(algorithm: FlopAlgorithm, m: u64, k: u64, nf: u64, route_sum: u64) -> Self {
        FlopModel {
            algorithm,
            m,
            k,
            nf,
            nf_gd: 0,
            nbt_gd: 0.0,
            route_sum,
        }
    }

    pub fn gd(m: u64, nf_gd: u64, nbt_gd: f64, route_sum: u64) -> Self {
        FlopModel {
            algorithm: FlopAlgorithm::Gd,
            m,
            k: 0,
            nf: 0,
            nf_gd,
            nbt_gd,
            route_sum,
        }
    }
}

/// Closed-form operation count.
pub fn flops(model: &FlopModel) -> f64 {
    let m = model.m as f64;
    let qot = 19.0 * m * m + 5.0 * m + model.route_sum as f64;
    match model.algorithm {
        FlopAlgorithm::Hso | FlopAlgorithm::Chso => {
            let nk = model.nf as f64 * model.k as f64;
            let draw = if model.algorithm == FlopAlgorithm::Hso { 9.0 } else { 3.0 };
            22.0 * nk + draw * nk + 3.0 * qot * nk
        }
        FlopAlgorithm::Gd => {
            let nf = model.nf_gd as f64;
            nf * (m * m + 4.0 * m + 3.0) + qot * (nf * (5.0 * model.nbt_gd * m + 5.0 * m + 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nmse_examples() {
        let p = vec![1e-3, 2e-3, 5e-4];
        assert_eq!(nmse(&p, &p).unwrap(), 0.0);
        let twice: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        assert!((nmse(&twice, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(nmse(&p, &[0.0; 3]), Err(Error::ZeroReference)));
        assert!(nmse(&p, &[1.0]).is_err());
        assert!((mean_nmse(&[p.clone(), twice], &p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn penalty_examples() {
        let p = vec![1e-3, 2e-3];
        assert_eq!(power_penalty_db(&p, &p).unwrap(), vec![0.0, 0.0]);
        let pp = power_penalty_db(&[2e-3, 2e-3], &p).unwrap();
        assert!((pp[0] - 3.0102999566398120).abs() < 1e-12);
        assert!(matches!(power_penalty_db(&[0.0, 1.0], &p), Err(Error::NonPositivePower(_))));
    }

    #[test]
    fn settling_examples() {
        let r = vec![1e-3, 2e-3];
        let constant = vec![r.clone(); 10];
        let s = settling_iteration(&constant, &r, SETTLING_TOLERANCE_W).unwrap();
        assert_eq!(s.per_channel, vec![Some(1), Some(1)]);
        assert_eq!(s.mean(), Some(1.0));

        let diverging: Vec<Vec<f64>> = (0..10).map(|k| vec![1e-3 * (1.0 + k as f64), 2e-3]).collect();
        let s = settling_iteration(&diverging, &r, SETTLING_TOLERANCE_W).unwrap();
        assert_eq!(s.per_channel, vec![None, Some(1)]);
        assert_eq!(s.mean(), None);

        let late: Vec<Vec<f64>> = (0..10).map(|k| if k < 4 { vec![0.0, 2e-3] } else { r.clone() }).collect();
        let s = settling_iteration(&late, &r, SETTLING_TOLERANCE_W).unwrap();
        assert_eq!(s.per_channel, vec![Some(5), Some(1)]);
        assert_eq!(s.mean(), Some(3.0));

        assert!(settling_iteration(&[], &r, 1e-7).is_err());
    }

    #[test]
    fn rm_integral_examples() {
        assert_eq!(rm_integral(&vec![vec![1.0; 4]; 7]).unwrap(), 0.0);
        let v = rm_integral(&[vec![2.0, 1.0]]).unwrap();
        assert!((v - 10.0 * 2f64.log10() / 2.0).abs() < 1e-12);
        assert!(rm_integral(&[]).is_err());
    }

    #[test]
    fn flop_examples() {
        assert_eq!(flops(&FlopModel::hurricane(FlopAlgorithm::Hso, 12, 0, 180, 100)), 0.0);
        assert_eq!(flops(&FlopModel::hurricane(FlopAlgorithm::Chso, 12, 132, 0, 100)), 0.0);
        // Hand evaluation: M = 12, Σ = 100, K = 2, N_f = 3.
        let qot = 19.0 * 144.0 + 60.0 + 100.0;
        let hso = flops(&FlopModel::hurricane(FlopAlgorithm::Hso, 12, 2, 3, 100));
        assert_eq!(hso, 22.0 * 6.0 + 9.0 * 6.0 + 3.0 * qot * 6.0);
        let gd = flops(&FlopModel::gd(12, 7, 2.5, 100));
        assert_eq!(gd, 7.0 * (144.0 + 48.0 + 3.0) + qot * (7.0 * (5.0 * 2.5 * 12.0 + 60.0 + 1.0)));
    }

    proptest! {
        #[test]
        fn chso_cheaper_by_six_nk(m in 1u64..300, k in 0u64..500, nf in 0u64..600, sum in 0u64..5000) {
            let h = flops(&FlopModel::hurricane(FlopAlgorithm::Hso, m, k, nf, sum));
            let c = flops(&FlopModel::hurricane(FlopAlgorithm::Chso, m, k, nf, sum));
            prop_assert_eq!(c + 6.0 * (nf * k) as f64, h);
        }

        #[test]
        fn permutation_invariance(
            pairs in proptest::collection::vec((1e-6f64..1e-2, 1e-6f64..1e-2), 1..16),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let pa: Vec<f64> = order.iter().map(|&i| a[i]).collect();
            let pb: Vec<f64> = order.iter().map(|&i| b[i]).collect();
            let x = nmse(&a, &b).unwrap();
            let y = nmse(&pa, &pb).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
            let mut pp = power_penalty_db(&a, &b).unwrap();
            let qq = power_penalty_db(&pa, &pb).unwrap();
            let permuted: Vec<f64> = order.iter().map(|&i| pp[i]).collect();
            pp = permuted;
            prop_assert_eq!(pp, qq);
        }
    }
}
