//! Conversions between logarithmic and linear power units.

/// dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Watts to dBm.
pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * (watt / 1e-3).log10()
}

/// dB to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        assert_eq!(dbm_to_watt(0.0), 1e-3);
        assert!((dbm_to_watt(20.0) - 0.1).abs() < 1e-15);
        assert!((watt_to_dbm(1e-13) + 100.0).abs() < 1e-9);
        assert!((linear_to_db(2.0) - 3.010299956639812).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dbm_watt_round_trip(dbm in -120.0f64..40.0) {
            let back = watt_to_dbm(dbm_to_watt(dbm));
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
            let w = dbm_to_watt(dbm);
            let again = dbm_to_watt(watt_to_dbm(w));
            prop_assert!(((again - w) / w).abs() <= 1e-12);
        }
    }
}
