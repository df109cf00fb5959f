use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Polarization-multiplexed modulation formats with their spectral
/// efficiency (bits/s/Hz) and the back-to-back SNR required for the
/// pre-FEC BER target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationFormat {
    #[serde(rename = "PM-BPSK")]
    PmBpsk,
    #[serde(rename = "PM-QPSK")]
    PmQpsk,
    #[serde(rename = "PM-8QAM")]
    Pm8Qam,
    #[serde(rename = "PM-16QAM")]
    Pm16Qam,
    #[serde(rename = "PM-32QAM")]
    Pm32Qam,
    #[serde(rename = "PM-64QAM")]
    Pm64Qam,
}

impl ModulationFormat {
    pub const ALL: [ModulationFormat; 6] = [
        ModulationFormat::PmBpsk,
        ModulationFormat::PmQpsk,
        ModulationFormat::Pm8Qam,
        ModulationFormat::Pm16Qam,
        ModulationFormat::Pm32Qam,
        ModulationFormat::Pm64Qam,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulationFormat::PmBpsk => "PM-BPSK",
            ModulationFormat::PmQpsk => "PM-QPSK",
            ModulationFormat::Pm8Qam => "PM-8QAM",
            ModulationFormat::Pm16Qam => "PM-16QAM",
            ModulationFormat::Pm32Qam => "PM-32QAM",
            ModulationFormat::Pm64Qam => "PM-64QAM",
        }
    }

    /// Constellation points per polarization.
    pub fn constellation_size(self) -> u32 {
        match self {
            ModulationFormat::PmBpsk => 2,
            ModulationFormat::PmQpsk => 4,
            ModulationFormat::Pm8Qam => 8,
            ModulationFormat::Pm16Qam => 16,
            ModulationFormat::Pm32Qam => 32,
            ModulationFormat::Pm64Qam => 64,
        }
    }

    /// Bits/s/Hz over both polarizations.
    pub fn spectral_efficiency(self) -> f64 {
        2.0 * f64::from(self.constellation_size()).log2()
    }

    /// Required back-to-back SNR in dB.
    pub fn snr_b2b_target_db(self) -> f64 {
        match self {
            ModulationFormat::PmBpsk => 5.50,
            ModulationFormat::PmQpsk => 8.50,
            ModulationFormat::Pm8Qam => 12.50,
            ModulationFormat::Pm16Qam => 15.15,
            ModulationFormat::Pm32Qam => 18.15,
            ModulationFormat::Pm64Qam => 21.10,
        }
    }
}

impl fmt::Display for ModulationFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownFormat(pub String);

impl FromStr for ModulationFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        ModulationFormat::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| UnknownFormat(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_table() {
        let se: Vec<f64> = ModulationFormat::ALL
            .iter()
            .map(|m| m.spectral_efficiency())
            .collect();
        assert_eq!(se, vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
    }

    #[test]
    fn targets_increase_with_efficiency() {
        for w in ModulationFormat::ALL.windows(2) {
            assert!(w[1].snr_b2b_target_db() > w[0].snr_b2b_target_db());
        }
        assert_eq!(ModulationFormat::PmQpsk.snr_b2b_target_db(), 8.50);
        assert_eq!(ModulationFormat::Pm64Qam.snr_b2b_target_db(), 21.10);
    }

    #[test]
    fn parse_names() {
        for m in ModulationFormat::ALL {
            assert_eq!(m.name().parse::<ModulationFormat>().unwrap(), m);
        }
        assert_eq!("pm-16qam".parse::<ModulationFormat>().unwrap(), ModulationFormat::Pm16Qam);
        assert!("PM-7QAM".parse::<ModulationFormat>().is_err());
    }
}
