use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight sampler variants: a gradient flux paired with a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "OLMC")]
    Olmc,
    #[serde(rename = "ULMC")]
    Ulmc,
    #[serde(rename = "RCD_O")]
    RcdO,
    #[serde(rename = "RCD_U")]
    RcdU,
    #[serde(rename = "SVRG_O")]
    SvrgO,
    #[serde(rename = "SVRG_U")]
    SvrgU,
    #[serde(rename = "RCAD_O")]
    RcadO,
    #[serde(rename = "RCAD_U")]
    RcadU,
}

/// Which gradient surrogate an algorithm feeds its kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FluxKind {
    Full,
    Rcd,
    Svrg,
    Rcad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Overdamped,
    Underdamped,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Olmc,
        Algorithm::Ulmc,
        Algorithm::RcdO,
        Algorithm::RcdU,
        Algorithm::SvrgO,
        Algorithm::SvrgU,
        Algorithm::RcadO,
        Algorithm::RcadU,
    ];

    /// The six coordinate-based variants run in the experiment presets.
    pub const COORDINATE: [Algorithm; 6] = [
        Algorithm::RcdO,
        Algorithm::RcdU,
        Algorithm::SvrgO,
        Algorithm::SvrgU,
        Algorithm::RcadO,
        Algorithm::RcadU,
    ];

    pub fn flux(self) -> FluxKind {
        match self {
            Algorithm::Olmc | Algorithm::Ulmc => FluxKind::Full,
            Algorithm::RcdO | Algorithm::RcdU => FluxKind::Rcd,
            Algorithm::SvrgO | Algorithm::SvrgU => FluxKind::Svrg,
            Algorithm::RcadO | Algorithm::RcadU => FluxKind::Rcad,
        }
    }

    pub fn kernel(self) -> KernelKind {
        match self {
            Algorithm::Olmc | Algorithm::RcdO | Algorithm::SvrgO | Algorithm::RcadO => {
                KernelKind::Overdamped
            }
            _ => KernelKind::Underdamped,
        }
    }

    pub fn is_underdamped(self) -> bool {
        self.kernel() == KernelKind::Underdamped
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Olmc => "OLMC",
            Algorithm::Ulmc => "ULMC",
            Algorithm::RcdO => "RCD_O",
            Algorithm::RcdU => "RCD_U",
            Algorithm::SvrgO => "SVRG_O",
            Algorithm::SvrgU => "SVRG_U",
            Algorithm::RcadO => "RCAD_O",
            Algorithm::RcadU => "RCAD_U",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown algorithm `{0}` (expected one of OLMC, ULMC, RCD_O, RCD_U, SVRG_O, SVRG_U, RCAD_O, RCAD_U)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        let alg = match norm.as_str() {
            "OLMC" | "O_LMC" => Algorithm::Olmc,
            "ULMC" | "U_LMC" => Algorithm::Ulmc,
            "RCD_O" | "RCD_O_LMC" => Algorithm::RcdO,
            "RCD_U" | "RCD_U_LMC" => Algorithm::RcdU,
            "SVRG_O" | "SVRG_O_LMC" => Algorithm::SvrgO,
            "SVRG_U" | "SVRG_U_LMC" => Algorithm::SvrgU,
            "RCAD_O" | "RCAD_O_LMC" => Algorithm::RcadO,
            "RCAD_U" | "RCAD_U_LMC" => Algorithm::RcadU,
            _ => return Err(UnknownAlgorithm(s.to_string())),
        };
        Ok(alg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.name().parse::<Algorithm>().unwrap(), alg);
        }
        assert_eq!("rcd-u-lmc".parse::<Algorithm>().unwrap(), Algorithm::RcdU);
        assert!("HMC".parse::<Algorithm>().is_err());
    }
}
