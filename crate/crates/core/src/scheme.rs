//! Named allocation schemes behind one entry point.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{ftpc_allocation, FTPC_ALPHA};
use crate::instance::{sic_order, ProblemInstance};
use crate::lddp::{Lddp, LddpParams, UpperBound};
use crate::rate::{wsr_with_weights, PowerAllocation};
use crate::sc::{solve_sc_sr, ScError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Lddp,
    NomaFtpc,
    OfdmaFtpc,
    /// Exact single-carrier sum rate; one subcarrier only.
    ScExact,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Lddp, Scheme::NomaFtpc, Scheme::OfdmaFtpc, Scheme::ScExact];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lddp => "lddp",
            Scheme::NomaFtpc => "noma-ftpc",
            Scheme::OfdmaFtpc => "ofdma-ftpc",
            Scheme::ScExact => "sc-exact",
        }
    }

    /// Whether the scheme runs on the one-user-per-subcarrier grid.
    pub fn is_orthogonal(self) -> bool {
        self == Scheme::OfdmaFtpc
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown solver `{0}` (expected lddp, noma-ftpc, ofdma-ftpc or sc-exact)")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error("sc-exact needs a single subcarrier, the instance has {0}")]
    NotSingleCarrier(usize),
    #[error("sc-exact maximizes the plain sum rate and needs unit weights")]
    Weighted,
    #[error(transparent)]
    Sc(#[from] ScError),
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub allocation: PowerAllocation,
    /// Weighted sum rate of `allocation` under the weights solved for.
    pub utility: f64,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<UpperBound>,
    pub iterations: Option<usize>,
}

/// Runs `scheme` on `inst` with `weights` in place of the instance weights.
pub fn solve_scheme(
    scheme: Scheme,
    inst: &ProblemInstance,
    weights: &[f64],
    params: &LddpParams,
) -> Result<SchemeOutcome, SchemeError> {
    let plain = |allocation: PowerAllocation| {
        let utility = wsr_with_weights(inst, &sic_order(inst), weights, &allocation);
        SchemeOutcome {
            allocation,
            utility,
            lower_bound: None,
            upper_bound: None,
            iterations: None,
        }
    };
    match scheme {
        Scheme::Lddp => {
            let report = Lddp::new(inst, params.clone()).solve_weighted(weights);
            Ok(SchemeOutcome {
                utility: report.lower_bound,
                lower_bound: Some(report.lower_bound),
                upper_bound: report.upper_bound,
                iterations: Some(report.iterations),
                allocation: report.allocation,
            })
        }
        Scheme::NomaFtpc => Ok(plain(ftpc_allocation(inst, weights, inst.max_multiplexed, FTPC_ALPHA))),
        Scheme::OfdmaFtpc => Ok(plain(ftpc_allocation(inst, weights, 1, FTPC_ALPHA))),
        Scheme::ScExact => {
            if inst.subcarriers() != 1 {
                return Err(SchemeError::NotSingleCarrier(inst.subcarriers()));
            }
            if weights.iter().any(|&w| w != 1.0) {
                return Err(SchemeError::Weighted);
            }
            let order = sic_order(inst);
            let users = order.users(0);
            let gains: Vec<f64> = users.iter().map(|&k| inst.gains[k][0]).collect();
            let caps: Vec<f64> = users.iter().map(|&k| inst.user_power[k]).collect();
            let powers = solve_sc_sr(&gains, inst.total_power, &caps, inst.max_multiplexed)?;
            let mut p = PowerAllocation::zeros(inst.users(), 1);
            for (&k, &q) in users.iter().zip(&powers) {
                p.set(k, 0, q);
            }
            Ok(plain(p))
        }
    }
}
