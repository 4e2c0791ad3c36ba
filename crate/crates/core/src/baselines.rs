//! Fixed-grouping comparison schemes: greedy user grouping per subcarrier and
//! fractional transmit power control inside each group.

use thiserror::Error;

use crate::instance::ProblemInstance;
use crate::rate::PowerAllocation;

/// Default FTPC decay exponent.
pub const FTPC_ALPHA: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("no users to share the budget")]
    Empty,
    #[error("{caps} caps for {users} users")]
    Shape { users: usize, caps: usize },
    #[error("budget must be positive and finite, got {0}")]
    Budget(f64),
    #[error("decay exponent must be nonnegative and finite, got {0}")]
    Alpha(f64),
    #[error("user {0} has a nonpositive gain")]
    Gain(usize),
}

/// Splits `budget` in proportion to `g^-α`, then clamps users at their caps
/// and hands the excess to the others in the same proportions until nothing
/// moves. The result sums to `min(budget, Σ caps)`.
pub fn ftpc_power(gains: &[f64], budget: f64, alpha: f64, caps: &[f64]) -> Result<Vec<f64>, BaselineError> {
    if gains.is_empty() {
        return Err(BaselineError::Empty);
    }
    if caps.len() != gains.len() {
        return Err(BaselineError::Shape {
            users: gains.len(),
            caps: caps.len(),
        });
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(BaselineError::Budget(budget));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(BaselineError::Alpha(alpha));
    }
    if let Some(k) = gains.iter().position(|&g| !(g > 0.0)) {
        return Err(BaselineError::Gain(k));
    }

    let shares: Vec<f64> = gains.iter().map(|g| g.powf(-alpha)).collect();
    let mut powers = vec![0.0; gains.len()];
    let mut capped = vec![false; gains.len()];
    let mut remaining = budget;
    loop {
        let mass: f64 = (0..gains.len()).filter(|&k| !capped[k]).map(|k| shares[k]).sum();
        if mass == 0.0 || remaining <= 0.0 {
            break;
        }
        let over: Vec<usize> = (0..gains.len())
            .filter(|&k| !capped[k] && remaining * shares[k] / mass >= caps[k])
            .collect();
        let clamped_any = !over.is_empty();
        for k in over {
            capped[k] = true;
        }
        if !clamped_any {
            for k in (0..gains.len()).filter(|&k| !capped[k]) {
                powers[k] = remaining * shares[k] / mass;
            }
            break;
        }
        remaining = budget;
        for k in (0..gains.len()).filter(|&k| capped[k]) {
            powers[k] = caps[k];
            remaining -= caps[k];
        }
    }
    Ok(powers)
}

/// Greedy grouping plus FTPC with group size `group`, ranking users by
/// `w_k g_kn`.
///
/// Subcarriers are visited in index order. Each takes the `group` best users
/// that still have power left, receives `P_tot / N`, and splits it by
/// [`ftpc_power`] with the users' remaining power as caps.
pub fn ftpc_allocation(inst: &ProblemInstance, weights: &[f64], group: usize, alpha: f64) -> PowerAllocation {
    let users = inst.users();
    let subcarriers = inst.subcarriers();
    let budget = inst.total_power / subcarriers as f64;
    let mut remaining = inst.user_power.clone();
    let mut p = PowerAllocation::zeros(users, subcarriers);
    for n in 0..subcarriers {
        let mut ranked: Vec<usize> = (0..users).filter(|&k| remaining[k] > 0.0).collect();
        // stable: ties keep ascending user index
        ranked.sort_by(|&a, &b| (weights[b] * inst.gains[b][n]).total_cmp(&(weights[a] * inst.gains[a][n])));
        ranked.truncate(group.min(inst.max_multiplexed).max(1));
        if ranked.is_empty() {
            break;
        }
        let gains: Vec<f64> = ranked.iter().map(|&k| inst.gains[k][n]).collect();
        let caps: Vec<f64> = ranked.iter().map(|&k| remaining[k]).collect();
        let split = ftpc_power(&gains, budget, alpha, &caps).expect("validated instance gives valid FTPC input");
        for (&k, &q) in ranked.iter().zip(&split) {
            p.set(k, n, q);
            remaining[k] = (remaining[k] - q).max(0.0);
        }
    }
    p
}

/// NOMA-FTPC: groups of `M` users.
pub fn noma_ftpc(inst: &ProblemInstance) -> PowerAllocation {
    ftpc_allocation(inst, &inst.weights, inst.max_multiplexed, FTPC_ALPHA)
}

/// OFDMA-FTPC: one user per subcarrier. Meant for the finer subcarrier grid
/// of the same deployment.
pub fn ofdma_ftpc(inst: &ProblemInstance) -> PowerAllocation {
    ftpc_allocation(inst, &inst.weights, 1, FTPC_ALPHA)
}
