//! Exhaustive reference solvers for small instances.
//!
//! Every search refuses inputs whose space exceeds [`MAX_SEARCH_SPACE`]
//! rather than truncating.

use thiserror::Error;

use crate::instance::{sic_order, ProblemInstance, SicOrder};
use crate::rate::{sic_rate, LevelAssignment, PowerGrid, FEASIBILITY_RTOL};

pub const MAX_SEARCH_SPACE: f64 = 1e8;
pub const MAX_CONTINUOUS_USERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("search space of about {estimate:.3e} points exceeds the limit of {limit:.0e}")]
    TooLarge { estimate: f64, limit: f64 },
    #[error("continuous search supports at most {MAX_CONTINUOUS_USERS} users, got {0}")]
    TooManyUsers(usize),
    #[error("{0}")]
    Input(&'static str),
    #[error("{0} multipliers for {1} users")]
    Multipliers(usize, usize),
}

/// What the discrete search maximizes.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Weighted sum rate over assignments that also respect every per-user
    /// limit.
    Utility,
    /// Lagrangian `Σ w R - Σ λ_k (levels_k δ) + Σ λ_k P_k` over assignments
    /// that ignore per-user limits.
    Penalized(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptimum {
    pub value: f64,
    pub assignment: LevelAssignment,
}

fn check_space(inst: &ProblemInstance, levels: usize) -> Result<(), OracleError> {
    let estimate = ((levels + 1) as f64).powi((inst.users() * inst.subcarriers()) as i32);
    if estimate > MAX_SEARCH_SPACE {
        return Err(OracleError::TooLarge {
            estimate,
            limit: MAX_SEARCH_SPACE,
        });
    }
    Ok(())
}

/// Per-cell value hook: `(user, subcarrier, own level, levels already used
/// on the subcarrier, users already powered there) -> value`.
struct Search<'a, F> {
    inst: &'a ProblemInstance,
    order: &'a SicOrder,
    levels: usize,
    /// Total levels over all cells, when bounded.
    total_cap: Option<usize>,
    /// Levels per subcarrier.
    subcarrier_cap: usize,
    /// Levels per user, when bounded.
    user_caps: Option<Vec<usize>>,
    cell: F,
    current: LevelAssignment,
    best: Option<OracleOptimum>,
}

impl<F: Fn(usize, usize, usize, usize, usize) -> f64> Search<'_, F> {
    fn run(&mut self) {
        let users = vec![0; self.inst.users()];
        self.visit(0, 0, 0, 0, 0, users, 0.0);
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &mut self,
        n: usize,
        pos: usize,
        total: usize,
        on_carrier: usize,
        powered: usize,
        mut per_user: Vec<usize>,
        value: f64,
    ) {
        let (users, subcarriers) = (self.inst.users(), self.inst.subcarriers());
        if n == subcarriers {
            if self.best.as_ref().is_none_or(|b| value > b.value) {
                self.best = Some(OracleOptimum {
                    value,
                    assignment: self.current.clone(),
                });
            }
            return;
        }
        if pos == users {
            self.visit(n + 1, 0, total, 0, 0, per_user, value);
            return;
        }
        let k = self.order.users(n)[pos];
        self.visit(n, pos + 1, total, on_carrier, powered, per_user.clone(), value);
        if powered == self.inst.max_multiplexed {
            return;
        }
        for c in 1..=self.levels {
            if self.total_cap.is_some_and(|cap| total + c > cap)
                || on_carrier + c > self.subcarrier_cap
                || self.user_caps.as_ref().is_some_and(|caps| per_user[k] + c > caps[k])
            {
                break;
            }
            let v = (self.cell)(k, n, c, on_carrier, powered);
            per_user[k] += c;
            self.current.set(k, n, c);
            self.visit(n, pos + 1, total + c, on_carrier + c, powered + 1, per_user.clone(), value + v);
            self.current.set(k, n, 0);
            per_user[k] -= c;
        }
    }
}

/// Most levels user `k` may hold without exceeding `P_k`.
fn user_level_caps(inst: &ProblemInstance, grid: &PowerGrid) -> Vec<usize> {
    inst.user_power
        .iter()
        .map(|&pk| {
            (1..=grid.levels())
                .take_while(|&j| grid.power(j) <= pk * (1.0 + FEASIBILITY_RTOL))
                .last()
                .unwrap_or(0)
        })
        .collect()
}

/// Exhaustive optimum over level assignments with at most `M` users per
/// subcarrier, one level per cell and at most `J` levels in total.
pub fn brute_force_discrete(
    inst: &ProblemInstance,
    grid: &PowerGrid,
    objective: &Objective,
) -> Result<OracleOptimum, OracleError> {
    check_space(inst, grid.levels())?;
    let order = sic_order(inst);
    let (lambda, constant, user_caps) = match objective {
        Objective::Utility => (vec![0.0; inst.users()], 0.0, Some(user_level_caps(inst, grid))),
        Objective::Penalized(l) => {
            if l.len() != inst.users() {
                return Err(OracleError::Multipliers(l.len(), inst.users()));
            }
            let constant = l.iter().zip(&inst.user_power).map(|(a, b)| a * b).sum();
            (l.clone(), constant, None)
        }
    };
    let mut search = Search {
        inst,
        order: &order,
        levels: grid.levels(),
        total_cap: Some(grid.levels()),
        subcarrier_cap: grid.levels(),
        user_caps,
        cell: |k: usize, n: usize, c: usize, used: usize, _powered: usize| {
            inst.weights[k] * sic_rate(grid.power(c), grid.power(used), inst.gains[k][n], inst.noise)
                - lambda[k] * grid.power(c)
        },
        current: LevelAssignment::empty(inst.users(), inst.subcarriers()),
        best: None,
    };
    search.run();
    let mut best = search.best.expect("the empty assignment is always visited");
    best.value += constant;
    Ok(best)
}

/// Exhaustive optimum of the over-estimated subproblem at `(λ, μ)`: own
/// power `(c + 1) δ`, interferers at `(c_h - 1) δ`, charge `(λ_k + μ)(c - 1) δ`,
/// at most `M` users and `subcarrier_cap` levels per subcarrier, no total
/// coupling. Constants `Σ λ_k P_k + μ P_tot` included.
pub fn brute_force_overestimate(
    inst: &ProblemInstance,
    grid: &PowerGrid,
    weights: &[f64],
    multipliers: &[f64],
    mu: f64,
    subcarrier_cap: usize,
) -> Result<OracleOptimum, OracleError> {
    if multipliers.len() != inst.users() || weights.len() != inst.users() {
        return Err(OracleError::Multipliers(multipliers.len(), inst.users()));
    }
    check_space(inst, grid.levels())?;
    let order = sic_order(inst);
    let step = grid.step();
    let mut search = Search {
        inst,
        order: &order,
        levels: grid.levels(),
        total_cap: None,
        subcarrier_cap,
        user_caps: None,
        cell: |k: usize, n: usize, c: usize, used: usize, powered: usize| {
            let interference = (used - powered) as f64 * step;
            weights[k] * sic_rate((c + 1) as f64 * step, interference, inst.gains[k][n], inst.noise)
                - (multipliers[k] + mu) * (c - 1) as f64 * step
        },
        current: LevelAssignment::empty(inst.users(), inst.subcarriers()),
        best: None,
    };
    search.run();
    let mut best = search.best.expect("the empty assignment is always visited");
    best.value += multipliers.iter().zip(&inst.user_power).map(|(a, b)| a * b).sum::<f64>()
        + mu * inst.total_power;
    Ok(best)
}

/// Best single-carrier sum rate over a grid of `points` values per user in
/// `[0, P_k]`. The weakest user is not gridded: it takes whatever budget is
/// left, which is optimal since the sum rate increases in every power.
pub fn brute_force_continuous_sc(
    gains_desc: &[f64],
    total_power: f64,
    user_power: &[f64],
    max_multiplexed: usize,
    noise: f64,
    points: usize,
) -> Result<f64, OracleError> {
    let users = gains_desc.len();
    if users == 0 {
        return Err(OracleError::Input("no users"));
    }
    if users > MAX_CONTINUOUS_USERS {
        return Err(OracleError::TooManyUsers(users));
    }
    if user_power.len() != users {
        return Err(OracleError::Input("one power limit per user is required"));
    }
    if points < 2 {
        return Err(OracleError::Input("at least two grid points per axis are required"));
    }
    let estimate = (points as f64).powi(users as i32 - 1);
    if estimate > MAX_SEARCH_SPACE {
        return Err(OracleError::TooLarge {
            estimate,
            limit: MAX_SEARCH_SPACE,
        });
    }
    let mut best = 0.0f64;
    sc_grid(gains_desc, user_power, max_multiplexed, noise, points, 0, total_power, 0.0, 0, 0.0, &mut best);
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn sc_grid(
    gains: &[f64],
    caps: &[f64],
    max_multiplexed: usize,
    noise: f64,
    points: usize,
    pos: usize,
    remaining: f64,
    interference: f64,
    powered: usize,
    value: f64,
    best: &mut f64,
) {
    if pos + 1 == gains.len() {
        let p = if powered < max_multiplexed {
            caps[pos].min(remaining).max(0.0)
        } else {
            0.0
        };
        *best = best.max(value + sic_rate(p, interference, gains[pos], noise));
        return;
    }
    for i in 0..points {
        let p = caps[pos] * i as f64 / (points - 1) as f64;
        if p > remaining {
            break;
        }
        let now = powered + usize::from(p > 0.0);
        if now > max_multiplexed {
            break;
        }
        let v = value + sic_rate(p, interference, gains[pos], noise);
        sc_grid(gains, caps, max_multiplexed, noise, points, pos + 1, remaining - p, interference + p, now, v, best);
    }
}
