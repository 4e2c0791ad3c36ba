//! SIC-aware rates.
//!
//! All rates are in nats per channel use on a normalized bandwidth
//! (`B/N = 1`). User `k` on subcarrier `n` sees as interference only the
//! signals of users placed before it in the [`SicOrder`]; the rest are
//! cancelled.

use thiserror::Error;

use crate::instance::{sic_order, ProblemInstance, SicOrder};

/// Relative slack accepted by [`PowerAllocation::is_feasible`] for sums of
/// floating-point powers.
pub const FEASIBILITY_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("user {user} on subcarrier {subcarrier} selects more than one power level")]
    MultipleLevels { user: usize, subcarrier: usize },
    #[error("power level {level} outside 1..={levels}")]
    Level { level: usize, levels: usize },
}

/// `K x N` matrix of transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    powers: Vec<Vec<f64>>,
}

impl PowerAllocation {
    pub fn zeros(users: usize, subcarriers: usize) -> Self {
        Self {
            powers: vec![vec![0.0; subcarriers]; users],
        }
    }

    /// Wraps a power matrix. Negative or non-finite entries are rejected.
    pub fn from_rows(powers: Vec<Vec<f64>>) -> Option<Self> {
        let width = powers.first().map_or(0, Vec::len);
        let ok = powers
            .iter()
            .all(|r| r.len() == width && r.iter().all(|&p| p.is_finite() && p >= 0.0));
        ok.then_some(Self { powers })
    }

    pub fn users(&self) -> usize {
        self.powers.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.powers.first().map_or(0, Vec::len)
    }

    pub fn get(&self, user: usize, subcarrier: usize) -> f64 {
        self.powers[user][subcarrier]
    }

    pub fn set(&mut self, user: usize, subcarrier: usize, power: f64) {
        debug_assert!(power.is_finite() && power >= 0.0);
        self.powers[user][subcarrier] = power;
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.powers
    }

    pub fn user_total(&self, user: usize) -> f64 {
        self.powers[user].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().flatten().sum()
    }

    /// Users with positive power on `subcarrier`, in index order.
    pub fn users_on(&self, subcarrier: usize) -> Vec<usize> {
        (0..self.users())
            .filter(|&k| self.powers[k][subcarrier] > 0.0)
            .collect()
    }

    /// Whether some user exceeds its individual limit.
    pub fn violates_user_limits(&self, inst: &ProblemInstance) -> bool {
        (0..self.users()).any(|k| self.user_total(k) > inst.user_power[k] * (1.0 + FEASIBILITY_RTOL))
    }

    /// Total budget, per-user limits and the multiplexing cap.
    pub fn is_feasible(&self, inst: &ProblemInstance) -> bool {
        self.users() == inst.users()
            && self.subcarriers() == inst.subcarriers()
            && self.total() <= inst.total_power * (1.0 + FEASIBILITY_RTOL)
            && !self.violates_user_limits(inst)
            && (0..self.subcarriers()).all(|n| self.users_on(n).len() <= inst.max_multiplexed)
    }
}

/// Uniform power levels `p^j = j * step`, `j = 1..=levels`, `step = P_tot / J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGrid {
    step: f64,
    levels: usize,
}

impl PowerGrid {
    pub fn new(total_power: f64, levels: usize) -> Self {
        assert!(levels >= 1 && total_power > 0.0, "empty power grid");
        Self {
            step: total_power / levels as f64,
            levels,
        }
    }

    pub fn for_instance(inst: &ProblemInstance) -> Self {
        Self::new(inst.total_power, inst.levels)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Power of level `j`; level 0 means "off".
    pub fn power(&self, level: usize) -> f64 {
        self.step * level as f64
    }
}

/// Discrete level choice per (user, subcarrier); 0 means the user is off.
///
/// Holding one level per cell makes "at most one level per user and
/// subcarrier" hold by construction; [`LevelAssignment::from_indicators`]
/// checks it for the 0/1 form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAssignment {
    levels: Vec<Vec<usize>>,
}

impl LevelAssignment {
    pub fn empty(users: usize, subcarriers: usize) -> Self {
        Self {
            levels: vec![vec![0; subcarriers]; users],
        }
    }

    pub fn from_levels(levels: Vec<Vec<usize>>) -> Self {
        Self { levels }
    }

    /// Converts `x[k][n][j-1]` indicators into a level assignment.
    pub fn from_indicators(x: &[Vec<Vec<bool>>]) -> Result<Self, RateError> {
        let mut levels = Vec::with_capacity(x.len());
        for (k, row) in x.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (n, cell) in row.iter().enumerate() {
                let mut chosen = 0;
                for (j, &on) in cell.iter().enumerate() {
                    if on {
                        if chosen != 0 {
                            return Err(RateError::MultipleLevels {
                                user: k,
                                subcarrier: n,
                            });
                        }
                        chosen = j + 1;
                    }
                }
                out.push(chosen);
            }
            levels.push(out);
        }
        Ok(Self { levels })
    }

    pub fn level(&self, user: usize, subcarrier: usize) -> usize {
        self.levels[user][subcarrier]
    }

    pub fn set(&mut self, user: usize, subcarrier: usize, level: usize) {
        self.levels[user][subcarrier] = level;
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn total_levels(&self) -> usize {
        self.levels.iter().flatten().sum()
    }

    pub fn subcarrier_levels(&self, subcarrier: usize) -> usize {
        self.levels.iter().map(|r| r[subcarrier]).sum()
    }

    pub fn user_levels(&self, user: usize) -> usize {
        self.levels[user].iter().sum()
    }

    pub fn active_on(&self, subcarrier: usize) -> usize {
        self.levels.iter().filter(|r| r[subcarrier] > 0).count()
    }

    pub fn to_powers(&self, grid: &PowerGrid) -> PowerAllocation {
        PowerAllocation {
            powers: self
                .levels
                .iter()
                .map(|r| r.iter().map(|&j| grid.power(j)).collect())
                .collect(),
        }
    }
}

/// `log(1 + p g / (i g + eta))` with `i` the interfering power.
#[inline]
pub fn sic_rate(own_power: f64, interference_power: f64, gain: f64, noise: f64) -> f64 {
    (own_power * gain / (interference_power * gain + noise)).ln_1p()
}

/// Rate of user `k` on subcarrier `n` under continuous powers `p`.
pub fn rate_continuous(
    inst: &ProblemInstance,
    order: &SicOrder,
    p: &PowerAllocation,
    user: usize,
    subcarrier: usize,
) -> f64 {
    let pos = order.position(user, subcarrier);
    let interference: f64 = order.users(subcarrier)[..pos]
        .iter()
        .map(|&h| p.get(h, subcarrier))
        .sum();
    sic_rate(
        p.get(user, subcarrier),
        interference,
        inst.gain(user, subcarrier),
        inst.noise,
    )
}

/// Weighted sum rate with a precomputed order.
pub fn wsr_with_order(inst: &ProblemInstance, order: &SicOrder, p: &PowerAllocation) -> f64 {
    wsr_with_weights(inst, order, &inst.weights, p)
}

/// Weighted sum rate using `weights` instead of the instance weights.
pub fn wsr_with_weights(
    inst: &ProblemInstance,
    order: &SicOrder,
    weights: &[f64],
    p: &PowerAllocation,
) -> f64 {
    let mut total = 0.0;
    for n in 0..inst.subcarriers() {
        let mut interference = 0.0;
        for &k in order.users(n) {
            let own = p.get(k, n);
            if own > 0.0 {
                total += weights[k] * sic_rate(own, interference, inst.gains[k][n], inst.noise);
                interference += own;
            }
        }
    }
    total
}

/// `sum_k w_k sum_n R_kn`.
pub fn wsr_utility(inst: &ProblemInstance, p: &PowerAllocation) -> f64 {
    wsr_with_order(inst, &sic_order(inst), p)
}

/// Sum rate: the weighted sum rate with every weight set to one.
pub fn sr_utility(inst: &ProblemInstance, p: &PowerAllocation) -> f64 {
    let order = sic_order(inst);
    let mut total = 0.0;
    for k in 0..inst.users() {
        for n in 0..inst.subcarriers() {
            total += rate_continuous(inst, &order, p, k, n);
        }
    }
    total
}

/// Per-user sum over subcarriers of the rate, unweighted.
pub fn user_rates(inst: &ProblemInstance, p: &PowerAllocation) -> Vec<f64> {
    let order = sic_order(inst);
    (0..inst.users())
        .map(|k| {
            (0..inst.subcarriers())
                .map(|n| rate_continuous(inst, &order, p, k, n))
                .sum()
        })
        .collect()
}

fn check_level(grid: &PowerGrid, level: usize) -> Result<(), RateError> {
    if (1..=grid.levels()).contains(&level) {
        Ok(())
    } else {
        Err(RateError::Level {
            level,
            levels: grid.levels(),
        })
    }
}

/// `R_kn^j`: rate of user `k` on `n` at level `j`, interfered by the levels
/// the assignment gives to earlier users in the SIC order.
pub fn rate_discrete(
    inst: &ProblemInstance,
    order: &SicOrder,
    grid: &PowerGrid,
    x: &LevelAssignment,
    user: usize,
    subcarrier: usize,
    level: usize,
) -> Result<f64, RateError> {
    check_level(grid, level)?;
    let pos = order.position(user, subcarrier);
    let interfering_levels: usize = order.users(subcarrier)[..pos]
        .iter()
        .map(|&h| x.level(h, subcarrier))
        .sum();
    Ok(sic_rate(
        grid.power(level),
        grid.power(interfering_levels),
        inst.gain(user, subcarrier),
        inst.noise,
    ))
}

/// Optimistic `R̄_kn^j`: own power raised by one step, every interfering
/// power lowered by one step (never below zero).
pub fn rate_overestimate(
    inst: &ProblemInstance,
    order: &SicOrder,
    grid: &PowerGrid,
    x: &LevelAssignment,
    user: usize,
    subcarrier: usize,
    level: usize,
) -> Result<f64, RateError> {
    check_level(grid, level)?;
    let pos = order.position(user, subcarrier);
    let interference: f64 = order.users(subcarrier)[..pos]
        .iter()
        .map(|&h| x.level(h, subcarrier))
        .filter(|&j| j > 0)
        .map(|j| (grid.power(j) - grid.step()).max(0.0))
        .sum();
    Ok(sic_rate(
        grid.power(level) + grid.step(),
        interference,
        inst.gain(user, subcarrier),
        inst.noise,
    ))
}

/// Weighted sum of `R_kn^j` over the active cells of `x`.
pub fn discrete_utility(
    inst: &ProblemInstance,
    order: &SicOrder,
    grid: &PowerGrid,
    x: &LevelAssignment,
) -> f64 {
    let mut total = 0.0;
    for k in 0..inst.users() {
        for n in 0..inst.subcarriers() {
            let j = x.level(k, n);
            if j > 0 {
                total += inst.weights[k]
                    * rate_discrete(inst, order, grid, x, k, n, j).expect("level within grid");
            }
        }
    }
    total
}
