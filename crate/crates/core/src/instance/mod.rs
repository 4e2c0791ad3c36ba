//! Problem data for downlink multi-carrier NOMA power and subcarrier allocation.
//!
//! A [`ProblemInstance`] carries everything a solver needs: the `K x N` channel
//! power gains, per-user weights, the power budgets, the multiplexing limit
//! `M` and the number of power levels `J` used by the discretized solvers.
//! [`SicOrder`] is the per-subcarrier decoding order derived from the gains.

mod channel;
mod format;

pub use channel::{
    generate_instance, ChannelModelConfig, Deployment, InstanceShape, PathLossModel,
    DEFAULT_BS_HEIGHT_M, DEFAULT_UE_HEIGHT_M, EDGE_INNER_FRACTION,
};
pub use format::{parse_instance, read_instance, render_instance, write_instance, ParseError};

use thiserror::Error;

/// Validation failure for a [`ProblemInstance`] or a [`ChannelModelConfig`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance needs at least one user and one subcarrier (got K={users}, N={subcarriers})")]
    Empty { users: usize, subcarriers: usize },
    #[error("{field} has {found} entries, expected {expected}")]
    Shape {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("gain for user {user} on subcarrier {subcarrier} must be positive and finite, got {value}")]
    Gain {
        user: usize,
        subcarrier: usize,
        value: f64,
    },
    #[error("{field} must be positive and finite, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("multiplexing limit M={max_multiplexed} must lie in 1..={users}")]
    Multiplexing { max_multiplexed: usize, users: usize },
    #[error("number of power levels J must be at least 1")]
    NoLevels,
    #[error("invalid channel model: {0}")]
    Config(String),
}

/// Full input to every solver in this crate.
///
/// Gains are linear power gains, powers are in watts. Rates computed from an
/// instance use the normalized bandwidth `B/N = 1`, so the noise term is the
/// per-subcarrier noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    /// `gains[k][n]`: channel power gain of user `k` on subcarrier `n`.
    pub gains: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub total_power: f64,
    pub user_power: Vec<f64>,
    /// Maximum number of users multiplexed on one subcarrier (`M`).
    pub max_multiplexed: usize,
    /// Per-subcarrier noise power `eta` in watts.
    pub noise: f64,
    /// Number of uniform power levels `J`.
    pub levels: usize,
}

impl ProblemInstance {
    /// Builds an instance with unit weights and checks every invariant.
    pub fn new(
        gains: Vec<Vec<f64>>,
        total_power: f64,
        user_power: Vec<f64>,
        max_multiplexed: usize,
        noise: f64,
        levels: usize,
    ) -> Result<Self, InstanceError> {
        let weights = vec![1.0; gains.len()];
        let inst = Self {
            gains,
            weights,
            total_power,
            user_power,
            max_multiplexed,
            noise,
            levels,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    pub fn subcarriers(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    pub fn gain(&self, user: usize, subcarrier: usize) -> f64 {
        self.gains[user][subcarrier]
    }

    /// Same instance with a different weight vector.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, InstanceError> {
        let inst = Self {
            weights,
            ..self.clone()
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Same instance with a different number of power levels.
    pub fn with_levels(&self, levels: usize) -> Result<Self, InstanceError> {
        let inst = Self {
            levels,
            ..self.clone()
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Same instance with a different multiplexing limit.
    pub fn with_max_multiplexed(&self, max_multiplexed: usize) -> Result<Self, InstanceError> {
        let inst = Self {
            max_multiplexed,
            ..self.clone()
        };
        inst.validate()?;
        Ok(inst)
    }

    /// True when every weight equals one, i.e. the utility is plain sum rate.
    pub fn has_unit_weights(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let users = self.gains.len();
        let subcarriers = self.subcarriers();
        if users == 0 || subcarriers == 0 {
            return Err(InstanceError::Empty { users, subcarriers });
        }
        for (k, row) in self.gains.iter().enumerate() {
            if row.len() != subcarriers {
                return Err(InstanceError::Shape {
                    field: "gains row",
                    expected: subcarriers,
                    found: row.len(),
                });
            }
            for (n, &g) in row.iter().enumerate() {
                if !(g.is_finite() && g > 0.0) {
                    return Err(InstanceError::Gain {
                        user: k,
                        subcarrier: n,
                        value: g,
                    });
                }
            }
        }
        check_len("weights", &self.weights, users)?;
        check_len("P_user", &self.user_power, users)?;
        for &w in &self.weights {
            positive("weights", w)?;
        }
        for &p in &self.user_power {
            positive("P_user", p)?;
        }
        positive("P_tot", self.total_power)?;
        positive("noise", self.noise)?;
        if self.max_multiplexed == 0 || self.max_multiplexed > users {
            return Err(InstanceError::Multiplexing {
                max_multiplexed: self.max_multiplexed,
                users,
            });
        }
        if self.levels == 0 {
            return Err(InstanceError::NoLevels);
        }
        Ok(())
    }
}

fn check_len(field: &'static str, v: &[f64], expected: usize) -> Result<(), InstanceError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(InstanceError::Shape {
            field,
            expected,
            found: v.len(),
        })
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), InstanceError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(InstanceError::NotPositive { field, value })
    }
}

/// Per-subcarrier SIC decoding order.
///
/// Position 0 holds the user with the largest gain. A user is interfered only
/// by users at smaller positions; everything later in the order is decoded and
/// cancelled first. Equal gains are ordered by ascending user index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SicOrder {
    /// `order[n][i]` is the user at position `i` on subcarrier `n`.
    order: Vec<Vec<usize>>,
    /// `position[n][k]` is the position of user `k` on subcarrier `n`.
    position: Vec<Vec<usize>>,
}

impl SicOrder {
    /// Users of subcarrier `n` from strongest to weakest.
    pub fn users(&self, subcarrier: usize) -> &[usize] {
        &self.order[subcarrier]
    }

    /// Zero-based position of `user` on `subcarrier`.
    pub fn position(&self, user: usize, subcarrier: usize) -> usize {
        self.position[subcarrier][user]
    }

    /// Whether `h`'s signal is treated as noise by `k` on `subcarrier`.
    pub fn interferes(&self, h: usize, k: usize, subcarrier: usize) -> bool {
        self.position[subcarrier][h] < self.position[subcarrier][k]
    }

    pub fn subcarriers(&self) -> usize {
        self.order.len()
    }
}

/// Sorts users on each subcarrier by descending gain.
pub fn sic_order(inst: &ProblemInstance) -> SicOrder {
    let users = inst.users();
    let mut order = Vec::with_capacity(inst.subcarriers());
    let mut position = Vec::with_capacity(inst.subcarriers());
    for n in 0..inst.subcarriers() {
        let mut idx: Vec<usize> = (0..users).collect();
        // stable sort keeps ascending index among equal gains
        idx.sort_by(|&a, &b| inst.gains[b][n].total_cmp(&inst.gains[a][n]));
        let mut pos = vec![0; users];
        for (i, &k) in idx.iter().enumerate() {
            pos[k] = i;
        }
        order.push(idx);
        position.push(pos);
    }
    SicOrder { order, position }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(gains: &[f64]) -> ProblemInstance {
        let k = gains.len();
        ProblemInstance::new(
            gains.iter().map(|&g| vec![g]).collect(),
            1.0,
            vec![0.2; k],
            1,
            1e-10,
            4,
        )
        .unwrap()
    }

    #[test]
    fn sorts_descending() {
        let order = sic_order(&column(&[0.5, 0.9, 0.1]));
        assert_eq!(order.users(0), &[1, 0, 2]);
        assert_eq!(order.position(1, 0), 0);
        assert!(order.interferes(1, 0, 0));
        assert!(!order.interferes(2, 0, 0));
    }

    #[test]
    fn ties_go_to_lower_index() {
        let order = sic_order(&column(&[0.5, 0.5]));
        assert_eq!(order.users(0), &[0, 1]);
    }

    #[test]
    fn single_user_is_identity() {
        let order = sic_order(&column(&[3.0]));
        assert_eq!(order.users(0), &[0]);
    }

    #[test]
    fn rejects_bad_fields() {
        let base = column(&[1.0, 2.0]);
        let mut bad = base.clone();
        bad.gains[1][0] = 0.0;
        assert!(matches!(bad.validate(), Err(InstanceError::Gain { user: 1, .. })));
        assert!(base.with_max_multiplexed(3).is_err());
        assert!(base.with_levels(0).is_err());
        assert!(base.with_weights(vec![1.0, -1.0]).is_err());
        let mut nan = base.clone();
        nan.noise = f64::NAN;
        assert!(nan.validate().is_err());
        let mut short = base;
        short.user_power.pop();
        assert!(matches!(
            short.validate(),
            Err(InstanceError::Shape { field: "P_user", .. })
        ));
    }
}
