//! Declarative TOML configs for sweeps and scheduling runs. Every field is
//! optional; omitted ones take the defaults below.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::ChannelModelConfig;
use crate::lddp::LddpParams;
use crate::scheduler::{ResolvePer, ScheduleParams};
use crate::scheme::Scheme;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(message.into()))
}

/// Dual-loop settings shared by both configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LddpSettings {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub upper_bound: bool,
}

impl Default for LddpSettings {
    fn default() -> Self {
        let p = LddpParams::default();
        Self {
            epsilon: p.epsilon,
            max_iterations: p.max_iterations,
            upper_bound: p.upper_bound,
        }
    }
}

impl LddpSettings {
    pub fn params(&self) -> LddpParams {
        LddpParams {
            epsilon: self.epsilon,
            max_iterations: self.max_iterations,
            upper_bound: self.upper_bound,
            ..LddpParams::default()
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return invalid(format!("lddp.epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.max_iterations == 0 {
            return invalid("lddp.max_iterations must be at least 1");
        }
        Ok(())
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Lddp, Scheme::NomaFtpc, Scheme::OfdmaFtpc]
}

fn check_power(total_power: f64, user_power: f64) -> Result<(), ConfigError> {
    for (name, v) in [("total_power", total_power), ("user_power", user_power)] {
        if !(v.is_finite() && v > 0.0) {
            return invalid(format!("{name} must be positive, got {v}"));
        }
    }
    Ok(())
}

fn check_at_least_one(fields: &[(&str, usize)]) -> Result<(), ConfigError> {
    match fields.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => invalid(format!("{name} must be at least 1")),
        None => Ok(()),
    }
}

/// Grid of instance sizes, each solved by every listed solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    /// Instances drawn per grid point; instance `i` uses seed `seed + i`.
    pub instances: usize,
    pub users: Vec<usize>,
    pub max_multiplexed: Vec<usize>,
    pub levels: Vec<usize>,
    pub subcarriers: usize,
    pub ofdma_subcarriers: usize,
    pub total_power: f64,
    pub user_power: f64,
    pub solvers: Vec<Scheme>,
    pub channel: ChannelModelConfig,
    pub lddp: LddpSettings,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            instances: 1,
            users: vec![20],
            max_multiplexed: vec![2],
            levels: vec![100],
            subcarriers: 5,
            ofdma_subcarriers: 25,
            total_power: 1.0,
            user_power: 0.2,
            solvers: default_schemes(),
            channel: ChannelModelConfig::default(),
            lddp: LddpSettings::default(),
        }
    }
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, list) in [
            ("users", &self.users),
            ("max_multiplexed", &self.max_multiplexed),
            ("levels", &self.levels),
        ] {
            if list.is_empty() {
                return invalid(format!("{name} must list at least one value"));
            }
            if list.contains(&0) {
                return invalid(format!("{name} values must be at least 1"));
            }
        }
        if self.solvers.is_empty() {
            return invalid("solvers must list at least one solver");
        }
        let fewest = self.users.iter().min().copied().unwrap_or(0);
        if self.max_multiplexed.iter().any(|&m| m > fewest) {
            return invalid("max_multiplexed values cannot exceed the smallest users value");
        }
        if self.solvers.contains(&Scheme::ScExact) && self.subcarriers != 1 {
            return invalid("sc-exact needs subcarriers = 1");
        }
        check_at_least_one(&[
            ("instances", self.instances),
            ("subcarriers", self.subcarriers),
            ("ofdma_subcarriers", self.ofdma_subcarriers),
        ])?;
        check_power(self.total_power, self.user_power)?;
        self.channel
            .validate()
            .or_else(|e| invalid(format!("channel: {e}")))?;
        self.lddp.validate()
    }
}

/// Proportional-fair runs, one per seed and solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Run `r` uses seed `seed + r`.
    pub seed: u64,
    pub runs: usize,
    pub users: usize,
    pub subcarriers: usize,
    pub ofdma_subcarriers: usize,
    pub max_multiplexed: usize,
    pub levels: usize,
    pub total_power: f64,
    pub user_power: f64,
    pub slots: usize,
    pub window: usize,
    pub frame_length: usize,
    pub resolve_per: ResolvePer,
    pub solvers: Vec<Scheme>,
    pub channel: ChannelModelConfig,
    pub lddp: LddpSettings,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let p = ScheduleParams::default();
        Self {
            seed: 1,
            runs: 1,
            users: p.users,
            subcarriers: p.subcarriers,
            ofdma_subcarriers: p.ofdma_subcarriers,
            max_multiplexed: p.max_multiplexed,
            levels: p.levels,
            total_power: p.total_power,
            user_power: p.user_power,
            slots: p.slots,
            window: p.window,
            frame_length: p.frame_length,
            resolve_per: p.resolve,
            solvers: default_schemes(),
            channel: p.channel,
            lddp: LddpSettings {
                upper_bound: false,
                ..LddpSettings::default()
            },
        }
    }
}

impl ScheduleConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_at_least_one(&[
            ("runs", self.runs),
            ("users", self.users),
            ("subcarriers", self.subcarriers),
            ("ofdma_subcarriers", self.ofdma_subcarriers),
            ("max_multiplexed", self.max_multiplexed),
            ("levels", self.levels),
            ("slots", self.slots),
            ("window", self.window),
            ("frame_length", self.frame_length),
        ])?;
        if self.max_multiplexed > self.users {
            return invalid("max_multiplexed cannot exceed users");
        }
        if self.solvers.is_empty() {
            return invalid("solvers must list at least one solver");
        }
        if self.solvers.contains(&Scheme::ScExact) {
            return invalid("sc-exact cannot drive the scheduler");
        }
        check_power(self.total_power, self.user_power)?;
        self.channel
            .validate()
            .or_else(|e| invalid(format!("channel: {e}")))?;
        self.lddp.validate()
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(|r| self.seed.wrapping_add(r))
    }

    pub fn params(&self) -> ScheduleParams {
        ScheduleParams {
            channel: self.channel.clone(),
            users: self.users,
            subcarriers: self.subcarriers,
            ofdma_subcarriers: self.ofdma_subcarriers,
            max_multiplexed: self.max_multiplexed,
            levels: self.levels,
            total_power: self.total_power,
            user_power: self.user_power,
            slots: self.slots,
            window: self.window,
            frame_length: self.frame_length,
            resolve: self.resolve_per,
            lddp: LddpParams {
                upper_bound: false,
                ..self.lddp.params()
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_files_give_defaults() {
        assert_eq!(SweepConfig::parse("").unwrap(), SweepConfig::default());
        assert_eq!(ScheduleConfig::parse("").unwrap(), ScheduleConfig::default());
    }

    #[test]
    fn sweep_fields_are_read() {
        let cfg = SweepConfig::parse(
            r#"
            seed = 7
            instances = 3
            users = [4, 8]
            levels = [20, 40]
            subcarriers = 1
            solvers = ["lddp", "sc-exact"]
            [channel]
            cell_radius_m = 300.0
            [lddp]
            max_iterations = 50
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.users, vec![4, 8]);
        assert_eq!(cfg.solvers, vec![Scheme::Lddp, Scheme::ScExact]);
        assert_eq!(cfg.channel.cell_radius_m, 300.0);
        assert_eq!(cfg.channel.carrier_frequency_hz, 2e9);
        assert_eq!(cfg.lddp.max_iterations, 50);
        assert_eq!(cfg.lddp.epsilon, 1e-5);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(matches!(SweepConfig::parse("users = []"), Err(ConfigError::Invalid(_))));
        assert!(matches!(SweepConfig::parse("solvers = [\"simplex\"]"), Err(ConfigError::Toml(_))));
        assert!(matches!(SweepConfig::parse("colour = 1"), Err(ConfigError::Toml(_))));
        assert!(matches!(SweepConfig::parse("solvers = [\"sc-exact\"]"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            SweepConfig::parse("users = [2, 8]\nmax_multiplexed = [3]"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ScheduleConfig::parse("users = 2\nmax_multiplexed = 3"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ScheduleConfig::parse("resolve_per = \"frame\"\nwindow = 0"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(ScheduleConfig::parse("[channel]\nedge_fraction = 2.0").is_err());
    }

    #[test]
    fn schedule_seeds_are_consecutive() {
        let cfg = ScheduleConfig::parse("seed = 10\nruns = 3\nresolve_per = \"frame\"").unwrap();
        assert_eq!(cfg.seeds().collect::<Vec<_>>(), vec![10, 11, 12]);
        assert_eq!(cfg.params().resolve, ResolvePer::Frame);
        assert!(!cfg.params().lddp.upper_bound);
    }
}
