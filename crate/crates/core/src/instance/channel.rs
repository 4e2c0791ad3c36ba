use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use super::{InstanceError, ProblemInstance};

pub const DEFAULT_BS_HEIGHT_M: f64 = 30.0;
pub const DEFAULT_UE_HEIGHT_M: f64 = 1.5;
/// Inner radius of the cell-edge annulus as a fraction of the cell radius.
pub const EDGE_INNER_FRACTION: f64 = 0.7;
/// Users closer than this are placed at this distance; the path-loss model
/// has no meaning at the mast.
const MIN_DISTANCE_M: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathLossModel {
    /// COST-231 Hata, large-city mobile correction, metropolitan offset of 3 dB.
    #[default]
    Cost231Hata,
}

impl PathLossModel {
    /// Path loss in dB at `distance_m`.
    pub fn loss_db(self, distance_m: f64, carrier_hz: f64, bs_height_m: f64, ue_height_m: f64) -> f64 {
        match self {
            PathLossModel::Cost231Hata => {
                let f_mhz = carrier_hz / 1e6;
                let d_km = distance_m / 1e3;
                let mobile = 3.2 * (11.75 * ue_height_m).log10().powi(2) - 4.97;
                46.3 + 33.9 * f_mhz.log10() - 13.82 * bs_height_m.log10() - mobile
                    + (44.9 - 6.55 * bs_height_m.log10()) * d_km.log10()
                    + 3.0
            }
        }
    }
}

/// Physical setup used to draw random instances. Missing fields take their
/// default values when deserialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModelConfig {
    pub cell_radius_m: f64,
    pub carrier_frequency_hz: f64,
    pub total_bandwidth_hz: f64,
    pub path_loss: PathLossModel,
    pub shadowing_std_db: f64,
    pub noise_psd_dbm_hz: f64,
    pub seed: u64,
    /// Fraction of users dropped in the edge annulus; the rest go to the
    /// center disc. `None` drops everyone uniformly over the whole cell.
    pub edge_fraction: Option<f64>,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
}

impl Default for ChannelModelConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 200.0,
            carrier_frequency_hz: 2e9,
            total_bandwidth_hz: 4.5e6,
            path_loss: PathLossModel::Cost231Hata,
            shadowing_std_db: 8.0,
            noise_psd_dbm_hz: -173.0,
            seed: 0,
            edge_fraction: None,
            bs_height_m: DEFAULT_BS_HEIGHT_M,
            ue_height_m: DEFAULT_UE_HEIGHT_M,
        }
    }
}

impl ChannelModelConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("carrier_frequency_hz", self.carrier_frequency_hz),
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("bs_height_m", self.bs_height_m),
            ("ue_height_m", self.ue_height_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(InstanceError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.shadowing_std_db.is_finite() && self.shadowing_std_db >= 0.0) {
            return Err(InstanceError::Config(format!(
                "shadowing_std_db must be non-negative, got {}",
                self.shadowing_std_db
            )));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return Err(InstanceError::Config("noise_psd_dbm_hz must be finite".into()));
        }
        if self.cell_radius_m <= MIN_DISTANCE_M {
            return Err(InstanceError::Config(format!(
                "cell_radius_m must exceed {MIN_DISTANCE_M} m"
            )));
        }
        if let Some(f) = self.edge_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(InstanceError::Config(format!("edge_fraction {f} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Noise power per subcarrier in watts for `subcarriers` equal slices of
    /// the total bandwidth.
    pub fn noise_power(&self, subcarriers: usize) -> f64 {
        10f64.powf(self.noise_psd_dbm_hz / 10.0) * 1e-3 * self.subcarrier_bandwidth_hz(subcarriers)
    }

    pub fn subcarrier_bandwidth_hz(&self, subcarriers: usize) -> f64 {
        self.total_bandwidth_hz / subcarriers as f64
    }
}

/// Sizes and discretization of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceShape {
    pub users: usize,
    pub subcarriers: usize,
    pub max_multiplexed: usize,
    pub levels: usize,
}

/// User drop: distance, shadowing and zone of every user. Fading is drawn
/// separately so one drop can feed several subcarrier layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub distances_m: Vec<f64>,
    pub shadowing_db: Vec<f64>,
    pub at_edge: Vec<bool>,
    /// Path loss and shadowing combined, as a linear power gain.
    pub large_scale_gain: Vec<f64>,
}

impl Deployment {
    pub fn sample<R: Rng + ?Sized>(
        cfg: &ChannelModelConfig,
        users: usize,
        rng: &mut R,
    ) -> Result<Self, InstanceError> {
        cfg.validate()?;
        if users == 0 {
            return Err(InstanceError::Empty {
                users,
                subcarriers: 1,
            });
        }
        let shadow = Normal::new(0.0, cfg.shadowing_std_db)
            .map_err(|e| InstanceError::Config(e.to_string()))?;
        let radius = cfg.cell_radius_m;
        let inner = EDGE_INNER_FRACTION * radius;
        let edge_users = cfg
            .edge_fraction
            .map_or(0, |f| (f * users as f64).round() as usize);

        let mut distances_m = Vec::with_capacity(users);
        let mut shadowing_db = Vec::with_capacity(users);
        let mut at_edge = Vec::with_capacity(users);
        let mut large_scale_gain = Vec::with_capacity(users);
        for k in 0..users {
            let (lo, hi) = match cfg.edge_fraction {
                None => (0.0, radius),
                Some(_) if k < edge_users => (inner, radius),
                Some(_) => (0.0, inner),
            };
            // uniform over the annulus area
            let u: f64 = rng.random();
            let d = (lo * lo + u * (hi * hi - lo * lo)).sqrt().max(MIN_DISTANCE_M);
            let s = shadow.sample(rng);
            let loss = cfg
                .path_loss
                .loss_db(d, cfg.carrier_frequency_hz, cfg.bs_height_m, cfg.ue_height_m);
            distances_m.push(d);
            shadowing_db.push(s);
            at_edge.push(d >= inner);
            large_scale_gain.push(10f64.powf((-loss + s) / 10.0));
        }
        Ok(Self {
            distances_m,
            shadowing_db,
            at_edge,
            large_scale_gain,
        })
    }

    pub fn users(&self) -> usize {
        self.distances_m.len()
    }

    /// Draws i.i.d. unit-mean Rayleigh power fading on `subcarriers` slices
    /// and assembles an instance with unit weights.
    pub fn instance<R: Rng + ?Sized>(
        &self,
        cfg: &ChannelModelConfig,
        shape: InstanceShape,
        total_power: f64,
        user_power: &[f64],
        rng: &mut R,
    ) -> Result<ProblemInstance, InstanceError> {
        if shape.users != self.users() {
            return Err(InstanceError::Shape {
                field: "users",
                expected: self.users(),
                found: shape.users,
            });
        }
        if shape.subcarriers == 0 {
            return Err(InstanceError::Empty {
                users: shape.users,
                subcarriers: 0,
            });
        }
        let gains = self
            .large_scale_gain
            .iter()
            .map(|&big| {
                (0..shape.subcarriers)
                    .map(|_| {
                        let fading: f64 = Exp1.sample(rng);
                        // an exact zero draw would break the positivity invariant
                        big * fading.max(f64::MIN_POSITIVE)
                    })
                    .collect()
            })
            .collect();
        ProblemInstance::new(
            gains,
            total_power,
            user_power.to_vec(),
            shape.max_multiplexed,
            cfg.noise_power(shape.subcarriers),
            shape.levels,
        )
    }
}

/// Draws one instance: a user drop followed by a fading realization, both
/// from a ChaCha8 stream seeded with `cfg.seed`.
pub fn generate_instance(
    cfg: &ChannelModelConfig,
    shape: InstanceShape,
    total_power: f64,
    user_power: &[f64],
) -> Result<ProblemInstance, InstanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let drop = Deployment::sample(cfg, shape.users, &mut rng)?;
    drop.instance(cfg, shape, total_power, user_power, &mut rng)
}
