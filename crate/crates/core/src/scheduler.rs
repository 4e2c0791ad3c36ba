//! Multi-slot proportional-fair harness.
//!
//! One user drop per seed. Fading is redrawn at the start of every frame;
//! every slot (or only the first slot of a frame) solves a weighted sum rate
//! problem with weights `1 / R̄_k(t)`, and the averages follow
//! `R̄_k(t + 1) = (1 - 1/T) R̄_k(t) + r_k(t) / T`. Rates are in bits/s.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{ftpc_allocation, FTPC_ALPHA};
use crate::instance::{
    sic_order, ChannelModelConfig, Deployment, InstanceError, InstanceShape, ProblemInstance, SicOrder,
};
use crate::lddp::{Lddp, LddpParams};
use crate::rate::{user_rates, PowerAllocation};
use crate::scheme::Scheme;

/// How often the allocation is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolvePer {
    #[default]
    Slot,
    /// Once per frame, with the weights of its first slot.
    Frame,
}

impl FromStr for ResolvePer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "slot" => Ok(ResolvePer::Slot),
            "frame" => Ok(ResolvePer::Frame),
            other => Err(format!("unknown resolve mode `{other}` (expected slot or frame)")),
        }
    }
}

impl fmt::Display for ResolvePer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResolvePer::Slot => "slot",
            ResolvePer::Frame => "frame",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub channel: ChannelModelConfig,
    pub users: usize,
    /// Subcarriers of the multiplexing schemes.
    pub subcarriers: usize,
    /// Subcarriers of the orthogonal scheme, over the same bandwidth.
    pub ofdma_subcarriers: usize,
    pub max_multiplexed: usize,
    pub levels: usize,
    pub total_power: f64,
    pub user_power: f64,
    pub slots: usize,
    /// Averaging window `T`.
    pub window: usize,
    pub frame_length: usize,
    pub resolve: ResolvePer,
    pub lddp: LddpParams,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            channel: ChannelModelConfig::default(),
            users: 20,
            subcarriers: 5,
            ofdma_subcarriers: 25,
            max_multiplexed: 2,
            levels: 100,
            total_power: 1.0,
            user_power: 0.2,
            slots: 100,
            window: 50,
            frame_length: 20,
            resolve: ResolvePer::Slot,
            lddp: LddpParams {
                upper_bound: false,
                ..LddpParams::default()
            },
        }
    }
}

impl ScheduleParams {
    fn validate(&self) -> Result<(), ScheduleError> {
        let positive = [
            ("slots", self.slots),
            ("window", self.window),
            ("frame_length", self.frame_length),
            ("users", self.users),
            ("subcarriers", self.subcarriers),
            ("ofdma_subcarriers", self.ofdma_subcarriers),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ScheduleError::Invalid(format!("{name} must be at least 1")));
        }
        self.channel.validate()?;
        Ok(())
    }

    pub fn shape(&self, scheme: Scheme) -> InstanceShape {
        InstanceShape {
            users: self.users,
            subcarriers: if scheme.is_orthogonal() {
                self.ofdma_subcarriers
            } else {
                self.subcarriers
            },
            max_multiplexed: self.max_multiplexed,
            levels: self.levels,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("scheme {0} cannot drive the scheduler")]
    Unsupported(Scheme),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("fairness index is undefined when every rate is zero")]
pub struct ZeroRates;

/// Per-slot record of one scheduling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub scheme: Scheme,
    pub seed: u64,
    pub window: usize,
    pub frame_length: usize,
    /// `rates[t][k]`: bits/s delivered in slot `t`.
    pub rates: Vec<Vec<f64>>,
    /// `weights[t][k] = 1 / averages[t][k]`.
    pub weights: Vec<Vec<f64>>,
    /// `averages[t][k] = R̄_k(t)`, one more row than slots.
    pub averages: Vec<Vec<f64>>,
    pub at_edge: Vec<bool>,
    /// `|position difference|` in the decoding order for every subcarrier
    /// that carried exactly two users, over all slots.
    pub pair_differences: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub edge_users: usize,
    pub center_users: usize,
    /// Mean period-average rate of each zone, bits/s.
    pub edge_mean: Option<f64>,
    pub center_mean: Option<f64>,
}

impl SlotTrace {
    pub fn slots(&self) -> usize {
        self.rates.len()
    }

    pub fn users(&self) -> usize {
        self.at_edge.len()
    }

    /// Mean delivered rate of every user over the run.
    pub fn period_average(&self) -> Vec<f64> {
        let slots = self.slots() as f64;
        (0..self.users())
            .map(|k| self.rates.iter().map(|r| r[k]).sum::<f64>() / slots)
            .collect()
    }

    /// Jain index of the period averages.
    pub fn jain(&self) -> Result<f64, ZeroRates> {
        jain_index(&self.period_average())
    }

    pub fn edge_stats(&self) -> EdgeStats {
        let avg = self.period_average();
        let zone = |edge: bool| {
            let rates: Vec<f64> = avg
                .iter()
                .zip(&self.at_edge)
                .filter(|(_, &e)| e == edge)
                .map(|(&r, _)| r)
                .collect();
            let mean = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
            (rates.len(), mean)
        };
        let (edge_users, edge_mean) = zone(true);
        let (center_users, center_mean) = zone(false);
        EdgeStats {
            edge_users,
            center_users,
            edge_mean,
            center_mean,
        }
    }

    /// `slot,user,rate,weight,average` with one row per slot and user.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "slot,user,rate,weight,average")?;
        for t in 0..self.slots() {
            for k in 0..self.users() {
                writeln!(
                    out,
                    "{t},{k},{:.9e},{:.9e},{:.9e}",
                    self.rates[t][k], self.weights[t][k], self.averages[t][k]
                )?;
            }
        }
        Ok(())
    }
}

/// One step of the exponential moving average.
#[inline]
pub fn moving_average(previous: f64, rate: f64, window: usize) -> f64 {
    let t = window as f64;
    (1.0 - 1.0 / t) * previous + rate / t
}

/// `(Σ x)² / (K Σ x²)`.
pub fn jain_index(values: &[f64]) -> Result<f64, ZeroRates> {
    let sum: f64 = values.iter().sum();
    let squares: f64 = values.iter().map(|x| x * x).sum();
    if squares == 0.0 {
        return Err(ZeroRates);
    }
    Ok(sum * sum / (values.len() as f64 * squares))
}

/// Position differences of every two-user subcarrier of `p`.
pub fn grouping_differences(order: &SicOrder, p: &PowerAllocation) -> Vec<usize> {
    (0..p.subcarriers())
        .filter_map(|n| match p.users_on(n).as_slice() {
            &[a, b] => Some(order.position(a, n).abs_diff(order.position(b, n))),
            _ => None,
        })
        .collect()
}

/// Counts per difference; entry `d` holds the number of pairs `d` apart,
/// entry 0 stays empty.
pub fn grouping_histogram(users: usize, differences: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut bins = vec![0u64; users.max(1)];
    for d in differences {
        bins[d] += 1;
    }
    bins
}

/// Initial averages: the expected rate under round robin, where each user
/// holds every subcarrier `1/K` of the time at power `min(P_tot / N, P_k)`.
pub fn cold_start_average(inst: &ProblemInstance, subcarrier_bandwidth_hz: f64) -> Vec<f64> {
    let users = inst.users() as f64;
    let per_carrier = inst.total_power / inst.subcarriers() as f64;
    (0..inst.users())
        .map(|k| {
            let p = per_carrier.min(inst.user_power[k]);
            inst.gains[k]
                .iter()
                .map(|&g| subcarrier_bandwidth_hz * (1.0 + p * g / inst.noise).log2())
                .sum::<f64>()
                / users
        })
        .collect()
}

/// Runs `params.slots` slots of `scheme` on the drop and fading drawn from
/// `seed`.
pub fn run_schedule(params: &ScheduleParams, scheme: Scheme, seed: u64) -> Result<SlotTrace, ScheduleError> {
    params.validate()?;
    if scheme == Scheme::ScExact {
        return Err(ScheduleError::Unsupported(scheme));
    }
    let cfg = params.channel.with_seed(seed);
    let shape = params.shape(scheme);
    let bandwidth = cfg.subcarrier_bandwidth_hz(shape.subcarriers);
    let user_power = vec![params.user_power; params.users];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drop = Deployment::sample(&cfg, params.users, &mut rng)?;

    let mut rates = Vec::with_capacity(params.slots);
    let mut weights = Vec::with_capacity(params.slots);
    let mut averages: Vec<Vec<f64>> = Vec::with_capacity(params.slots + 1);
    let mut pair_differences = Vec::new();

    let mut t = 0;
    while t < params.slots {
        let inst = drop.instance(&cfg, shape, params.total_power, &user_power, &mut rng)?;
        let order = sic_order(&inst);
        let solver = (scheme == Scheme::Lddp).then(|| Lddp::new(&inst, params.lddp.clone()));
        if averages.is_empty() {
            averages.push(cold_start_average(&inst, bandwidth));
        }
        let mut allocation: Option<PowerAllocation> = None;
        let frame_end = (t + params.frame_length).min(params.slots);
        for slot in t..frame_end {
            let avg = &averages[slot];
            let w: Vec<f64> = avg.iter().map(|r| 1.0 / r).collect();
            if allocation.is_none() || params.resolve == ResolvePer::Slot {
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                let normalized: Vec<f64> = w.iter().map(|x| x / mean).collect();
                allocation = Some(match &solver {
                    Some(lddp) => lddp.solve_weighted(&normalized).allocation,
                    None => {
                        let group = if scheme.is_orthogonal() { 1 } else { inst.max_multiplexed };
                        ftpc_allocation(&inst, &normalized, group, FTPC_ALPHA)
                    }
                });
            }
            let p = allocation.as_ref().expect("allocation set above");
            let r: Vec<f64> = user_rates(&inst, p)
                .iter()
                .map(|nats| nats * bandwidth / std::f64::consts::LN_2)
                .collect();
            pair_differences.extend(grouping_differences(&order, p));
            let next = avg
                .iter()
                .zip(&r)
                .map(|(&a, &x)| moving_average(a, x, params.window))
                .collect();
            averages.push(next);
            weights.push(w);
            rates.push(r);
        }
        t = frame_end;
    }

    Ok(SlotTrace {
        scheme,
        seed,
        window: params.window,
        frame_length: params.frame_length,
        rates,
        weights,
        averages,
        at_edge: drop.at_edge.clone(),
        pair_differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jain_reference_values() {
        assert_eq!(jain_index(&[2.0, 2.0, 2.0]).unwrap(), 1.0);
        assert!((jain_index(&[0.0, 5.0, 0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((jain_index(&[1.0, 2.0, 3.0]).unwrap() - 6.0 / 7.0).abs() < 1e-15);
        assert_eq!(jain_index(&[0.0, 0.0]), Err(ZeroRates));
    }

    #[test]
    fn unit_window_tracks_the_last_rate() {
        assert_eq!(moving_average(7.0, 3.5, 1), 3.5);
    }

    #[test]
    fn histogram_counts_only_pairs() {
        let inst = ProblemInstance::new(
            vec![vec![5e-8, 1e-8, 2e-8], vec![4e-8, 2e-8, 1e-8], vec![1e-9, 3e-8, 3e-8]],
            1.0,
            vec![0.5; 3],
            2,
            1e-10,
            10,
        )
        .unwrap();
        let order = sic_order(&inst);
        let p = PowerAllocation::from_rows(vec![
            vec![0.1, 0.0, 0.1],
            vec![0.0, 0.2, 0.0],
            vec![0.1, 0.0, 0.1],
        ])
        .unwrap();
        // subcarrier 0: users 0 and 2 at positions 0 and 2; subcarrier 2:
        // positions 1 and 0
        let diffs = grouping_differences(&order, &p);
        assert_eq!(diffs, vec![2, 1]);
        assert_eq!(grouping_histogram(3, diffs), vec![0, 1, 1]);
    }

    #[test]
    fn short_run_is_consistent() {
        let params = ScheduleParams {
            users: 4,
            levels: 10,
            slots: 7,
            window: 3,
            frame_length: 3,
            ..ScheduleParams::default()
        };
        for scheme in [Scheme::Lddp, Scheme::NomaFtpc, Scheme::OfdmaFtpc] {
            let trace = run_schedule(&params, scheme, 5).unwrap();
            assert_eq!(trace.slots(), 7);
            assert_eq!(trace.averages.len(), 8);
            for t in 0..7 {
                for k in 0..4 {
                    assert_eq!(trace.weights[t][k], 1.0 / trace.averages[t][k]);
                    assert_eq!(
                        trace.averages[t + 1][k],
                        moving_average(trace.averages[t][k], trace.rates[t][k], 3)
                    );
                }
            }
            let j = trace.jain().unwrap();
            assert!((0.25..=1.0).contains(&j));
        }
        assert!(run_schedule(&params, Scheme::ScExact, 5).is_err());
    }

    #[test]
    fn frame_mode_reuses_the_allocation() {
        let params = ScheduleParams {
            users: 3,
            levels: 8,
            slots: 4,
            window: 2,
            frame_length: 4,
            resolve: ResolvePer::Frame,
            ..ScheduleParams::default()
        };
        let trace = run_schedule(&params, Scheme::NomaFtpc, 1).unwrap();
        assert!(trace.rates.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn csv_has_one_row_per_slot_and_user() {
        let params = ScheduleParams {
            users: 2,
            levels: 4,
            slots: 3,
            ..ScheduleParams::default()
        };
        let trace = run_schedule(&params, Scheme::OfdmaFtpc, 2).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 2);
        assert!(text.starts_with("slot,user,rate,weight,average\n0,0,"));
    }
}
