//! Batch sweeps over instance sizes. Cells run in parallel; output order and
//! content depend only on the config.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::SweepConfig;
use crate::instance::{Deployment, InstanceError, InstanceShape, ProblemInstance};
use crate::rate::user_rates;
use crate::scheme::{solve_scheme, Scheme, SchemeError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("{solver} on seed {seed}: {source}")]
    Scheme {
        solver: Scheme,
        seed: u64,
        #[source]
        source: SchemeError,
    },
}

/// One (instance, size, solver) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepCell {
    pub seed: u64,
    pub instance: usize,
    pub users: usize,
    pub max_multiplexed: usize,
    pub levels: usize,
    pub solver: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: SweepCell,
    /// Sum rate in nats over the normalized subcarriers of the solver's grid.
    pub utility: f64,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    /// Sum rate in bit/s.
    pub throughput: f64,
    pub wall_time: Duration,
}

impl SweepRow {
    pub fn gap(&self) -> Option<f64> {
        match (self.lower_bound, self.upper_bound) {
            (Some(lb), Some(ub)) if ub > 0.0 => Some((ub - lb) / ub),
            _ => None,
        }
    }
}

/// Cells in output order: instance, then users, multiplexing, levels, solver.
pub fn sweep_cells(cfg: &SweepConfig) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for instance in 0..cfg.instances {
        let seed = cfg.seed.wrapping_add(instance as u64);
        for &users in &cfg.users {
            for &max_multiplexed in &cfg.max_multiplexed {
                for &levels in &cfg.levels {
                    for &solver in &cfg.solvers {
                        cells.push(SweepCell {
                            seed,
                            instance,
                            users,
                            max_multiplexed,
                            levels,
                            solver,
                        });
                    }
                }
            }
        }
    }
    cells
}

/// The NOMA-grid and orthogonal-grid instances of one seed.
///
/// Both share the same user drop and draw fading from one stream, NOMA grid
/// first. Multiplexing limit and level count do not touch the stream, so
/// every (M, J) pair of a seed sees the same channel.
pub fn paired_instances(
    cfg: &SweepConfig,
    seed: u64,
    users: usize,
    max_multiplexed: usize,
    levels: usize,
) -> Result<(ProblemInstance, ProblemInstance), InstanceError> {
    let channel = cfg.channel.with_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drop = Deployment::sample(&channel, users, &mut rng)?;
    let user_power = vec![cfg.user_power; users];
    let shape = |subcarriers| InstanceShape {
        users,
        subcarriers,
        max_multiplexed,
        levels,
    };
    let noma = drop.instance(&channel, shape(cfg.subcarriers), cfg.total_power, &user_power, &mut rng)?;
    let ofdma = drop.instance(&channel, shape(cfg.ofdma_subcarriers), cfg.total_power, &user_power, &mut rng)?;
    Ok((noma, ofdma))
}

fn run_cell(cfg: &SweepConfig, cell: SweepCell) -> Result<SweepRow, SweepError> {
    let (noma, ofdma) = paired_instances(cfg, cell.seed, cell.users, cell.max_multiplexed, cell.levels)?;
    let (inst, subcarriers) = if cell.solver.is_orthogonal() {
        (&ofdma, cfg.ofdma_subcarriers)
    } else {
        (&noma, cfg.subcarriers)
    };
    let params = cfg.lddp.params();
    let start = Instant::now();
    let outcome = solve_scheme(cell.solver, inst, &inst.weights, &params).map_err(|source| SweepError::Scheme {
        solver: cell.solver,
        seed: cell.seed,
        source,
    })?;
    let wall_time = start.elapsed();
    let bandwidth = cfg.channel.subcarrier_bandwidth_hz(subcarriers);
    let nats: f64 = user_rates(inst, &outcome.allocation).iter().sum();
    Ok(SweepRow {
        cell,
        utility: outcome.utility,
        lower_bound: outcome.lower_bound,
        upper_bound: outcome.upper_bound.map(|ub| ub.value),
        throughput: nats * bandwidth / std::f64::consts::LN_2,
        wall_time,
    })
}

/// Solves every cell. Rows come back in [`sweep_cells`] order whatever the
/// thread count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    sweep_cells(cfg)
        .into_par_iter()
        .map(|cell| run_cell(cfg, cell))
        .collect()
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

/// CSV with a header row. Wall time is the only nondeterministic column and
/// is written only when `timing` is set.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], timing: bool, out: &mut W) -> io::Result<()> {
    write!(out, "seed,instance,K,M,J,solver,utility,v_lb,v_ub,gap,throughput")?;
    writeln!(out, "{}", if timing { ",wall_time_s" } else { "" })?;
    for row in rows {
        let c = &row.cell;
        write!(
            out,
            "{},{},{},{},{},{},{:.9e},{},{},{},{:.9e}",
            c.seed,
            c.instance,
            c.users,
            c.max_multiplexed,
            c.levels,
            c.solver,
            row.utility,
            optional(row.lower_bound),
            optional(row.upper_bound),
            optional(row.gap()),
            row.throughput,
        )?;
        if timing {
            write!(out, ",{:.6}", row.wall_time.as_secs_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::LddpSettings;

    fn small() -> SweepConfig {
        SweepConfig {
            seed: 3,
            instances: 2,
            users: vec![3, 4],
            max_multiplexed: vec![2],
            levels: vec![8],
            subcarriers: 2,
            ofdma_subcarriers: 4,
            lddp: LddpSettings {
                max_iterations: 20,
                ..LddpSettings::default()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn cells_follow_config_order() {
        let cells = sweep_cells(&small());
        assert_eq!(cells.len(), 2 * 2 * 3);
        assert_eq!(cells[0].seed, 3);
        assert_eq!(cells[0].solver, Scheme::Lddp);
        assert_eq!(cells[3].users, 4);
        assert_eq!(cells[6].seed, 4);
    }

    #[test]
    fn grids_share_the_drop() {
        let cfg = small();
        let (a, _) = paired_instances(&cfg, 9, 4, 1, 8).unwrap();
        let (b, _) = paired_instances(&cfg, 9, 4, 2, 30).unwrap();
        assert_eq!(a.gains, b.gains);
    }

    #[test]
    fn csv_is_reproducible() {
        let cfg = small();
        let render = || {
            let mut buf = Vec::new();
            write_sweep_csv(&run_sweep(&cfg).unwrap(), false, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let first = render();
        assert_eq!(first, render());
        let lines: Vec<&str> = first.lines().collect();
        assert_eq!(lines.len(), 13);
        assert_eq!(lines[0], "seed,instance,K,M,J,solver,utility,v_lb,v_ub,gap,throughput");
        // baselines carry no bounds
        assert!(lines[2].ends_with(&format!(",,,,{}", lines[2].rsplit(',').next().unwrap())));
    }
}
