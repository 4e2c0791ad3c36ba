//! Self-checks run by `noma-lddp verify`: solver outputs against the
//! exhaustive oracles and the structural invariants, on seeded random
//! instances small enough for the oracles.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dp::DpSolver;
use crate::instance::{sic_order, ProblemInstance};
use crate::lddp::{Lddp, LddpParams};
use crate::oracle::{brute_force_continuous_sc, brute_force_discrete, Objective};
use crate::rate::{rate_discrete, rate_overestimate, sic_rate, LevelAssignment, PowerGrid};
use crate::sc::{sc_sum_rate, solve_sc_sr};
use crate::scheduler::{jain_index, moving_average, run_schedule, ScheduleParams};
use crate::scheme::Scheme;

const RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// First failure, if any.
    pub detail: Option<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            detail: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.detail.is_none() {
                self.detail = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} ({} cases, {} failures)", self.name, self.cases, self.failures)?;
        if let Some(d) = &self.detail {
            write!(f, ": {d}")?;
        }
        Ok(())
    }
}

/// Random instance with `K ≤ max_users`, `N ≤ max_subcarriers`,
/// `M ≤ min(K, max_multiplexed)` and `J ≤ max_levels`. Gains span two
/// decades above a fixed noise floor so that interference matters.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_users: usize,
    max_subcarriers: usize,
    max_multiplexed: usize,
    max_levels: usize,
) -> ProblemInstance {
    let users = rng.random_range(1..=max_users);
    let subcarriers = rng.random_range(1..=max_subcarriers);
    let gains = (0..users)
        .map(|_| {
            (0..subcarriers)
                .map(|_| 10f64.powf(rng.random_range(-9.0..-7.0)))
                .collect()
        })
        .collect();
    let total_power = rng.random_range(0.3..1.0);
    let user_power = (0..users).map(|_| rng.random_range(0.1..0.6)).collect();
    let m = rng.random_range(1..=max_multiplexed.min(users));
    let levels = rng.random_range(1..=max_levels);
    ProblemInstance::new(gains, total_power, user_power, m, 1e-10, levels).expect("generated instance is valid")
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RTOL * a.abs().max(b.abs()).max(1.0)
}

fn sic_order_check(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut check = Check::new("sic-order");
    for _ in 0..cases {
        let mut inst = random_instance(rng, 6, 3, 2, 4);
        // force a tie so the index rule is exercised
        if inst.users() > 1 {
            inst.gains[1][0] = inst.gains[0][0];
        }
        let order = sic_order(&inst);
        for n in 0..inst.subcarriers() {
            let users = order.users(n);
            let sorted = users.windows(2).all(|w| {
                let (a, b) = (inst.gains[w[0]][n], inst.gains[w[1]][n]);
                a > b || (a == b && w[0] < w[1])
            });
            let positions = users.iter().enumerate().all(|(i, &k)| order.position(k, n) == i);
            check.record(sorted && positions && users.len() == inst.users(), || {
                format!("subcarrier {n} ordered as {users:?}")
            });
        }
    }
    check
}

fn dp_check(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut check = Check::new("dp-vs-oracle");
    for _ in 0..cases {
        let inst = random_instance(rng, 3, 2, 2, 6);
        let lambda: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..20.0)).collect();
        let dp = DpSolver::new(&inst).solve(&lambda);
        let grid = PowerGrid::for_instance(&inst);
        let oracle = brute_force_discrete(&inst, &grid, &Objective::Penalized(lambda.clone()))
            .expect("instance within oracle limits");
        check.record(close(dp.dual_value, oracle.value), || {
            format!("dp {} vs oracle {} at lambda {lambda:?}", dp.dual_value, oracle.value)
        });
    }
    check
}

fn sc_check(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut check = Check::new("sc-vs-grid-oracle");
    for _ in 0..cases {
        let users = rng.random_range(1..=4);
        let mut gains: Vec<f64> = (0..users).map(|_| 10f64.powf(rng.random_range(-9.0..-7.0))).collect();
        gains.sort_by(|a, b| b.total_cmp(a));
        let total = rng.random_range(0.3..1.0);
        let m = rng.random_range(1..=users);
        // the greedy fill is optimal for a shared limit, or for any limits
        // once M = K; a binding M with unequal limits is out of scope
        let caps: Vec<f64> = if m == users {
            (0..users).map(|_| rng.random_range(0.1..0.6)).collect()
        } else {
            vec![rng.random_range(0.1..0.6); users]
        };
        let powers = solve_sc_sr(&gains, total, &caps, m).expect("valid single-carrier input");
        let value = sc_sum_rate(&gains, &powers, 1e-10);
        let oracle = brute_force_continuous_sc(&gains, total, &caps, m, 1e-10, 41).expect("small search");
        let active = powers.iter().take_while(|&&p| p > 0.0).count();
        let prefix = powers[active..].iter().all(|&p| p == 0.0) && active <= m;
        check.record(value >= oracle - RTOL * oracle.abs().max(1.0) && prefix, || {
            format!("powers {powers:?} give {value}, grid optimum {oracle}")
        });
    }
    check
}

fn bound_check(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut check = Check::new("bound-vs-oracle");
    let params = LddpParams {
        max_iterations: 60,
        ..LddpParams::default()
    };
    for _ in 0..cases {
        let inst = random_instance(rng, 3, 2, 2, 6);
        let report = Lddp::new(&inst, params.clone()).solve();
        let ub = report.upper_bound.as_ref().expect("bound requested").value;
        let grid = PowerGrid::for_instance(&inst);
        let optimum = brute_force_discrete(&inst, &grid, &Objective::Utility)
            .expect("instance within oracle limits")
            .value;
        let slack = RTOL * ub.abs().max(1.0);
        check.record(ub + slack >= optimum && ub + slack >= report.lower_bound, || {
            format!("bound {ub} below optimum {optimum} or lower bound {}", report.lower_bound)
        });
    }
    check
}

fn repair_check(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut check = Check::new("repair-feasibility");
    let params = LddpParams {
        max_iterations: 30,
        upper_bound: false,
        ..LddpParams::default()
    };
    for _ in 0..cases {
        let inst = random_instance(rng, 8, 4, 3, 30);
        let report = Lddp::new(&inst, params.clone()).solve();
        check.record(report.allocation.is_feasible(&inst), || {
            format!("infeasible allocation {:?}", report.allocation.rows())
        });
    }
    check
}

/// Per-subcarrier sum rate written as a telescoping sum of log terms over
/// the cumulative power `S_i` of the first `i` users in SIC order:
/// `Σ_i [ln(η/g_i + S_i) - ln(η/g_i + S_{i-1})]`.
fn telescoping_sum(gains_desc: &[f64], powers: &[f64], noise: f64) -> f64 {
    let mut cumulative = 0.0;
    let mut total = 0.0;
    for (&g, &p) in gains_desc.iter().zip(powers) {
        let floor = noise / g;
        total += (floor + cumulative + p).ln() - (floor + cumulative).ln();
        cumulative += p;
    }
    total
}

fn rate_checks(rng: &mut ChaCha8Rng, cases: usize) -> (Check, Check) {
    let mut telescoping = Check::new("rate-telescoping");
    let mut overestimate = Check::new("overestimate-dominates");
    for _ in 0..cases {
        let users = rng.random_range(1..=4);
        let mut gains: Vec<f64> = (0..users).map(|_| 10f64.powf(rng.random_range(-9.0..-7.0))).collect();
        gains.sort_by(|a, b| b.total_cmp(a));
        let powers: Vec<f64> = (0..users).map(|_| rng.random_range(0.0..0.5)).collect();
        let direct = sc_sum_rate(&gains, &powers, 1e-10);
        let closed = telescoping_sum(&gains, &powers, 1e-10);
        telescoping.record((direct - closed).abs() <= 1e-12 * direct.abs().max(1e-300), || {
            format!("direct {direct} vs telescoped {closed}")
        });

        let inst = random_instance(rng, 4, 2, 3, 8);
        let order = sic_order(&inst);
        let grid = PowerGrid::for_instance(&inst);
        let levels = (0..inst.users())
            .map(|_| {
                (0..inst.subcarriers())
                    .map(|_| rng.random_range(0..=inst.levels))
                    .collect()
            })
            .collect();
        let x = LevelAssignment::from_levels(levels);
        for k in 0..inst.users() {
            for n in 0..inst.subcarriers() {
                let j = x.level(k, n);
                if j == 0 {
                    continue;
                }
                let r = rate_discrete(&inst, &order, &grid, &x, k, n, j).expect("level in range");
                let over = rate_overestimate(&inst, &order, &grid, &x, k, n, j).expect("level in range");
                overestimate.record(over >= r, || format!("cell ({k}, {n}): {over} < {r}"));
            }
        }
    }
    (telescoping, overestimate)
}

fn monotonicity_check(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut check = Check::new("rate-monotonicity");
    for _ in 0..cases {
        let g = 10f64.powf(rng.random_range(-9.0..-7.0));
        let p = rng.random_range(0.0..1.0);
        let i = rng.random_range(0.0..1.0);
        let dp = rng.random_range(0.0..0.5);
        let base = sic_rate(p, i, g, 1e-10);
        let ok = base >= 0.0
            && base.is_finite()
            && sic_rate(p + dp, i, g, 1e-10) >= base
            && sic_rate(p, i + dp, g, 1e-10) <= base;
        check.record(ok, || format!("p={p}, i={i}, dp={dp}, g={g}"));
    }
    check
}

fn schedule_checks(seed: u64) -> (Check, Check) {
    let mut average = Check::new("moving-average-identity");
    let mut jain = Check::new("jain-bounds");
    let params = ScheduleParams {
        users: 6,
        subcarriers: 2,
        ofdma_subcarriers: 6,
        levels: 20,
        slots: 30,
        window: 10,
        frame_length: 5,
        ..ScheduleParams::default()
    };
    for scheme in [Scheme::NomaFtpc, Scheme::OfdmaFtpc] {
        let trace = run_schedule(&params, scheme, seed).expect("valid schedule");
        for t in 0..trace.slots() {
            for k in 0..trace.users() {
                let expected = moving_average(trace.averages[t][k], trace.rates[t][k], trace.window);
                let next = trace.averages[t + 1][k];
                average.record(next.to_bits() == expected.to_bits(), || {
                    format!("{scheme} slot {t} user {k}: {next} vs {expected}")
                });
            }
        }
        let lower = 1.0 / trace.users() as f64;
        for values in [trace.period_average(), trace.averages[trace.slots()].clone()] {
            match jain_index(&values) {
                Ok(j) => jain.record(j >= lower - RTOL && j <= 1.0 + RTOL, || format!("{scheme}: index {j}")),
                Err(_) => jain.record(false, || format!("{scheme}: all rates zero")),
            }
        }
    }
    (average, jain)
}

/// Runs every check from one seed.
pub fn run_checks(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![
        sic_order_check(&mut rng, 50),
        monotonicity_check(&mut rng, 500),
    ];
    let (telescoping, overestimate) = rate_checks(&mut rng, 100);
    checks.push(telescoping);
    checks.push(overestimate);
    checks.push(sc_check(&mut rng, 60));
    checks.push(dp_check(&mut rng, 60));
    checks.push(bound_check(&mut rng, 30));
    checks.push(repair_check(&mut rng, 30));
    let (average, jain) = schedule_checks(seed);
    checks.push(average);
    checks.push(jain);
    checks
}
