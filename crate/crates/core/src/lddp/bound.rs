//! Certified upper bound from the over-estimated subproblem.
//!
//! Every user level `c` is valued with own power `(c + 1) δ`, every powered
//! earlier user `h` interferes with `(c_h - 1) δ`, and power is charged as
//! `(c - 1) δ` against both the per-user multipliers and the total-power
//! multiplier `μ`. Rounding any continuous allocation to
//! `max(1, floor(p / δ))` levels then never loses value, and the rounded
//! levels on one subcarrier sum to at most `J + M`. With the total-power
//! constraint priced by `μ` instead of enforced, subcarriers decouple and the
//! bound is the per-subcarrier envelopes at `J + M` levels plus
//! `Σ λ_k P_k + μ P_tot`, minimized over `μ ≥ 0`.

use crate::dp::{run_stage1, SubcarrierTable};
use crate::instance::{sic_order, ProblemInstance, SicOrder};
use crate::rate::{sic_rate, LevelAssignment, PowerGrid};

const MAX_BISECTIONS: usize = 60;
const BRACKET_RTOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    /// `V_UB`.
    pub value: f64,
    /// Total-power multiplier attaining `value`.
    pub mu: f64,
    /// Subproblem solves spent in the search.
    pub evaluations: usize,
    /// The search stopped on its iteration limit without shrinking the
    /// bracket, or the minimizer sits at the largest `μ` probed.
    pub at_bracket_edge: bool,
}

/// One solve of the over-estimated subproblem.
#[derive(Debug, Clone)]
pub struct OverestimateSolution {
    /// Subproblem optimum, constants included.
    pub value: f64,
    /// `P_tot - Σ (p^c - δ)`: derivative of `value` in `μ`.
    pub slope: f64,
    pub assignment: LevelAssignment,
}

/// Caches the SIC order and the over-estimated rate tables of an instance.
#[derive(Debug, Clone)]
pub struct OverestimateSolver<'a> {
    inst: &'a ProblemInstance,
    order: SicOrder,
    grid: PowerGrid,
    /// `rates[n][pos][c * (cap + 1) + i]`: own level `c`, `i` deflated
    /// interfering levels.
    rates: Vec<Vec<Vec<f64>>>,
}

impl<'a> OverestimateSolver<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Self {
        Self::with_order(inst, sic_order(inst), PowerGrid::for_instance(inst))
    }

    pub fn with_order(inst: &'a ProblemInstance, order: SicOrder, grid: PowerGrid) -> Self {
        let levels = grid.levels();
        let cap = level_cap(inst, &grid);
        let step = grid.step();
        let rates = (0..inst.subcarriers())
            .map(|n| {
                order
                    .users(n)
                    .iter()
                    .map(|&k| {
                        let g = inst.gains[k][n];
                        let mut row = vec![0.0; (levels + 1) * (cap + 1)];
                        for c in 1..=levels {
                            for i in 0..=cap - c {
                                row[c * (cap + 1) + i] =
                                    sic_rate((c + 1) as f64 * step, i as f64 * step, g, inst.noise);
                            }
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        Self {
            inst,
            order,
            grid,
            rates,
        }
    }

    /// Largest level total tracked on one subcarrier.
    pub fn level_cap(&self) -> usize {
        level_cap(self.inst, &self.grid)
    }

    fn table(&self, weights: &[f64], multipliers: &[f64], mu: f64, n: usize) -> SubcarrierTable {
        let cap = self.level_cap();
        let users = self.order.users(n);
        let rates = &self.rates[n];
        let step = self.grid.step();
        run_stage1(
            users.len(),
            self.inst.max_multiplexed,
            cap,
            self.grid.levels(),
            cap + 1,
            |pos, c, m_prev, l| {
                let k = users[pos];
                let interfering = l - c - m_prev;
                weights[k] * rates[pos][c * (cap + 1) + interfering]
                    - (multipliers[k] + mu) * (c - 1) as f64 * step
            },
        )
    }

    /// Solves the over-estimated subproblem at `(λ, μ)`.
    pub fn evaluate(&self, weights: &[f64], multipliers: &[f64], mu: f64) -> OverestimateSolution {
        let inst = self.inst;
        assert_eq!(weights.len(), inst.users(), "one weight per user");
        assert_eq!(multipliers.len(), inst.users(), "one multiplier per user");
        let cap = self.level_cap();
        let step = self.grid.step();
        let mut assignment = LevelAssignment::empty(inst.users(), inst.subcarriers());
        let mut value: f64 = multipliers
            .iter()
            .zip(&inst.user_power)
            .map(|(l, p)| l * p)
            .sum::<f64>()
            + mu * inst.total_power;
        let mut charged = 0.0;
        for n in 0..inst.subcarriers() {
            let table = self.table(weights, multipliers, mu, n);
            value += table.value(cap);
            for (pos, c) in table.solution_within(cap) {
                assignment.set(self.order.users(n)[pos], n, c);
                charged += (c - 1) as f64 * step;
            }
        }
        OverestimateSolution {
            value,
            slope: inst.total_power - charged,
            assignment,
        }
    }

    /// Minimizes the subproblem value over `μ ≥ 0` by bisection on the sign
    /// of its slope.
    pub fn bound(&self, weights: &[f64], multipliers: &[f64]) -> UpperBound {
        let mut evaluations = 0;
        let mut best = (f64::INFINITY, 0.0);
        let mut eval = |mu: f64, best: &mut (f64, f64)| {
            evaluations += 1;
            let s = self.evaluate(weights, multipliers, mu);
            if s.value < best.0 {
                *best = (s.value, mu);
            }
            s.slope
        };

        if eval(0.0, &mut best) >= 0.0 {
            return UpperBound {
                value: best.0,
                mu: 0.0,
                evaluations,
                at_bracket_edge: false,
            };
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut doublings = 0;
        while eval(hi, &mut best) < 0.0 {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings == MAX_DOUBLINGS {
                return UpperBound {
                    value: best.0,
                    mu: best.1,
                    evaluations,
                    at_bracket_edge: true,
                };
            }
        }
        let mut rounds = 0;
        while hi - lo >= BRACKET_RTOL * hi && rounds < MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if eval(mid, &mut best) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            rounds += 1;
        }
        UpperBound {
            value: best.0,
            mu: best.1,
            evaluations,
            at_bracket_edge: hi - lo >= BRACKET_RTOL * hi,
        }
    }
}

fn level_cap(inst: &ProblemInstance, grid: &PowerGrid) -> usize {
    grid.levels() + inst.max_multiplexed
}

/// `V_UB` at multipliers `λ` with the instance weights.
pub fn upper_bound(inst: &ProblemInstance, multipliers: &[f64]) -> UpperBound {
    OverestimateSolver::new(inst).bound(&inst.weights, multipliers)
}
