//! Exact two-stage dynamic program for the discretized Lagrangian subproblem.
//!
//! Stage 1 works on one subcarrier. Users are visited in SIC order (strongest
//! first) and the state is `(users seen, users powered, levels used)`. Every
//! user already powered sits earlier in the order than the one being added, so
//! the newcomer's interference is exactly the levels used so far; that is what
//! makes the recursion exact. The table entry is `-inf` for unreachable states.
//!
//! Stage 2 splits the budget across subcarriers with a knapsack over the
//! per-subcarrier envelopes `V[n][j]` (best value using at most `j` levels).
//!
//! The constant `sum_k lambda_k P_k` of the Lagrangian is kept out of both
//! stages and added to the final value only.

use crate::instance::{sic_order, ProblemInstance, SicOrder};
use crate::rate::{sic_rate, LevelAssignment, PowerAllocation, PowerGrid};

/// Stage-1 table of one subcarrier.
#[derive(Debug, Clone)]
pub struct SubcarrierTable {
    users: usize,
    max_users: usize,
    max_total: usize,
    /// `exact[(i, m, l)]`: best value over the first `i` positions with exactly
    /// `m` users powered and exactly `l` levels spent.
    exact: Vec<f64>,
    /// Level given to position `i - 1` in the optimum of state `(i, m, l)`.
    choice: Vec<u16>,
    /// `envelope[j]`: best value using at most `j` levels, the empty
    /// allocation included.
    envelope: Vec<f64>,
    /// `(m, l)` attaining `envelope[j]`.
    envelope_state: Vec<(usize, usize)>,
}

impl SubcarrierTable {
    #[inline]
    fn idx(&self, i: usize, m: usize, l: usize) -> usize {
        (i * (self.max_users + 1) + m) * (self.max_total + 1) + l
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn max_users(&self) -> usize {
        self.max_users
    }

    /// Largest level total tracked.
    pub fn max_total(&self) -> usize {
        self.max_total
    }

    /// `T` entry: first `i` users in SIC order, exactly `m` powered, exactly
    /// `l` levels. `-inf` when unreachable.
    pub fn exact(&self, i: usize, m: usize, l: usize) -> f64 {
        self.exact[self.idx(i, m, l)]
    }

    /// `V[n][j]`.
    pub fn value(&self, j: usize) -> f64 {
        self.envelope[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.envelope
    }

    /// Best value over the first `i` users with at most `j` levels, any
    /// number of powered users.
    pub fn best_within(&self, i: usize, j: usize) -> f64 {
        let mut best = 0.0f64;
        for m in 0..=self.max_users.min(i) {
            for l in 0..=j.min(self.max_total) {
                best = best.max(self.exact(i, m, l));
            }
        }
        best
    }

    /// `(position, level)` pairs of the optimum behind state `(i, m, l)`.
    pub fn backtrack(&self, i: usize, m: usize, l: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(m);
        let (mut m, mut l) = (m, l);
        for layer in (1..=i).rev() {
            let c = self.choice[self.idx(layer, m, l)] as usize;
            if c > 0 {
                out.push((layer - 1, c));
                m -= 1;
                l -= c;
            }
        }
        debug_assert_eq!((m, l), (0, 0));
        out.reverse();
        out
    }

    /// Powered `(position, level)` pairs of the envelope optimum at budget `j`.
    pub fn solution_within(&self, j: usize) -> Vec<(usize, usize)> {
        let (m, l) = self.envelope_state[j];
        self.backtrack(self.users, m, l)
    }
}

/// Runs the stage-1 recursion.
///
/// `value(pos, own, m_prev, l_total)` is the contribution of the user at
/// SIC position `pos` taking `own` levels when `m_prev` earlier users are
/// powered and the subcarrier total becomes `l_total` levels.
pub(crate) fn run_stage1<F>(
    users: usize,
    max_users: usize,
    max_total: usize,
    max_own: usize,
    envelope_len: usize,
    mut value: F,
) -> SubcarrierTable
where
    F: FnMut(usize, usize, usize, usize) -> f64,
{
    let width = max_total + 1;
    let layer = (max_users + 1) * width;
    let mut exact = vec![f64::NEG_INFINITY; (users + 1) * layer];
    let mut choice = vec![0u16; (users + 1) * layer];
    exact[0] = 0.0;

    for i in 1..=users {
        let pos = i - 1;
        let (done, rest) = exact.split_at_mut(i * layer);
        let prev = &done[(i - 1) * layer..];
        let cur = &mut rest[..layer];
        let cur_choice = &mut choice[i * layer..(i + 1) * layer];
        for m in 0..=max_users.min(i) {
            let row_prev = &prev[m * width..(m + 1) * width];
            cur[m * width..(m + 1) * width].copy_from_slice(row_prev);
            if m == 0 {
                continue;
            }
            let below = &prev[(m - 1) * width..m * width];
            for l in m..=max_total {
                let mut best = cur[m * width + l];
                let mut arg = 0u16;
                // with nobody powered yet only zero levels are spent, so the
                // newcomer must take all `l`
                let first = if m == 1 { l } else { 1 };
                for c in first..=l.min(max_own) {
                    let base = below[l - c];
                    if base == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = base + value(pos, c, m - 1, l);
                    if cand > best {
                        best = cand;
                        arg = c as u16;
                    }
                }
                cur[m * width + l] = best;
                cur_choice[m * width + l] = arg;
            }
        }
    }

    // envelope over the last layer: ties go to fewer users, then fewer levels
    let last = &exact[users * layer..];
    let mut envelope = Vec::with_capacity(envelope_len);
    let mut envelope_state = Vec::with_capacity(envelope_len);
    let mut best = (0.0, 0usize, 0usize);
    for j in 0..envelope_len {
        if j <= max_total {
            for m in 0..=max_users.min(users) {
                let v = last[m * width + j];
                if v > best.0 || (v == best.0 && (m, j) < (best.1, best.2)) {
                    best = (v, m, j);
                }
            }
        }
        envelope.push(best.0);
        envelope_state.push((best.1, best.2));
    }

    SubcarrierTable {
        users,
        max_users,
        max_total,
        exact,
        choice,
        envelope,
        envelope_state,
    }
}

/// `rates[l * (J + 1) + c]` for the user at one SIC position: own level `c`,
/// `l - c` interfering levels, `1 <= c <= l <= J`.
fn rate_rows(inst: &ProblemInstance, order: &SicOrder, grid: &PowerGrid, n: usize) -> Vec<Vec<f64>> {
    let levels = grid.levels();
    let width = levels + 1;
    order
        .users(n)
        .iter()
        .map(|&k| {
            let g = inst.gains[k][n];
            let mut row = vec![0.0; width * width];
            for l in 1..=levels {
                for c in 1..=l {
                    row[l * width + c] = sic_rate(grid.power(c), grid.power(l - c), g, inst.noise);
                }
            }
            row
        })
        .collect()
}

fn stage1_with_rates(
    inst: &ProblemInstance,
    order: &SicOrder,
    grid: &PowerGrid,
    rates: &[Vec<f64>],
    weights: &[f64],
    multipliers: &[f64],
    n: usize,
) -> SubcarrierTable {
    let levels = grid.levels();
    let width = levels + 1;
    let users = order.users(n);
    let step = grid.step();
    run_stage1(
        users.len(),
        inst.max_multiplexed,
        levels,
        levels,
        levels + 1,
        |pos, c, _m_prev, l| {
            let k = users[pos];
            weights[k] * rates[pos][l * width + c] - multipliers[k] * step * c as f64
        },
    )
}

/// Stage 1 for subcarrier `n`: table and envelope `V[n][0..=J]`.
pub fn stage1(
    inst: &ProblemInstance,
    order: &SicOrder,
    grid: &PowerGrid,
    multipliers: &[f64],
    n: usize,
) -> SubcarrierTable {
    let rates = rate_rows(inst, order, grid, n);
    stage1_with_rates(inst, order, grid, &rates, &inst.weights, multipliers, n)
}

/// Stage-2 knapsack table.
#[derive(Debug, Clone)]
pub struct BudgetTable {
    subcarriers: usize,
    levels: usize,
    /// `table[n * (J + 1) + j]`: best over the first `n` subcarriers with at
    /// most `j` levels in total. Row 0 is all zeros.
    table: Vec<f64>,
    /// Levels granted to subcarrier `n - 1` in the optimum of `(n, j)`.
    choice: Vec<u16>,
}

impl BudgetTable {
    pub fn value(&self, n: usize, j: usize) -> f64 {
        self.table[n * (self.levels + 1) + j]
    }

    /// `max_{n, j}` of the table, which is the full-budget corner.
    pub fn best(&self) -> f64 {
        self.value(self.subcarriers, self.levels)
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Budget in levels granted to each subcarrier by the optimum at `(n, j)`.
    pub fn split(&self, n: usize, j: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        let mut j = j;
        for s in (1..=n).rev() {
            let c = self.choice[s * (self.levels + 1) + j] as usize;
            out[s - 1] = c;
            j -= c;
        }
        out
    }
}

/// Stage 2 over envelopes `values[n][0..=J]`.
pub fn stage2(values: &[Vec<f64>], levels: usize) -> BudgetTable {
    let subcarriers = values.len();
    let width = levels + 1;
    let mut table = vec![0.0; (subcarriers + 1) * width];
    let mut choice = vec![0u16; (subcarriers + 1) * width];
    for n in 1..=subcarriers {
        let v = &values[n - 1];
        for j in 0..=levels {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for c in 0..=j {
                let cand = v[c] + table[(n - 1) * width + j - c];
                if cand > best {
                    best = cand;
                    arg = c;
                }
            }
            table[n * width + j] = best;
            choice[n * width + j] = arg as u16;
        }
    }
    BudgetTable {
        subcarriers,
        levels,
        table,
        choice,
    }
}

#[derive(Debug, Clone)]
pub struct DpTables {
    pub stage1: Vec<SubcarrierTable>,
    pub stage2: BudgetTable,
}

/// Optimum of the discretized Lagrangian subproblem for one multiplier vector.
#[derive(Debug, Clone)]
pub struct LrdSolution {
    /// `z_D(lambda)`, constant term included.
    pub dual_value: f64,
    /// `sum_k lambda_k P_k`.
    pub constant: f64,
    pub assignment: LevelAssignment,
    pub powers: PowerAllocation,
    pub tables: DpTables,
}

impl LrdSolution {
    /// Penalized utility of the assignment, i.e. `dual_value - constant`.
    pub fn penalized_value(&self) -> f64 {
        self.dual_value - self.constant
    }
}

/// Reusable solver: caches the SIC order and the level-rate tables of an
/// instance, which do not depend on weights or multipliers.
#[derive(Debug, Clone)]
pub struct DpSolver<'a> {
    inst: &'a ProblemInstance,
    order: SicOrder,
    grid: PowerGrid,
    rates: Vec<Vec<Vec<f64>>>,
}

impl<'a> DpSolver<'a> {
    pub fn new(inst: &'a ProblemInstance) -> Self {
        Self::with_order(inst, sic_order(inst), PowerGrid::for_instance(inst))
    }

    pub fn with_order(inst: &'a ProblemInstance, order: SicOrder, grid: PowerGrid) -> Self {
        let rates = (0..inst.subcarriers())
            .map(|n| rate_rows(inst, &order, &grid, n))
            .collect();
        Self {
            inst,
            order,
            grid,
            rates,
        }
    }

    pub fn order(&self) -> &SicOrder {
        &self.order
    }

    pub fn grid(&self) -> &PowerGrid {
        &self.grid
    }

    /// Solves with the instance weights.
    pub fn solve(&self, multipliers: &[f64]) -> LrdSolution {
        self.solve_weighted(&self.inst.weights, multipliers)
    }

    /// Solves with `weights` in place of the instance weights.
    pub fn solve_weighted(&self, weights: &[f64], multipliers: &[f64]) -> LrdSolution {
        let inst = self.inst;
        assert_eq!(multipliers.len(), inst.users(), "one multiplier per user");
        assert_eq!(weights.len(), inst.users(), "one weight per user");
        debug_assert!(multipliers.iter().all(|&l| l >= 0.0));
        let levels = self.grid.levels();
        let stage1: Vec<SubcarrierTable> = (0..inst.subcarriers())
            .map(|n| {
                stage1_with_rates(inst, &self.order, &self.grid, &self.rates[n], weights, multipliers, n)
            })
            .collect();
        let envelopes: Vec<Vec<f64>> = stage1.iter().map(|t| t.values().to_vec()).collect();
        let budget = stage2(&envelopes, levels);

        let mut assignment = LevelAssignment::empty(inst.users(), inst.subcarriers());
        for (n, &j) in budget.split(inst.subcarriers(), levels).iter().enumerate() {
            for (pos, level) in stage1[n].solution_within(j) {
                assignment.set(self.order.users(n)[pos], n, level);
            }
        }
        let constant: f64 = multipliers
            .iter()
            .zip(&inst.user_power)
            .map(|(l, p)| l * p)
            .sum();
        LrdSolution {
            dual_value: budget.best() + constant,
            constant,
            powers: assignment.to_powers(&self.grid),
            assignment,
            tables: DpTables {
                stage1,
                stage2: budget,
            },
        }
    }
}

/// Exact optimum of the discretized Lagrangian subproblem at `multipliers`.
pub fn solve_lr_d(
    inst: &ProblemInstance,
    order: &SicOrder,
    grid: &PowerGrid,
    multipliers: &[f64],
) -> LrdSolution {
    DpSolver::with_order(inst, order.clone(), *grid).solve(multipliers)
}
