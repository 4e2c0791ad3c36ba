//! Subgradient dual loop over the discretized subproblem, with feasibility
//! repair and the certified upper bound.

mod bound;
mod repair;

pub use bound::{upper_bound, OverestimateSolution, OverestimateSolver, UpperBound};
pub use repair::repair;

use crate::dp::DpSolver;
use crate::instance::ProblemInstance;
use crate::rate::{wsr_with_weights, PowerAllocation};

#[derive(Debug, Clone, PartialEq)]
pub struct LddpParams {
    /// Stop once consecutive dual values differ by at most this much.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Initial `θ` of the step rule `θ |d - V_LB| / ‖g‖²`.
    pub initial_step_scale: f64,
    /// Dual iterations without a new best dual before `θ` is halved.
    pub stall_limit: usize,
    /// Whether to compute `V_UB` after the loop.
    pub upper_bound: bool,
}

impl Default for LddpParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_iterations: 200,
            initial_step_scale: 1.0,
            stall_limit: 5,
            upper_bound: true,
        }
    }
}

/// Mutable state of the dual loop.
#[derive(Debug, Clone)]
pub struct DualState {
    pub multipliers: Vec<f64>,
    pub iteration: usize,
    pub best_lower: f64,
    pub best_allocation: PowerAllocation,
    /// Smallest dual value seen and its multipliers.
    pub best_dual: f64,
    pub best_dual_multipliers: Vec<f64>,
    pub previous_dual: Option<f64>,
    pub step_scale: f64,
    pub stall: usize,
}

impl DualState {
    fn new(inst: &ProblemInstance, params: &LddpParams) -> Self {
        let users = inst.users();
        Self {
            multipliers: vec![0.0; users],
            iteration: 0,
            best_lower: 0.0,
            best_allocation: PowerAllocation::zeros(users, inst.subcarriers()),
            best_dual: f64::INFINITY,
            best_dual_multipliers: vec![0.0; users],
            previous_dual: None,
            step_scale: params.initial_step_scale,
            stall: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub dual_value: f64,
    /// Utility of this iteration's repaired allocation.
    pub candidate: f64,
    /// Best `V_LB` so far.
    pub lower_bound: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `V_LB`: utility of `allocation`.
    pub lower_bound: f64,
    pub upper_bound: Option<UpperBound>,
    /// Best feasible allocation found.
    pub allocation: PowerAllocation,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// Multipliers after the last update.
    pub multipliers: Vec<f64>,
    /// Smallest dual value seen.
    pub best_dual: f64,
    pub best_dual_multipliers: Vec<f64>,
}

impl SolveReport {
    /// `(V_UB - V_LB) / V_UB`, when the bound was computed and is positive.
    pub fn relative_gap(&self) -> Option<f64> {
        let ub = self.upper_bound.as_ref()?.value;
        (ub > 0.0).then(|| (ub - self.lower_bound) / ub)
    }
}

/// Solver bound to one instance; the rate tables are built once and shared
/// by every weight vector solved.
#[derive(Debug, Clone)]
pub struct Lddp<'a> {
    inst: &'a ProblemInstance,
    dp: DpSolver<'a>,
    params: LddpParams,
}

impl<'a> Lddp<'a> {
    pub fn new(inst: &'a ProblemInstance, params: LddpParams) -> Self {
        Self {
            inst,
            dp: DpSolver::new(inst),
            params,
        }
    }

    pub fn params(&self) -> &LddpParams {
        &self.params
    }

    pub fn solve(&self) -> SolveReport {
        self.solve_weighted(&self.inst.weights)
    }

    /// Runs the loop with `weights` in place of the instance weights.
    pub fn solve_weighted(&self, weights: &[f64]) -> SolveReport {
        let inst = self.inst;
        let params = &self.params;
        let order = self.dp.order();
        let mut state = DualState::new(inst, params);
        let mut trace = Vec::new();

        while state.iteration < params.max_iterations {
            state.iteration += 1;
            let sol = self.dp.solve_weighted(weights, &state.multipliers);
            let dual = sol.dual_value;
            let feasible = repair::repair_weighted(inst, weights, &sol.powers);
            let candidate = wsr_with_weights(inst, order, weights, &feasible);
            if candidate > state.best_lower {
                state.best_lower = candidate;
                state.best_allocation = feasible;
            }
            trace.push(IterationRecord {
                iteration: state.iteration,
                dual_value: dual,
                candidate,
                lower_bound: state.best_lower,
            });

            if dual < state.best_dual {
                state.best_dual = dual;
                state.best_dual_multipliers.clone_from(&state.multipliers);
                state.stall = 0;
            } else {
                state.stall += 1;
                if state.stall >= params.stall_limit {
                    state.step_scale *= 0.5;
                    state.stall = 0;
                }
            }
            let converged = state
                .previous_dual
                .is_some_and(|prev| (prev - dual).abs() <= params.epsilon);
            state.previous_dual = Some(dual);
            if converged {
                break;
            }

            // projected subgradient: components that would push a zero
            // multiplier negative are dropped
            let direction: Vec<f64> = (0..inst.users())
                .map(|k| {
                    let g = inst.user_power[k] - sol.powers.user_total(k);
                    if state.multipliers[k] <= 0.0 && g > 0.0 {
                        0.0
                    } else {
                        g
                    }
                })
                .collect();
            let norm2: f64 = direction.iter().map(|g| g * g).sum();
            if norm2 == 0.0 {
                break;
            }
            let step = state.step_scale * (dual - state.best_lower).abs() / norm2;
            if step == 0.0 {
                break;
            }
            for (l, g) in state.multipliers.iter_mut().zip(&direction) {
                *l = (*l - step * g).max(0.0);
            }
        }

        let upper_bound = params.upper_bound.then(|| {
            OverestimateSolver::with_order(inst, order.clone(), *self.dp.grid())
                .bound(weights, &state.best_dual_multipliers)
        });
        SolveReport {
            lower_bound: state.best_lower,
            upper_bound,
            allocation: state.best_allocation,
            iterations: state.iteration,
            trace,
            multipliers: state.multipliers,
            best_dual: state.best_dual,
            best_dual_multipliers: state.best_dual_multipliers,
        }
    }
}

pub fn solve(inst: &ProblemInstance, params: &LddpParams) -> SolveReport {
    Lddp::new(inst, params.clone()).solve()
}
