use crate::instance::ProblemInstance;
use crate::rate::{PowerAllocation, FEASIBILITY_RTOL};

/// Turns a subproblem optimum that may break per-user limits into a feasible
/// allocation, weighting recipients by the instance weights.
///
/// 1. Users within their limit keep their powers.
/// 2. Each violating user keeps its subcarriers in ascending order of its own
///    power (ties by subcarrier index) until its limit is reached; the last
///    one kept is cut short and the rest are dropped.
/// 3. Non-violating users that had power get more, one `(user, subcarrier)`
///    at a time in descending `w_k g_kn`, each raised as far as its own limit
///    and the total budget allow. A user is never added to a subcarrier
///    that already holds `M` users.
///
/// An allocation without violators is returned unchanged.
pub fn repair(inst: &ProblemInstance, p_star: &PowerAllocation) -> PowerAllocation {
    repair_weighted(inst, &inst.weights, p_star)
}

pub(crate) fn repair_weighted(
    inst: &ProblemInstance,
    weights: &[f64],
    p_star: &PowerAllocation,
) -> PowerAllocation {
    let users = inst.users();
    let subcarriers = inst.subcarriers();
    let violating: Vec<bool> = (0..users)
        .map(|k| p_star.user_total(k) > inst.user_power[k] * (1.0 + FEASIBILITY_RTOL))
        .collect();
    if !violating.iter().any(|&v| v) {
        return p_star.clone();
    }

    let mut p = p_star.clone();
    for k in (0..users).filter(|&k| violating[k]) {
        let mut cells: Vec<usize> = (0..subcarriers).filter(|&n| p.get(k, n) > 0.0).collect();
        cells.sort_by(|&a, &b| p.get(k, a).total_cmp(&p.get(k, b)).then(a.cmp(&b)));
        let mut budget = inst.user_power[k];
        for n in cells {
            let keep = p.get(k, n).min(budget);
            p.set(k, n, keep);
            budget -= keep;
        }
    }

    let recipients: Vec<usize> = (0..users)
        .filter(|&k| !violating[k] && p_star.user_total(k) > 0.0)
        .collect();
    let mut candidates: Vec<(usize, usize)> = recipients
        .iter()
        .flat_map(|&k| (0..subcarriers).map(move |n| (k, n)))
        .collect();
    // stable: ties keep (user, subcarrier) order
    candidates.sort_by(|&(a, m), &(b, n)| {
        (weights[b] * inst.gains[b][n]).total_cmp(&(weights[a] * inst.gains[a][m]))
    });

    let mut active: Vec<usize> = (0..subcarriers).map(|n| p.users_on(n).len()).collect();
    let mut spent: Vec<f64> = (0..users).map(|k| p.user_total(k)).collect();
    let mut total = p.total();
    for (k, n) in candidates {
        let room_total = inst.total_power - total;
        if room_total <= 0.0 {
            break;
        }
        let room_user = inst.user_power[k] - spent[k];
        if room_user <= 0.0 {
            continue;
        }
        let current = p.get(k, n);
        if current == 0.0 && active[n] >= inst.max_multiplexed {
            continue;
        }
        let add = room_user.min(room_total);
        if current == 0.0 {
            active[n] += 1;
        }
        p.set(k, n, current + add);
        spent[k] += add;
        total += add;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(gains: Vec<Vec<f64>>, m: usize) -> ProblemInstance {
        let k = gains.len();
        ProblemInstance::new(gains, 1.0, vec![0.2; k], m, 1e-10, 10).unwrap()
    }

    fn alloc(rows: Vec<Vec<f64>>) -> PowerAllocation {
        PowerAllocation::from_rows(rows).unwrap()
    }

    #[test]
    fn feasible_input_is_untouched() {
        let i = inst(vec![vec![1e-8, 2e-8], vec![3e-8, 1e-8]], 2);
        let p = alloc(vec![vec![0.1, 0.05], vec![0.0, 0.2]]);
        assert_eq!(repair(&i, &p), p);
    }

    // hand trace: user 0 holds (0.15, 0.10) against a 0.2 W limit. Ascending
    // order keeps subcarrier 1 (0.10) in full and 0.10 of subcarrier 0.
    // User 1 is the only recipient; its best cell is subcarrier 0
    // (w g = 3e-8), raised by its remaining 0.15 W. Subcarrier 1 then has
    // no room left for user 1.
    #[test]
    fn three_step_trace() {
        let i = inst(vec![vec![1e-8, 1e-8], vec![3e-8, 1e-8]], 2);
        let p = alloc(vec![vec![0.15, 0.10], vec![0.0, 0.05]]);
        let f = repair(&i, &p);
        assert!((f.get(0, 0) - 0.10).abs() < 1e-15);
        assert!((f.get(0, 1) - 0.10).abs() < 1e-15);
        assert!((f.get(1, 0) - 0.15).abs() < 1e-15);
        assert!((f.get(1, 1) - 0.05).abs() < 1e-15);
        assert!(f.is_feasible(&i));
    }

    #[test]
    fn lone_violator_is_truncated() {
        let i = inst(vec![vec![1e-8, 1e-8]], 1);
        let p = alloc(vec![vec![0.15, 0.10]]);
        let f = repair(&i, &p);
        assert!((f.get(0, 0) - 0.10).abs() < 1e-15);
        assert!((f.get(0, 1) - 0.10).abs() < 1e-15);
    }

    #[test]
    fn all_violating_leaves_power_unused() {
        let i = inst(vec![vec![1e-8, 1e-8], vec![2e-8, 2e-8]], 2);
        let p = alloc(vec![vec![0.2, 0.1], vec![0.3, 0.4]]);
        let f = repair(&i, &p);
        assert!((f.user_total(0) - 0.2).abs() < 1e-12);
        assert!((f.user_total(1) - 0.2).abs() < 1e-12);
        assert!(f.total() <= 1.0);
        assert!(f.is_feasible(&i));
    }

    #[test]
    fn full_subcarrier_takes_no_newcomer() {
        // M = 1: user 1 may only grow where it already transmits
        let i = inst(vec![vec![1e-8, 1e-9], vec![5e-8, 4e-8]], 1);
        let p = alloc(vec![vec![0.5, 0.0], vec![0.0, 0.1]]);
        let f = repair(&i, &p);
        assert_eq!(f.get(1, 0), 0.0);
        assert!((f.get(1, 1) - 0.2).abs() < 1e-15);
        assert!(f.is_feasible(&i));
    }
}
