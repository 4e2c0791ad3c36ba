//! Exact sum-rate power allocation on a single carrier.
//!
//! With gains sorted from strongest to weakest, every partial derivative of the
//! sum rate is positive and they are ordered the same way as the gains, so the
//! optimum fills users greedily in gain order, each up to its own limit, until
//! the budget or the multiplexing cap runs out.

use thiserror::Error;

use crate::rate::sic_rate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScError {
    #[error("no users")]
    Empty,
    #[error("gains must be sorted in descending order (position {0} breaks it)")]
    NotSorted(usize),
    #[error("{0} per-user limits for {1} users")]
    Shape(usize, usize),
    #[error("multiplexing limit must be at least 1")]
    NoMultiplexing,
}

/// Single-carrier sum-rate powers for `gains_desc`: the strongest users in
/// turn take `min(P_k, remaining budget)`, at most `M` of them.
///
/// Optimal when every user shares one limit or when `M = K`. With unequal
/// limits and a binding `M`, skipping a user in favour of a weaker one with a
/// larger limit can do better.
///
/// Returns one power per user, aligned with `gains_desc`.
pub fn solve_sc_sr(
    gains_desc: &[f64],
    total_power: f64,
    user_power: &[f64],
    max_multiplexed: usize,
) -> Result<Vec<f64>, ScError> {
    if gains_desc.is_empty() {
        return Err(ScError::Empty);
    }
    if user_power.len() != gains_desc.len() {
        return Err(ScError::Shape(user_power.len(), gains_desc.len()));
    }
    if max_multiplexed == 0 {
        return Err(ScError::NoMultiplexing);
    }
    if let Some(i) = gains_desc.windows(2).position(|w| w[0] < w[1]) {
        return Err(ScError::NotSorted(i + 1));
    }
    let mut powers = vec![0.0; gains_desc.len()];
    let mut remaining = total_power;
    for (p, &limit) in powers.iter_mut().zip(user_power).take(max_multiplexed) {
        *p = limit.min(remaining);
        remaining -= *p;
        if remaining <= 0.0 {
            break;
        }
    }
    Ok(powers)
}

/// Sum rate of one carrier; `gains_desc` and `powers` are aligned and sorted
/// strongest first.
pub fn sc_sum_rate(gains_desc: &[f64], powers: &[f64], noise: f64) -> f64 {
    let mut interference = 0.0;
    let mut total = 0.0;
    for (&g, &p) in gains_desc.iter().zip(powers) {
        total += sic_rate(p, interference, g, noise);
        interference += p;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplexing_cap_leaves_budget_unused() {
        let p = solve_sc_sr(&[3.0, 2.0, 1.0], 1.0, &[0.2; 3], 2).unwrap();
        assert_eq!(p, vec![0.2, 0.2, 0.0]);
    }

    #[test]
    fn budget_binds_second_user() {
        let p = solve_sc_sr(&[2.0, 1.0], 0.3, &[0.2; 2], 2).unwrap();
        assert_eq!(p[0], 0.2);
        assert!((p[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn relaxed_user_limits_give_everything_to_the_best_user() {
        let p = solve_sc_sr(&[5.0, 4.0, 1.0], 0.7, &[0.7; 3], 3).unwrap();
        assert_eq!(p, vec![0.7, 0.0, 0.0]);
    }

    #[test]
    fn input_errors() {
        assert_eq!(solve_sc_sr(&[], 1.0, &[], 1), Err(ScError::Empty));
        assert_eq!(solve_sc_sr(&[1.0, 2.0], 1.0, &[0.2; 2], 2), Err(ScError::NotSorted(1)));
        assert_eq!(solve_sc_sr(&[1.0], 1.0, &[0.2; 2], 1), Err(ScError::Shape(2, 1)));
    }

    // finite-difference check of the gradient ordering behind the greedy fill
    #[test]
    fn partial_derivatives_follow_gain_order() {
        let gains = [4e-8, 2.5e-8, 1e-8, 3e-9];
        let eta = 1e-10;
        let points = [
            [0.05, 0.1, 0.2, 0.15],
            [0.2, 0.01, 0.3, 0.02],
            [0.001, 0.3, 0.001, 0.4],
        ];
        let h = 1e-7;
        for p in points {
            let grad: Vec<f64> = (0..4)
                .map(|k| {
                    let mut up = p;
                    let mut dn = p;
                    up[k] += h;
                    dn[k] -= h;
                    (sc_sum_rate(&gains, &up, eta) - sc_sum_rate(&gains, &dn, eta)) / (2.0 * h)
                })
                .collect();
            for w in grad.windows(2) {
                assert!(w[0] >= w[1] * (1.0 - 1e-4), "{grad:?}");
            }
            assert!(grad[3] > 0.0);
        }
    }

    #[test]
    fn prefix_fill_is_not_optimal_for_unequal_limits_under_binding_m() {
        // a weaker user with a larger limit spends more of the budget
        let gains = [4e-8, 2e-8, 1e-8];
        let caps = [0.1, 0.1, 0.5];
        let p = solve_sc_sr(&gains, 1.0, &caps, 2).unwrap();
        assert_eq!(p, vec![0.1, 0.1, 0.0]);
        let skip = sc_sum_rate(&gains, &[0.1, 0.0, 0.5], 1e-10);
        assert!(skip > sc_sum_rate(&gains, &p, 1e-10));
    }
}
