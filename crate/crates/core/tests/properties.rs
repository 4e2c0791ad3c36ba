use noma_lddp::baselines::{noma_ftpc, ofdma_ftpc};
use noma_lddp::dp::DpSolver;
use noma_lddp::instance::{
    generate_instance, parse_instance, render_instance, sic_order, ChannelModelConfig, InstanceShape, ProblemInstance,
};
use noma_lddp::lddp::{repair, Lddp, LddpParams, OverestimateSolver};
use noma_lddp::oracle::{brute_force_discrete, brute_force_overestimate, Objective};
use noma_lddp::rate::{
    discrete_utility, rate_discrete, rate_overestimate, sic_rate, wsr_utility, LevelAssignment, PowerGrid,
};
use noma_lddp::sc::{sc_sum_rate, solve_sc_sr};
use noma_lddp::scheduler::{jain_index, moving_average, run_schedule, ScheduleParams};
use noma_lddp::scheme::Scheme;
use noma_lddp::verify::random_instance;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOISE: f64 = 1e-10;

fn seeded(seed: u64, users: usize, subcarriers: usize, multiplexed: usize, levels: usize) -> ProblemInstance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), users, subcarriers, multiplexed, levels)
}

fn gain() -> impl Strategy<Value = f64> {
    (-9.0f64..-7.0).prop_map(|e| 10f64.powf(e))
}

fn descending(gains: Vec<f64>) -> Vec<f64> {
    let mut g = gains;
    g.sort_by(|a, b| b.total_cmp(a));
    g
}

fn close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sic_order_sorts_by_gain_then_index(seed in any::<u64>(), tie in any::<bool>()) {
        let mut inst = seeded(seed, 6, 3, 2, 4);
        if tie && inst.users() > 2 {
            inst.gains[2][0] = inst.gains[0][0];
        }
        let order = sic_order(&inst);
        for n in 0..inst.subcarriers() {
            let users = order.users(n);
            let mut expected: Vec<usize> = (0..inst.users()).collect();
            expected.sort_by(|&a, &b| inst.gains[b][n].total_cmp(&inst.gains[a][n]).then(a.cmp(&b)));
            prop_assert_eq!(users, expected.as_slice());
            for (pos, &k) in users.iter().enumerate() {
                prop_assert_eq!(order.position(k, n), pos);
            }
        }
    }

    #[test]
    fn rates_are_monotone(g in gain(), p in 0.0f64..1.0, i in 0.0f64..1.0, d in 0.0f64..0.5) {
        let r = sic_rate(p, i, g, NOISE);
        prop_assert!(r.is_finite() && r >= 0.0);
        prop_assert!(sic_rate(p + d, i, g, NOISE) >= r);
        prop_assert!(sic_rate(p, i + d, g, NOISE) <= r);
    }

    #[test]
    fn subcarrier_sum_rate_telescopes(
        gains in prop::collection::vec(gain(), 1..6),
        powers in prop::collection::vec(0.0f64..0.5, 6),
    ) {
        let gains = descending(gains);
        let powers = &powers[..gains.len()];
        let direct = sc_sum_rate(&gains, powers, NOISE);
        // Σ_i ln(S_i g_i + η) - ln(S_{i-1} g_i + η) over cumulative powers S_i
        let mut cumulative = 0.0;
        let mut closed = 0.0;
        for (&g, &p) in gains.iter().zip(powers) {
            closed += ((cumulative + p) * g + NOISE).ln() - (cumulative * g + NOISE).ln();
            cumulative += p;
        }
        prop_assert!((direct - closed).abs() <= 1e-12 * direct.abs().max(1e-300), "{} vs {}", direct, closed);
    }

    #[test]
    fn overestimate_dominates_discrete_rate(seed in any::<u64>()) {
        let inst = seeded(seed, 5, 3, 3, 12);
        let order = sic_order(&inst);
        let grid = PowerGrid::for_instance(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let levels = (0..inst.users())
            .map(|_| (0..inst.subcarriers()).map(|_| rng.random_range(0..=inst.levels)).collect())
            .collect();
        let x = LevelAssignment::from_levels(levels);
        for k in 0..inst.users() {
            for n in 0..inst.subcarriers() {
                let j = x.level(k, n);
                if j > 0 {
                    let r = rate_discrete(&inst, &order, &grid, &x, k, n, j).unwrap();
                    let over = rate_overestimate(&inst, &order, &grid, &x, k, n, j).unwrap();
                    prop_assert!(over >= r);
                }
            }
        }
    }

    #[test]
    fn overestimate_gap_shrinks_with_the_step(g in gain(), p in 0.05f64..0.5, i in 0.0f64..0.5) {
        // own power p + δ, interference i - δ: the gap is first order in δ
        let r = sic_rate(p, i, g, NOISE);
        let mut previous = f64::INFINITY;
        for delta in [1e-2, 1e-3, 1e-4] {
            let over = sic_rate(p + delta, (i - delta).max(0.0), g, NOISE);
            let gap = over - r;
            prop_assert!(gap >= 0.0);
            prop_assert!(gap <= previous);
            let slope = g / (p * g + i * g + NOISE) + g * g * p / ((i * g + NOISE) * ((p + i) * g + NOISE));
            prop_assert!(gap <= 2.0 * slope * delta + 1e-12);
            previous = gap;
        }
    }

    #[test]
    fn single_carrier_output_is_a_prefix(
        gains in prop::collection::vec(gain(), 1..8),
        caps in prop::collection::vec(0.05f64..0.6, 8),
        total in 0.1f64..2.0,
        m in 1usize..8,
    ) {
        let gains = descending(gains);
        let caps = &caps[..gains.len()];
        let m = m.min(gains.len());
        let p = solve_sc_sr(&gains, total, caps, m).unwrap();
        let active = p.iter().take_while(|&&x| x > 0.0).count();
        prop_assert!(active <= m);
        prop_assert!(p[active..].iter().all(|&x| x == 0.0));
        prop_assert!(p.iter().zip(caps).all(|(x, c)| x <= c));
        prop_assert!(p.iter().sum::<f64>() <= total * (1.0 + 1e-12));
    }

    #[test]
    fn sum_rate_gradient_follows_gain_order(
        gains in prop::collection::vec(gain(), 2..5),
        powers in prop::collection::vec(0.01f64..0.5, 5),
    ) {
        let gains = descending(gains);
        let p = &powers[..gains.len()];
        let h = 1e-7;
        let grad: Vec<f64> = (0..gains.len())
            .map(|k| {
                let mut up = p.to_vec();
                up[k] += h;
                let mut down = p.to_vec();
                down[k] -= h;
                (sc_sum_rate(&gains, &up, NOISE) - sc_sum_rate(&gains, &down, NOISE)) / (2.0 * h)
            })
            .collect();
        for w in grad.windows(2) {
            prop_assert!(w[0] >= w[1] * (1.0 - 1e-4), "{:?}", grad);
        }
        prop_assert!(*grad.last().unwrap() > 0.0);
    }

    #[test]
    fn relaxed_limits_give_the_whole_budget_to_the_best_user(
        gains in prop::collection::vec(gain(), 1..6),
        total in 0.1f64..2.0,
        m in 1usize..6,
    ) {
        let gains = descending(gains);
        let users = gains.len();
        let p = solve_sc_sr(&gains, total, &vec![total; users], m.min(users)).unwrap();
        prop_assert_eq!(p[0], total);
        prop_assert!(p[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn format_round_trips_exactly(seed in any::<u64>()) {
        let inst = seeded(seed, 6, 4, 3, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..inst.users()).map(|_| rng.random_range(0.1..3.0)).collect();
        let inst = inst.with_weights(weights).unwrap();
        prop_assert_eq!(parse_instance(&render_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn generation_is_a_pure_function_of_seed(seed in any::<u64>()) {
        let cfg = ChannelModelConfig::default().with_seed(seed);
        let shape = InstanceShape { users: 5, subcarriers: 3, max_multiplexed: 2, levels: 10 };
        let a = generate_instance(&cfg, shape, 1.0, &[0.2; 5]).unwrap();
        let b = generate_instance(&cfg, shape, 1.0, &[0.2; 5]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn jain_index_is_bounded(values in prop::collection::vec(0.0f64..1e7, 1..30)) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let j = jain_index(&values).unwrap();
        let lower = 1.0 / values.len() as f64;
        prop_assert!(j >= lower * (1.0 - 1e-12) && j <= 1.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_matches_penalized_oracle(seed in any::<u64>(), scale in 0.0f64..30.0) {
        let inst = seeded(seed, 3, 2, 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let lambda: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..scale.max(1e-9))).collect();
        let dp = DpSolver::new(&inst).solve(&lambda);
        let grid = PowerGrid::for_instance(&inst);
        let oracle = brute_force_discrete(&inst, &grid, &Objective::Penalized(lambda)).unwrap();
        prop_assert!(close(dp.dual_value, oracle.value, 1e-9), "{} vs {}", dp.dual_value, oracle.value);
    }

    #[test]
    fn dp_solution_respects_structure(seed in any::<u64>()) {
        let inst = seeded(seed, 8, 4, 3, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..10.0)).collect();
        let sol = DpSolver::new(&inst).solve(&lambda);
        let x = &sol.assignment;
        prop_assert!(x.total_levels() <= inst.levels);
        for n in 0..inst.subcarriers() {
            prop_assert!(x.active_on(n) <= inst.max_multiplexed);
        }
        // the assignment realizes the reported value
        let order = sic_order(&inst);
        let grid = PowerGrid::for_instance(&inst);
        let penalty: f64 = (0..inst.users()).map(|k| lambda[k] * grid.power(x.user_levels(k))).sum();
        let realized = discrete_utility(&inst, &order, &grid, x) - penalty + sol.constant;
        prop_assert!(close(realized, sol.dual_value, 1e-9));
    }

    #[test]
    fn budget_table_has_optimal_substructure(seed in any::<u64>()) {
        let inst = seeded(seed, 3, 2, 2, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..10.0)).collect();
        let sol = DpSolver::new(&inst).solve(&lambda);
        let step = inst.total_power / inst.levels as f64;
        for n in 1..=inst.subcarriers() {
            for j in 1..=inst.levels {
                let gains = inst.gains.iter().map(|row| row[..n].to_vec()).collect();
                let sub = ProblemInstance::new(
                    gains, j as f64 * step, inst.user_power.clone(), inst.max_multiplexed, inst.noise, j,
                ).unwrap();
                let grid = PowerGrid::for_instance(&sub);
                let oracle = brute_force_discrete(&sub, &grid, &Objective::Penalized(lambda.clone())).unwrap();
                let constant: f64 = lambda.iter().zip(&inst.user_power).map(|(l, p)| l * p).sum();
                let stored = sol.tables.stage2.value(n, j);
                prop_assert!(close(stored, oracle.value - constant, 1e-9), "n={} j={}: {} vs {}", n, j, stored, oracle.value - constant);
            }
        }
    }

    #[test]
    fn dual_function_is_convex(seed in any::<u64>()) {
        let inst = seeded(seed, 6, 3, 2, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let solver = DpSolver::new(&inst);
        let a: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..20.0)).collect();
        let b: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..20.0)).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let (za, zb, zm) = (solver.solve(&a).dual_value, solver.solve(&b).dual_value, solver.solve(&mid).dual_value);
        prop_assert!(zm <= 0.5 * (za + zb) + 1e-9 * za.abs().max(zb.abs()).max(1.0));
    }

    #[test]
    fn bound_solver_matches_its_oracle(seed in any::<u64>(), mu in 0.0f64..40.0) {
        let inst = seeded(seed, 3, 2, 2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..20.0)).collect();
        let solver = OverestimateSolver::new(&inst);
        let got = solver.evaluate(&inst.weights, &lambda, mu).value;
        let grid = PowerGrid::for_instance(&inst);
        let oracle = brute_force_overestimate(&inst, &grid, &inst.weights, &lambda, mu, solver.level_cap()).unwrap();
        prop_assert!(close(got, oracle.value, 1e-9), "{} vs {}", got, oracle.value);
    }

    #[test]
    fn bound_dominates_discrete_optimum(seed in any::<u64>()) {
        let inst = seeded(seed, 3, 2, 2, 8);
        let params = LddpParams { max_iterations: 50, ..LddpParams::default() };
        let report = Lddp::new(&inst, params).solve();
        let ub = report.upper_bound.unwrap().value;
        let grid = PowerGrid::for_instance(&inst);
        let optimum = brute_force_discrete(&inst, &grid, &Objective::Utility).unwrap().value;
        let slack = 1e-9 * ub.abs().max(1.0);
        prop_assert!(ub + slack >= optimum, "{} < {}", ub, optimum);
        prop_assert!(ub + slack >= report.lower_bound);
        // baselines are feasible continuous allocations
        prop_assert!(ub + slack >= wsr_utility(&inst, &noma_ftpc(&inst)));
        prop_assert!(ub + slack >= wsr_utility(&inst, &ofdma_ftpc(&inst)));
    }

    #[test]
    fn oracle_beats_every_feasible_grid_point(seed in any::<u64>()) {
        let inst = seeded(seed, 3, 2, 2, 6);
        let grid = PowerGrid::for_instance(&inst);
        let order = sic_order(&inst);
        let optimum = brute_force_discrete(&inst, &grid, &Objective::Utility).unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let levels = (0..inst.users())
                .map(|_| (0..inst.subcarriers()).map(|_| rng.random_range(0..=inst.levels)).collect())
                .collect();
            let x = LevelAssignment::from_levels(levels);
            let p = x.to_powers(&grid);
            let within_m = (0..inst.subcarriers()).all(|n| x.active_on(n) <= inst.max_multiplexed);
            if within_m && x.total_levels() <= inst.levels && p.is_feasible(&inst) {
                prop_assert!(discrete_utility(&inst, &order, &grid, &x) <= optimum + 1e-12);
            }
        }
    }

    #[test]
    fn repair_always_yields_a_feasible_allocation(seed in any::<u64>(), scale in 0.0f64..5.0) {
        let inst = seeded(seed, 8, 4, 3, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = (0..inst.users()).map(|_| rng.random_range(0.0..scale.max(1e-9))).collect();
        let raw = DpSolver::new(&inst).solve(&lambda).powers;
        let fixed = repair(&inst, &raw);
        prop_assert!(fixed.is_feasible(&inst));
    }

    #[test]
    fn lower_bound_trace_never_decreases(seed in any::<u64>()) {
        let inst = seeded(seed, 6, 3, 2, 30);
        let params = LddpParams { max_iterations: 40, upper_bound: false, ..LddpParams::default() };
        let report = Lddp::new(&inst, params).solve();
        for w in report.trace.windows(2) {
            prop_assert!(w[1].lower_bound >= w[0].lower_bound);
        }
        prop_assert!(report.allocation.is_feasible(&inst));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn schedule_traces_keep_their_invariants(seed in any::<u64>(), orthogonal in any::<bool>()) {
        let params = ScheduleParams {
            users: 6,
            subcarriers: 2,
            ofdma_subcarriers: 6,
            levels: 20,
            slots: 25,
            window: 8,
            frame_length: 5,
            ..ScheduleParams::default()
        };
        let scheme = if orthogonal { Scheme::OfdmaFtpc } else { Scheme::NomaFtpc };
        let trace = run_schedule(&params, scheme, seed).unwrap();
        let k = trace.users();
        // reference recomputation from the cold start and the slot rates
        let mut avg = trace.averages[0].clone();
        for t in 0..trace.slots() {
            for u in 0..k {
                prop_assert!(trace.weights[t][u].is_finite() && trace.weights[t][u] > 0.0);
                avg[u] = (1.0 - 1.0 / trace.window as f64) * avg[u] + trace.rates[t][u] / trace.window as f64;
                prop_assert_eq!(avg[u].to_bits(), trace.averages[t + 1][u].to_bits());
                prop_assert_eq!(
                    moving_average(trace.averages[t][u], trace.rates[t][u], trace.window).to_bits(),
                    avg[u].to_bits()
                );
            }
        }
        let j = trace.jain().unwrap();
        prop_assert!(j >= 1.0 / k as f64 - 1e-12 && j <= 1.0 + 1e-12);
    }
}

#[test]
fn noise_scales_inversely_with_subcarriers() {
    let cfg = ChannelModelConfig::default();
    for n in [1usize, 5, 25, 100] {
        let scaled = cfg.noise_power(n) * n as f64;
        assert!(close(scaled, cfg.noise_power(1), 1e-12));
    }
}
