use alpi::envs::{build_chain, build_maze, random_mdp, MazeConfig, RandomMdpConfig, CHAIN_DOWN};
use alpi::lookahead::{tree_query_cost, TreeCostTable};
use alpi::mdp::{evaluate_policy, solve_optimal, EvalMethod};
use alpi::planners::{
    discount_power, h_kappa, quantile_count, run_h_pi, run_pi, run_qlpi, run_tlpi, tlpi_beta,
    QuantileSchedule,
};
use alpi::{Policy, RunSettings, TabularMdp, ValueFunction};
use proptest::prelude::*;

fn case(seed: u64, num_states: usize, num_actions: usize, branching: usize) -> TabularMdp {
    random_mdp(&RandomMdpConfig {
        num_states,
        num_actions,
        branching,
        discount: 0.9,
        seed,
    })
    .unwrap()
}

fn reference(mdp: &TabularMdp) -> (ValueFunction, Policy, RunSettings) {
    let (v, pi) = solve_optimal(mdp, 1e-12).unwrap();
    let settings = RunSettings::default().with_reference(v.clone());
    (v, pi, settings)
}

/// Action gap of the optimal policy at every state, from `Q⋆`.
fn unique_optimal_actions(mdp: &TabularMdp, v_star: &ValueFunction) -> Vec<Option<usize>> {
    (0..mdp.num_states())
        .map(|s| {
            let mut q: Vec<(f64, usize)> = (0..mdp.num_actions())
                .map(|a| (mdp.backup(s, a, v_star.as_slice()), a))
                .collect();
            q.sort_by(|x, y| y.0.total_cmp(&x.0));
            match q.get(1) {
                Some(second) if q[0].0 - second.0 <= 1e-8 => None,
                _ => Some(q[0].1),
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generalization_identities(seed in any::<u64>(), n in 2usize..20, a in 2usize..4, b in 1usize..4, h in 1usize..4) {
        let mdp = case(seed, n, a, b);
        let (v_star, _, settings) = reference(&mdp);
        let pi0 = Policy::constant(n, 0);
        let pi = run_pi(&mdp, &pi0, &settings).unwrap();
        let h1 = run_h_pi(&mdp, &pi0, 1, &settings).unwrap();
        prop_assert_eq!(&pi.trace, &h1.trace);
        let hpi = run_h_pi(&mdp, &pi0, h, &settings).unwrap();
        let qlpi = run_qlpi(&mdp, &pi0, &QuantileSchedule::single(h).unwrap(), &v_star, 0, &settings).unwrap();
        prop_assert_eq!(hpi.trace.to_csv(), qlpi.trace.to_csv());
        // κ at or just above γ leaves nothing for the deep phase.
        let kappa = 0.9 + 1e-9;
        prop_assert_eq!(h_kappa(0.9, 0.9).unwrap(), 1);
        prop_assert_eq!(h_kappa(kappa, 0.9).unwrap(), 1);
        let tlpi = run_tlpi(&mdp, &pi0, kappa, &v_star, 0.0, &settings).unwrap();
        prop_assert_eq!(&tlpi.trace, &pi.trace);
        let first_pass = QuantileSchedule::new(vec![1.0, 0.0, 0.0]).unwrap();
        let q1 = run_qlpi(&mdp, &pi0, &first_pass, &v_star, 0, &settings).unwrap();
        prop_assert_eq!(q1.trace.to_csv(), pi.trace.to_csv());
    }

    #[test]
    fn final_policies_are_optimal(seed in any::<u64>(), n in 2usize..25, a in 2usize..4, b in 1usize..4) {
        let mdp = case(seed, n, a, b);
        let (v_star, _, settings) = reference(&mdp);
        let pi0 = Policy::constant(n, a - 1);
        let unique = unique_optimal_actions(&mdp, &v_star);
        let schedule = QuantileSchedule::with_depths(&[(2, 0.3), (3, 0.1)]).unwrap();
        let runs = [
            run_pi(&mdp, &pi0, &settings).unwrap(),
            run_h_pi(&mdp, &pi0, 3, &settings).unwrap(),
            run_tlpi(&mdp, &pi0, discount_power(0.9, 3), &v_star, 0.0, &settings).unwrap(),
            run_qlpi(&mdp, &pi0, &schedule, &v_star, 1, &settings).unwrap(),
        ];
        for r in &runs {
            prop_assert!(r.converged);
            prop_assert_eq!(r.trace.records.last().unwrap().changes, 0);
            prop_assert!(r.value.distance_inf(&v_star) < 1e-8);
            for (s, u) in unique.iter().enumerate() {
                if let Some(action) = u {
                    prop_assert_eq!(r.policy.action(s), *action);
                }
            }
            let d = r.trace.distances();
            prop_assert!(d.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn tlpi_cost_within_threshold_budget(seed in any::<u64>(), n in 2usize..20, a in 2usize..4, b in 1usize..4, p in 2usize..5) {
        let mdp = case(seed, n, a, b);
        let (v_star, _, settings) = reference(&mdp);
        let kappa = discount_power(0.9, p);
        let depth = h_kappa(kappa, 0.9).unwrap();
        let costs = TreeCostTable::new(&mdp, depth);
        let r = run_tlpi(&mdp, &Policy::constant(n, 0), kappa, &v_star, 0.0, &settings).unwrap();
        for t in 0..r.iterations {
            let tree = r.trace.iteration_ledger(t).total_improve() as f64;
            let theta = r.trace.records[t].deep_fraction;
            let budget = n as f64 * (costs.max_cost(1) as f64 + theta * costs.max_cost(depth) as f64);
            prop_assert!(tree <= budget + 1e-9);
        }
    }

    #[test]
    fn qlpi_respects_depth_budgets(seed in any::<u64>(), n in 2usize..25, m in 0usize..4) {
        let mdp = case(seed, n, 3, 2);
        let (v_star, _, settings) = reference(&mdp);
        let schedule = QuantileSchedule::with_depths(&[(2, 0.25), (4, 0.1)]).unwrap();
        let r = run_qlpi(&mdp, &Policy::constant(n, 0), &schedule, &v_star, m, &settings).unwrap();
        for record in &r.trace.records {
            for (&depth, &count) in &record.states_improved_by_depth {
                let theta = (schedule.theta(depth) + m as f64 / n as f64).min(1.0);
                prop_assert!(count <= quantile_count(theta, n));
                prop_assert!(count as f64 <= (theta * n as f64).ceil());
            }
        }
    }
}

#[test]
fn chain_h_pi_iterations_follow_propagation() {
    // s_0 … s_n all switch to u; h-PI switches h of them per pass.
    let n = 12;
    let mdp = build_chain(n, 0.9).unwrap();
    let pi0 = Policy::constant(n + 2, CHAIN_DOWN);
    let r = run_h_pi(&mdp, &pi0, 3, &RunSettings::default()).unwrap();
    assert_eq!(r.trace.changing_iterations(), (n + 1).div_ceil(3));
    assert_eq!(r.iterations, r.trace.changing_iterations() + 1);
}

#[test]
fn chain_tlpi_deep_fraction() {
    for h in 2..=4usize {
        let n = 15;
        let mdp = build_chain(n, 0.9).unwrap();
        let s = mdp.num_states();
        let (v_star, _, settings) = reference(&mdp);
        let kappa = discount_power(0.9, h);
        let pi0 = Policy::constant(s, CHAIN_DOWN);
        let r = run_tlpi(&mdp, &pi0, kappa, &v_star, 0.0, &settings).unwrap();
        let hpi = run_h_pi(&mdp, &pi0, h, &settings).unwrap();
        // The h states nearest the frontier are the ones not contracted by κ.
        assert!((r.trace.max_deep_fraction() - h as f64 / s as f64).abs() < 1e-12);
        assert_eq!(r.iterations, hpi.iterations);
    }
}

#[test]
fn maze_h_pi_ledger_arithmetic() {
    let maze = build_maze(&MazeConfig::with_seed(5)).unwrap();
    let mdp = maze.mdp();
    let s = mdp.num_states();
    for h in 1..=3 {
        let per_pass: u64 = (0..s).map(|x| tree_query_cost(mdp, x, h).unwrap()).sum();
        let r = run_h_pi(mdp, &Policy::constant(s, 0), h, &RunSettings::default()).unwrap();
        for t in 0..r.iterations {
            assert_eq!(r.trace.iteration_ledger(t).total(), per_pass + s as u64);
        }
    }
}

#[test]
fn maze_qlpi_reaches_optimum() {
    let maze = build_maze(&MazeConfig::default()).unwrap();
    let mdp = maze.mdp();
    let (v_star, _, settings) = reference(mdp);
    let schedule = QuantileSchedule::with_depths(&[(2, 0.1), (4, 0.05), (8, 0.02)]).unwrap();
    let r = run_qlpi(
        mdp,
        &Policy::constant(mdp.num_states(), 0),
        &schedule,
        &v_star,
        0,
        &settings,
    )
    .unwrap();
    assert!(r.converged);
    assert!(r.final_distance() <= 1e-8);
}

#[test]
fn noisy_tlpi_keeps_iteration_count() {
    let mdp = case(7, 12, 3, 3);
    let (v_star, _, settings) = reference(&mdp);
    let kappa = discount_power(0.9, 3);
    let eps = 1e-3;
    let noisy = ValueFunction::new(
        v_star
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| v + if i % 2 == 0 { eps } else { -eps * 0.5 })
            .collect(),
    )
    .unwrap();
    let pi0 = Policy::constant(12, 0);
    let exact = run_tlpi(&mdp, &pi0, kappa, &v_star, 0.0, &settings).unwrap();
    let approx = run_tlpi(&mdp, &pi0, kappa, &noisy, tlpi_beta(eps, kappa), &settings).unwrap();
    assert!(approx.iterations <= exact.iterations);
}

#[test]
fn random_pi_matches_optimum() {
    let mdp = case(8, 8, 3, 2);
    let (v_star, _, settings) = reference(&mdp);
    let r = run_pi(&mdp, &Policy::constant(8, 0), &settings).unwrap();
    let v = evaluate_policy(&mdp, &r.policy, EvalMethod::Direct).unwrap();
    assert!(v.distance_inf(&v_star) <= 1e-8);
}
