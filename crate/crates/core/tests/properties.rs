use chainopt::baselines::pso::discretize;
use chainopt::harness::{
    relative_difference_cdf, run_algorithm, run_trials, summary_stats, Algorithm, AlgorithmConfig, Experiment, Summary,
};
use chainopt::instances::{table1_params, toy_instance};
use chainopt::model::{cost, latency, security, utility};
use chainopt::solver::split_seed;
use chainopt::{Budget, Configuration, NormConstants, Objective, SearchSpace, SystemParams, VerifierPool, Weights};
use proptest::prelude::*;
use proptest::sample::subsequence;

fn weights() -> impl Strategy<Value = Weights> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_filter_map("zero weights", |(a, b, c)| {
        let s = a + b + c;
        (s > 1e-6).then(|| Weights { beta1: a / s, beta2: b / s, beta3: 1.0 - a / s - b / s })
    })
}

fn params() -> impl Strategy<Value = SystemParams> {
    (100.0f64..5000.0, 100.0f64..5000.0, 0.5f64..8.0, 10.0f64..2000.0, 1e3f64..1e8, 0.01f64..2.0, 0.5f64..10.0, 0.2f64..2.0)
        .prop_map(|(v_d, v_u, r, p, k, phi, alpha, kappa)| SystemParams { v_d, v_u, r, p, k, phi, alpha, kappa })
}

/// An instance plus one feasible configuration on it.
fn instance_and_config() -> impl Strategy<Value = (SystemParams, VerifierPool, SearchSpace, Weights, Configuration)> {
    (2usize..12)
        .prop_flat_map(|size| {
            (
                params(),
                prop::collection::vec(1.0f64..1e5, size),
                prop::collection::vec(1.0f64..200.0, size),
                1..=size,
                0..=size,
                1usize..50,
                0usize..200,
                weights(),
            )
        })
        .prop_flat_map(|(p, x, rho, a, b, t_lo, t_span, w)| {
            let size = x.len();
            let (m_min, m_max) = (a.min(b.max(1)), a.max(b.max(1)));
            let space = SearchSpace { m_min, m_max, theta_min: t_lo, theta_max: t_lo + t_span };
            let pool = VerifierPool { x, rho };
            (m_min..=m_max, space.theta_min..=space.theta_max)
                .prop_flat_map(move |(m, theta)| {
                    subsequence((0..size).collect::<Vec<_>>(), m)
                        .prop_map(move |sel| Configuration::from_selected(theta, size, &sel))
                })
                .prop_map(move |c| (p.clone(), pool.clone(), space, w, c))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn utility_in_unit_interval((p, pool, space, w, c) in instance_and_config()) {
        let norms = NormConstants::compute(&p, &pool, &space);
        let u = utility(&c, &p, &pool, &w, &norms).unwrap();
        prop_assert!((0.0..=1.0).contains(&u), "U = {u}");
        prop_assert!(latency(&c, &p, &pool).unwrap() <= norms.latency_max);
        prop_assert!(security(&c, &p).unwrap() <= norms.security_max);
        prop_assert!(cost(&c, &pool).unwrap() <= norms.cost_max);
    }

    #[test]
    fn verification_term_is_slowest_selected((p, pool, _space, _w, c) in instance_and_config()) {
        let mut slowest = 0.0f64;
        for i in 0..pool.len() {
            if c.z[i] {
                slowest = slowest.max(p.k / pool.x[i]);
            }
        }
        let theta = c.theta as f64;
        let rest = theta * p.r / p.v_d + p.phi * theta * p.r * c.m as f64 + p.p / p.v_u;
        let l = latency(&c, &p, &pool).unwrap();
        prop_assert!((l - rest - slowest).abs() <= 1e-9 * l.max(1.0));
    }

    #[test]
    fn security_increases_with_m(p in params(), m in 1usize..2000) {
        let s = |m: usize| security(&Configuration { m, theta: 1, z: vec![true; m] }, &p).unwrap();
        prop_assert!(s(m + 1) > s(m));
    }

    #[test]
    fn cost_decreases_with_theta((_p, pool, _space, _w, c) in instance_and_config()) {
        let mut next = c.clone();
        next.theta += 1;
        prop_assert!(cost(&next, &pool).unwrap() < cost(&c, &pool).unwrap());
    }

    #[test]
    fn pool_permutation_leaves_utility_unchanged(
        (p, pool, space, w, c) in instance_and_config(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.shuffle(&mut chainopt::solver::rng_from_seed(seed));
        let permuted = VerifierPool {
            x: order.iter().map(|&i| pool.x[i]).collect(),
            rho: order.iter().map(|&i| pool.rho[i]).collect(),
        };
        let pc = Configuration { m: c.m, theta: c.theta, z: order.iter().map(|&i| c.z[i]).collect() };
        let a = utility(&c, &p, &pool, &w, &NormConstants::compute(&p, &pool, &space)).unwrap();
        let b = utility(&pc, &p, &permuted, &w, &NormConstants::compute(&p, &permuted, &space)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn discretize_yields_exact_count(z in prop::collection::vec(0.0f64..=1.0, 0..40), frac in 0.0f64..=1.0) {
        let m = (frac * z.len() as f64).floor() as usize;
        let bits = discretize(&z, m);
        prop_assert_eq!(bits.len(), z.len());
        prop_assert_eq!(bits.iter().filter(|&&b| b).count(), m);
    }

    #[test]
    fn summary_is_order_invariant(values in prop::collection::vec(-1e3f64..1e3, 1..60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut chainopt::solver::rng_from_seed(seed));
        let a = Summary::of(&values).unwrap();
        let b = Summary::of(&shuffled).unwrap();
        prop_assert_eq!(a.count, b.count);
        prop_assert_eq!(a.min, b.min);
        prop_assert_eq!(a.q1, b.q1);
        prop_assert_eq!(a.median, b.median);
        prop_assert_eq!(a.q3, b.q3);
        prop_assert_eq!(a.max, b.max);
        prop_assert!((a.mean - b.mean).abs() <= 1e-9 * a.mean.abs().max(1.0));
        prop_assert!((a.variance - b.variance).abs() <= 1e-9 * a.variance.max(1.0));
        prop_assert!(a.min <= a.q1 && a.q1 <= a.median && a.median <= a.q3 && a.q3 <= a.max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every solver returns a feasible configuration, its reported utility
    /// matches a fresh evaluation, and the oracle dominates all of them.
    #[test]
    fn solvers_feasible_and_oracle_dominates(instance_seed in 0u64..1000, seed in any::<u64>(), w in weights()) {
        let obj = toy_instance(instance_seed).objective().unwrap().with_weights(w).unwrap();
        let config = AlgorithmConfig::default();
        let oracle = run_algorithm(Algorithm::Oracle, &obj, &config, Budget::Iterations(0), seed).unwrap();
        for algo in [Algorithm::Adpsa, Algorithm::Pso, Algorithm::Sa, Algorithm::Pseudo] {
            let r = run_algorithm(algo, &obj, &config, Budget::Iterations(15), seed).unwrap();
            prop_assert!(obj.validate(&r.best).is_feasible(), "{algo}: {:?}", r.best);
            prop_assert_eq!(obj.utility(&r.best).unwrap(), r.best_utility);
            prop_assert!(r.trace.is_monotone());
            prop_assert!(oracle.best_utility >= r.best_utility, "{algo} beat the oracle");
        }
    }

    #[test]
    fn cdf_is_monotone(master in any::<u64>()) {
        let obj = toy_instance(3).objective().unwrap();
        let exp = Experiment::new(
            vec![Algorithm::Adpsa, Algorithm::Pso, Algorithm::Sa, Algorithm::Pseudo],
            Budget::Iterations(5),
            8,
            master,
        );
        let res = run_trials(&obj, "toy", &exp).unwrap();
        prop_assert!(res.is_paired());
        prop_assert_eq!(summary_stats(&res).unwrap().len(), 4);
        for series in relative_difference_cdf(&res, Algorithm::Adpsa).unwrap() {
            let pts = &series.points;
            prop_assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
            prop_assert!(pts.iter().all(|&(_, f)| f > 0.0 && f <= 1.0));
            if let Some(last) = pts.last() {
                prop_assert_eq!(last.1, 1.0);
            }
        }
    }
}

#[test]
fn paired_seeds_follow_master() {
    let obj = toy_instance(0).objective().unwrap();
    let exp = Experiment::new(vec![Algorithm::Adpsa, Algorithm::Sa], Budget::Iterations(3), 5, 42);
    let res = run_trials(&obj, "toy", &exp).unwrap();
    for r in &res.records {
        assert_eq!(r.seed, split_seed(42, r.trial as u64));
    }
}

#[test]
fn table1_objective_is_valid() {
    let p = table1_params();
    p.validate().unwrap();
    let pool = VerifierPool::new(vec![40_000.0; 4], vec![100.0; 4]).unwrap();
    let space = SearchSpace { m_min: 2, m_max: 4, theta_min: 2, theta_max: 10 };
    Objective::new(p, pool, space, Weights::new(0.4, 0.2, 0.4).unwrap()).unwrap();
}
