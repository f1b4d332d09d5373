use std::collections::BTreeMap;

use monosde::models::{eval_mall_diffusion, eval_mall_drift};
use monosde::solver::simulate_with_stats;
use monosde::variational::gateaux_direction;
use monosde::*;
use proptest::prelude::*;

fn model(name: &str) -> ModelSpec {
    zoo_lookup(name, &BTreeMap::new()).unwrap()
}

fn zoo_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["gbm", "ou", "ginzburg_landau", "verhulst", "quintic", "wright_fisher_like", "random_sigma_example"])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_nodes_are_uniform(t in 0.01f64..100.0, n in 1usize..5000) {
        let g = TimeGrid::new(t, n).unwrap();
        prop_assert_eq!(g.len(), n + 1);
        prop_assert_eq!(g.time(0), 0.0);
        prop_assert_eq!(g.time(n), t);
        prop_assert!((g.dt() * n as f64 - t).abs() <= 1e-12 * t);
        let k = n / 2;
        prop_assert_eq!(g.node_index(g.time(k)).unwrap(), k);
    }

    #[test]
    fn shifts_compose_exactly(seed in any::<u64>(), c in -3.0f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let w = sample_noise(&grid, 1, seed, 0).unwrap();
        let h = CameronMartinPath::from_fn(grid, 1, |t, _| c * (1.0 + t)).unwrap();
        let once = shift_noise(&w, &h, a + b).unwrap();
        let twice = shift_noise(&shift_noise(&w, &h, a).unwrap(), &h, b).unwrap();
        prop_assert_eq!(once.increments(), twice.increments());
    }

    #[test]
    fn doleans_dade_is_positive(seed in any::<u64>(), c in -20.0f64..20.0) {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&grid, 1, seed, 3).unwrap();
        let h = CameronMartinPath::from_fn(grid, 1, |t, _| c * (5.0 * t).sin()).unwrap();
        for t in [0, 1, 32, 64] {
            prop_assert!(doleans_dade(&w, &h, t).unwrap() > 0.0);
        }
    }

    #[test]
    fn first_variation_is_linear(name in zoo_name(), seed in any::<u64>(), h1 in -2.0f64..2.0, h2 in -2.0f64..2.0) {
        let spec = model(name);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&grid, 1, seed, 0).unwrap();
        let theta = spec.initial.nominal();
        let scheme = SchemeChoice::tamed();
        let f = |h: f64| gateaux_direction(&spec, &grid, &w, &theta, &scheme, &[h]).unwrap();
        let (a, b, c) = (f(h1), f(h2), f(h1 + 2.0 * h2));
        for i in 0..grid.len() {
            let lhs = c.value(i)[0];
            let rhs = a.value(i)[0] + 2.0 * b.value(i)[0];
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn malliavin_coefficients_vanish_after_t(seed in any::<u64>(), i in 0usize..64, j in 0usize..64) {
        let spec = model("random_sigma_example");
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&grid, 1, seed, 0).unwrap();
        let (s, t) = (grid.time(i.max(j)), grid.time(i.min(j)));
        prop_assume!(s > t);
        let hist = w.history(i.min(j));
        let (mut u, mut v) = ([1.0], [1.0]);
        eval_mall_drift(spec.field.as_ref(), s, t, &hist, &mut u);
        eval_mall_diffusion(spec.field.as_ref(), s, t, &hist, &mut v);
        prop_assert_eq!(u, [0.0]);
        prop_assert_eq!(v, [0.0]);
    }

    #[test]
    fn malliavin_field_is_zero_before_s(seed in any::<u64>(), s in 1usize..16, t in 0usize..64) {
        let spec = model("random_sigma_example");
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&grid, 1, seed, 0).unwrap();
        let f = malliavin_field(&spec, &grid, &w, &[1.0], &SchemeChoice::euler(), 4).unwrap();
        let s = 4 * s;
        prop_assume!(t < s);
        prop_assert_eq!(f.get(s, t).unwrap(), vec![0.0]);
    }

    #[test]
    fn malliavin_matrix_is_psd(name in zoo_name(), seed in any::<u64>()) {
        let spec = model(name);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&grid, 1, seed, 0).unwrap();
        let f = malliavin_field(&spec, &grid, &w, &spec.initial.nominal(), &SchemeChoice::tamed(), 4).unwrap();
        let q = malliavin_matrix(&f, 64).unwrap();
        prop_assert!(q.min_eigenvalue >= -1e-10);
    }

    #[test]
    fn tamed_increments_and_newton_residuals_are_bounded(seed in any::<u64>(), theta in -50.0f64..50.0) {
        let spec = model("ginzburg_landau");
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let w = sample_noise(&grid, 1, seed, 0).unwrap();
        let (_, stats) = simulate_with_stats(&spec, &grid, &w, &[theta], &SchemeChoice::tamed()).unwrap();
        prop_assert!(stats.max_tamed_increment <= 1.0);
        let implicit = SchemeChoice::implicit();
        let (_, stats) = simulate_with_stats(&spec, &grid, &w, &[theta], &implicit).unwrap();
        prop_assert!(stats.max_newton_residual <= implicit.newton_tol);
    }

    #[test]
    fn simulation_reuses_noise_bit_for_bit(name in zoo_name(), seed in any::<u64>(), path in any::<u32>()) {
        let spec = model(name);
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let a = monosde::solver::simulate_indexed(&spec, &grid, &SchemeChoice::tamed(), seed, u64::from(path)).unwrap();
        let b = monosde::solver::simulate_indexed(&spec, &grid, &SchemeChoice::tamed(), seed, u64::from(path)).unwrap();
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn estimates_do_not_depend_on_worker_count(seed in any::<u64>(), workers in 2usize..9) {
        let spec = model("ginzburg_landau");
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let h = CameronMartinPath::constant(grid, &[0.5]).unwrap();
        let f = |p: &StatePath| p.terminal()[0].tanh();
        let run = |e: &Engine| {
            cameron_martin_check(&spec, &grid, &SchemeChoice::tamed(), &h, &f, 3000, seed, e, DivergencePolicy::Fail).unwrap()
        };
        prop_assert_eq!(run(&Engine::sequential()), run(&Engine::parallel(workers)));
    }
}
