use monosde::greeks::BelWeight;
use monosde::solver::{SchemeChoice, SchemeKind};
use monosde::DivergencePolicy;
use monosde_cli::config::{FunctionalChoice, PayoffChoice};
use monosde_cli::{emit_config, parse_config, Experiment, ExperimentConfig};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop::sample::select(Experiment::ALL.to_vec()),
        prop::sample::select(vec!["gbm", "ou", "ginzburg_landau", "verhulst", "random_sigma_example"]),
        (0.1f64..10.0, 64usize..4096),
        prop::sample::select(vec![SchemeKind::EulerMaruyama, SchemeKind::TamedEuler, SchemeKind::SplitStepImplicit]),
        (any::<u32>(), 2usize..100_000, any::<bool>(), 0.0f64..1.0),
        (prop::collection::vec(1e-3f64..1.0, 1..6), prop::collection::vec(1e-4f64..1.0, 0..4), 0.1f64..5.0),
        (0usize..3, 0.5f64..20.0, 0usize..4, 0.1f64..3.0, any::<bool>(), 1e-6f64..1e-1),
    )
        .prop_map(|(exp, model, (t, n), kind, (seed, paths, exclude, frac), (mut eps, deltas, h), misc)| {
            let mut cfg = ExperimentConfig::new(exp);
            cfg.model.name = model.into();
            cfg.grid.horizon = t;
            // Keep the implicit scheme admissible for every model's L_mono.
            cfg.grid.steps = n.max((t * 4.0) as usize + 1);
            cfg.scheme = SchemeChoice::new(kind);
            cfg.seed = u64::from(seed);
            cfg.n_paths = paths;
            cfg.divergence = if exclude { DivergencePolicy::Exclude } else { DivergencePolicy::Fail };
            cfg.max_diverged_fraction = frac;
            eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
            eps.dedup();
            cfg.ladder.epsilons = eps;
            cfg.ladder.deltas = deltas;
            cfg.ladder.h = h;
            let (f, clip, p, strike, linear, fd) = misc;
            cfg.cameron_martin.functional = match f {
                0 => FunctionalChoice::One,
                1 => FunctionalChoice::Terminal,
                _ => FunctionalChoice::SupClipped { clip },
            };
            cfg.greeks.payoff = match p {
                0 => PayoffChoice::Identity,
                1 => PayoffChoice::Tanh,
                2 => PayoffChoice::Digital { strike },
                _ => PayoffChoice::Constant { value: strike },
            };
            cfg.greeks.weight = if linear { BelWeight::Linear } else { BelWeight::Constant };
            cfg.greeks.fd_eps = fd;
            cfg.malliavin.s_stride = 1;
            cfg
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn emit_then_parse_is_identity(cfg in arb_config()) {
        let text = emit_config(&cfg);
        match parse_config(&text) {
            Ok(back) => prop_assert_eq!(back, cfg),
            Err(e) => prop_assert!(false, "{}\n{}", text, e),
        }
    }

    #[test]
    fn unknown_top_level_keys_are_rejected(cfg in arb_config(), key in "[a-z]{3,12}") {
        prop_assume!(!["seed", "model", "grid", "scheme", "ladder", "greeks", "verify", "output", "metadata", "n_paths", "experiment", "divergence", "malliavin"].contains(&key.as_str()));
        let text = format!("{key} = 1\n{}", emit_config(&cfg));
        let err = parse_config(&text).unwrap_err();
        prop_assert!(err.errors.iter().any(|e| e.contains(&key)));
    }
}
