//! Coefficient fields, the model zoo and closed-form oracles.

mod closed_form;
mod field;
mod probe;
pub mod zoo;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_distr::{Distribution, Pareto};
use rand::Rng;

use crate::error::{Error, Result};
use crate::noise::auxiliary_rng;

pub use closed_form::{
    closed_form_malliavin_row, closed_form_state_path, eval_closed_form, ClosedFormKind, OracleKind,
};
pub use field::{eval_mall_diffusion, eval_mall_drift, CoefficientField};
pub use probe::{probe_assumptions, ProbeDomain, ProbeReport};
pub use zoo::StepFunction;

pub const ZOO: &[&str] = &[
    "gbm",
    "ou",
    "ginzburg_landau",
    "verhulst",
    "quintic",
    "wright_fisher_like",
    "random_sigma_example",
];

const INITIAL_CONDITION_STREAM: u64 = 1;

/// Initial condition `θ`, either fixed or drawn per path independently of the noise.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Fixed(Vec<f64>),
    /// `θ = ±P` with `P ~ Pareto(scale, shape)` and a fair random sign.
    SymmetricPareto { scale: f64, shape: f64 },
}

impl InitialCondition {
    pub fn is_random(&self) -> bool {
        !matches!(self, InitialCondition::Fixed(_))
    }

    /// The fixed value, or the scale for random initial conditions.
    pub fn nominal(&self) -> Vec<f64> {
        match self {
            InitialCondition::Fixed(x) => x.clone(),
            InitialCondition::SymmetricPareto { scale, .. } => vec![*scale],
        }
    }

    pub fn sample(&self, seed: u64, path_index: u64) -> Vec<f64> {
        match self {
            InitialCondition::Fixed(x) => x.clone(),
            InitialCondition::SymmetricPareto { scale, shape } => {
                let mut rng = auxiliary_rng(seed, path_index, INITIAL_CONDITION_STREAM);
                let p: f64 = Pareto::new(*scale, *shape)
                    .expect("validated Pareto parameters")
                    .sample(&mut rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                vec![sign * p]
            }
        }
    }
}

/// A named model: coefficient field, parameters, initial condition and
/// (for some models) closed-form oracles.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub field: Arc<dyn CoefficientField>,
    pub params: BTreeMap<String, f64>,
    pub initial: InitialCondition,
    pub closed_form: Option<ClosedFormKind>,
    /// Box on which the model's declared constants hold.
    pub probe_domain: ProbeDomain,
}

impl ModelSpec {
    /// Custom model from a user field.
    pub fn custom(
        name: impl Into<String>,
        field: Arc<dyn CoefficientField>,
        initial: Vec<f64>,
        probe_domain: ProbeDomain,
    ) -> Self {
        Self {
            name: name.into(),
            field,
            params: BTreeMap::new(),
            initial: InitialCondition::Fixed(initial),
            closed_form: None,
            probe_domain,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.field.state_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.field.noise_dim()
    }

    pub fn with_initial(mut self, x0: Vec<f64>) -> Self {
        self.initial = InitialCondition::Fixed(x0);
        self
    }
}

struct ParamReader<'a> {
    model: &'a str,
    given: &'a BTreeMap<String, f64>,
    used: BTreeMap<String, f64>,
}

impl<'a> ParamReader<'a> {
    fn new(model: &'a str, given: &'a BTreeMap<String, f64>) -> Self {
        Self {
            model,
            given,
            used: BTreeMap::new(),
        }
    }

    fn get(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.given.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::invalid(format!("{}.{key}", self.model), "must be finite"));
        }
        self.used.insert(key.to_string(), v);
        Ok(v)
    }

    fn finish(self) -> Result<BTreeMap<String, f64>> {
        if let Some(k) = self.given.keys().find(|k| !self.used.contains_key(*k)) {
            let known: Vec<&str> = self.used.keys().map(String::as_str).collect();
            return Err(Error::invalid(
                format!("{}.{k}", self.model),
                format!("unknown parameter; expected one of: {}", known.join(", ")),
            ));
        }
        Ok(self.used)
    }
}

fn domain_error(model: &str, key: &str, reason: &str) -> Error {
    Error::invalid(format!("{model}.{key}"), reason)
}

/// Look up a zoo model by name. Parameter keys and defaults:
///
/// | model | keys (default) |
/// |---|---|
/// | `gbm` | `mu` (0.05), `sigma` (0.2), `x0` (1) |
/// | `ou` | `kappa` (1), `sigma` (0.5), `x0` (1) |
/// | `ginzburg_landau` | `eta` (1), `sigma` (1), `x0` (1) |
/// | `verhulst` | `lambda` (1), `sigma` (0.5), `x0` (0.5) |
/// | `quintic` | `sigma` (1), `x0` (0.5), `theta_pareto_shape` (0 = fixed θ), `theta_pareto_scale` (1) |
/// | `wright_fisher_like` | `x0` (0.5, must lie in [-1, 1]) |
/// | `random_sigma_example` | `x0` (1), `g_before` (1), `g_after` (2), `step_time` (0.5) |
pub fn zoo_lookup(name: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let mut p = ParamReader::new(name, params);
    let wide = ProbeDomain::new(vec![(-5.0, 5.0)]);
    let (field, x0, closed_form, domain, initial): (
        Arc<dyn CoefficientField>,
        f64,
        Option<ClosedFormKind>,
        ProbeDomain,
        Option<InitialCondition>,
    ) = match name {
        "gbm" => {
            let mu = p.get("mu", 0.05)?;
            let sigma = p.get("sigma", 0.2)?;
            let x0 = p.get("x0", 1.0)?;
            (
                Arc::new(zoo::Gbm { mu, sigma }),
                x0,
                Some(ClosedFormKind::Gbm { mu, sigma }),
                wide,
                None,
            )
        }
        "ou" => {
            let kappa = p.get("kappa", 1.0)?;
            let sigma = p.get("sigma", 0.5)?;
            let x0 = p.get("x0", 1.0)?;
            (
                Arc::new(zoo::OrnsteinUhlenbeck { kappa, sigma }),
                x0,
                Some(ClosedFormKind::OrnsteinUhlenbeck { kappa, sigma }),
                wide,
                None,
            )
        }
        "ginzburg_landau" => {
            let eta = p.get("eta", 1.0)?;
            let sigma = p.get("sigma", 1.0)?;
            let x0 = p.get("x0", 1.0)?;
            (Arc::new(zoo::GinzburgLandau { eta, sigma }), x0, None, wide, None)
        }
        "verhulst" => {
            let lambda = p.get("lambda", 1.0)?;
            let sigma = p.get("sigma", 0.5)?;
            let x0 = p.get("x0", 0.5)?;
            if x0 < 0.0 {
                return Err(domain_error(name, "x0", "must be >= 0"));
            }
            (
                Arc::new(zoo::Verhulst { lambda, sigma }),
                x0,
                None,
                ProbeDomain::new(vec![(0.0, 10.0)]),
                None,
            )
        }
        "quintic" => {
            let sigma = p.get("sigma", 1.0)?;
            let x0 = p.get("x0", 0.5)?;
            let shape = p.get("theta_pareto_shape", 0.0)?;
            let scale = p.get("theta_pareto_scale", 1.0)?;
            if shape < 0.0 {
                return Err(domain_error(name, "theta_pareto_shape", "must be >= 0"));
            }
            if scale <= 0.0 {
                return Err(domain_error(name, "theta_pareto_scale", "must be > 0"));
            }
            let initial = (shape > 0.0).then_some(InitialCondition::SymmetricPareto { scale, shape });
            (Arc::new(zoo::Quintic { sigma }), x0, None, ProbeDomain::new(vec![(-3.0, 3.0)]), initial)
        }
        "wright_fisher_like" => {
            let x0 = p.get("x0", 0.5)?;
            if !(-1.0..=1.0).contains(&x0) {
                return Err(domain_error(name, "x0", "must lie in [-1, 1]"));
            }
            (
                Arc::new(zoo::WrightFisherLike),
                x0,
                None,
                ProbeDomain::new(vec![(-3.0, 3.0)]),
                None,
            )
        }
        "random_sigma_example" => {
            let x0 = p.get("x0", 1.0)?;
            let before = p.get("g_before", 1.0)?;
            let after = p.get("g_after", 2.0)?;
            let at = p.get("step_time", 0.5)?;
            if at < 0.0 {
                return Err(domain_error(name, "step_time", "must be >= 0"));
            }
            let g = StepFunction { at, before, after };
            (
                Arc::new(zoo::RandomSigmaExample { g }),
                x0,
                Some(ClosedFormKind::RandomSigma { g }),
                wide,
                None,
            )
        }
        _ => {
            return Err(Error::UnknownModel {
                name: name.to_string(),
                known: ZOO.join(", "),
            })
        }
    };
    let params = p.finish()?;
    Ok(ModelSpec {
        name: name.to_string(),
        field,
        params,
        initial: initial.unwrap_or(InitialCondition::Fixed(vec![x0])),
        closed_form,
        probe_domain: domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::noise::sample_noise;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn every_zoo_entry_resolves() {
        for name in ZOO {
            let spec = zoo_lookup(name, &BTreeMap::new()).unwrap();
            assert_eq!(spec.state_dim(), 1);
            assert_eq!(spec.name, *name);
        }
    }

    #[test]
    fn closed_forms_where_documented() {
        for name in ZOO {
            let spec = zoo_lookup(name, &BTreeMap::new()).unwrap();
            let expect = matches!(*name, "gbm" | "ou" | "random_sigma_example");
            assert_eq!(spec.closed_form.is_some(), expect, "{name}");
        }
    }

    #[test]
    fn unknown_model_lists_zoo() {
        let err = zoo_lookup("heston", &BTreeMap::new()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("heston") && msg.contains("ginzburg_landau"), "{msg}");
    }

    #[test]
    fn out_of_domain_parameters() {
        assert!(zoo_lookup("wright_fisher_like", &params(&[("x0", 1.5)])).is_err());
        assert!(zoo_lookup("gbm", &params(&[("nu", 1.0)])).is_err());
        assert!(zoo_lookup("gbm", &params(&[("mu", f64::NAN)])).is_err());
    }

    #[test]
    fn quintic_drift() {
        let spec = zoo_lookup("quintic", &BTreeMap::new()).unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        let w = sample_noise(&g, 1, 0, 0).unwrap();
        let mut out = [0.0];
        for x in [-1.3, 0.0, 0.7, 2.0] {
            spec.field.drift(0.0, &w.history(0), &[x], &mut out);
            assert!((out[0] - (x - x.powi(5))).abs() <= 1e-15 * (1.0 + x.powi(5).abs()));
        }
    }

    #[test]
    fn ou_field() {
        let spec = zoo_lookup("ou", &params(&[("kappa", 1.0), ("sigma", 0.5)])).unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        let w = sample_noise(&g, 1, 0, 0).unwrap();
        let h = w.history(2);
        let mut out = [0.0];
        spec.field.drift(0.5, &h, &[2.0], &mut out);
        assert_eq!(out[0], -2.0);
        spec.field.diffusion(0.5, &h, &[2.0], &mut out);
        assert_eq!(out[0], 0.5);
        spec.field.grad_drift(0.5, &h, &[2.0], &mut out);
        assert_eq!(out[0], -1.0);
    }

    #[test]
    fn deterministic_models_ignore_history() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let w1 = sample_noise(&g, 1, 1, 0).unwrap();
        let w2 = sample_noise(&g, 1, 2, 0).unwrap();
        for name in ZOO {
            let spec = zoo_lookup(name, &BTreeMap::new()).unwrap();
            if !spec.field.is_deterministic() {
                continue;
            }
            let f = &spec.field;
            for x in [-2.0, -0.3, 0.4, 1.7] {
                let (mut a, mut b) = ([0.0], [0.0]);
                f.drift(0.5, &w1.history(8), &[x], &mut a);
                f.drift(0.5, &w2.history(8), &[x], &mut b);
                assert_eq!(a[0].to_bits(), b[0].to_bits());
                f.diffusion(0.5, &w1.history(8), &[x], &mut a);
                f.diffusion(0.5, &w2.history(8), &[x], &mut b);
                assert_eq!(a[0].to_bits(), b[0].to_bits());
            }
        }
    }

    #[test]
    fn malliavin_coefficients_vanish_for_s_after_t() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let w = sample_noise(&g, 1, 3, 0).unwrap();
        let mut rng = auxiliary_rng(11, 0, 0);
        for name in ZOO {
            let spec = zoo_lookup(name, &BTreeMap::new()).unwrap();
            for _ in 0..200 {
                let i = rng.random_range(0..=64usize);
                let j = rng.random_range(0..=64usize);
                let (s, t) = (g.time(j), g.time(i));
                let h = w.history(i);
                let (mut u, mut v) = ([1.0], [1.0]);
                eval_mall_drift(spec.field.as_ref(), s, t, &h, &mut u);
                eval_mall_diffusion(spec.field.as_ref(), s, t, &h, &mut v);
                spec.field.mall_diffusion(s, t, &h, &mut v);
                if s > t {
                    assert_eq!(v[0], 0.0, "{name}");
                    eval_mall_drift(spec.field.as_ref(), s, t, &h, &mut u);
                    assert_eq!(u[0], 0.0);
                }
            }
        }
    }

    #[test]
    fn random_sigma_v_is_the_step_function() {
        let spec = zoo_lookup("random_sigma_example", &BTreeMap::new()).unwrap();
        let g = TimeGrid::new(1.0, 16).unwrap();
        let w = sample_noise(&g, 1, 3, 0).unwrap();
        for i in 0..=16 {
            for j in 0..=16 {
                let (s, t) = (g.time(j), g.time(i));
                let mut v = [f64::NAN];
                spec.field.mall_diffusion(s, t, &w.history(i), &mut v);
                let expected = if s <= t {
                    if s < 0.5 { 1.0 } else { 2.0 }
                } else {
                    0.0
                };
                assert_eq!(v[0], expected, "s = {s}, t = {t}");
            }
        }
    }

    #[test]
    fn random_sigma_integral_is_left_point() {
        let spec = zoo_lookup("random_sigma_example", &BTreeMap::new()).unwrap();
        let g = TimeGrid::new(1.0, 16).unwrap();
        let w = sample_noise(&g, 1, 8, 0).unwrap();
        for i in 0..=16 {
            let direct: f64 = (0..i)
                .map(|k| if g.time(k) < 0.5 { 1.0 } else { 2.0 } * w.increment(k)[0])
                .sum();
            let mut out = [0.0];
            spec.field.diffusion(g.time(i), &w.history(i), &[0.0], &mut out);
            assert!((out[0] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn pareto_initial_conditions_are_reproducible() {
        let spec = zoo_lookup("quintic", &params(&[("theta_pareto_shape", 3.0)])).unwrap();
        assert!(spec.initial.is_random());
        let a = spec.initial.sample(5, 17);
        let b = spec.initial.sample(5, 17);
        assert_eq!(a, b);
        assert!(a[0].abs() >= 1.0);
        let signs: i32 = (0..200).map(|i| spec.initial.sample(5, i)[0].signum() as i32).sum();
        assert!(signs.abs() < 60);
    }
}
