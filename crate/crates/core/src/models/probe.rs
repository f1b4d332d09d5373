use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{auxiliary_rng, sample_noise};

use super::field::CoefficientField;

const PROBE_STEPS: usize = 64;
const SLACK: f64 = 1.0 + 1e-9;
const ABS_SLACK: f64 = 1e-12;

/// Axis-aligned box of states on which assumptions are probed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDomain {
    pub bounds: Vec<(f64, f64)>,
}

impl ProbeDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        Self { bounds }
    }

    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![(lo, hi); d])
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub n_probes: usize,
    /// max of `⟨x-y, b(x)-b(y)⟩ / |x-y|²`.
    pub max_one_sided: f64,
    /// max of `|σ(x)-σ(y)| / |x-y|`.
    pub max_diffusion_lipschitz: f64,
    /// max of `zᵀ ∇ₓb(x) z / |z|²`.
    pub max_gradient_form: f64,
    pub declared_monotone: f64,
    pub declared_lip_diffusion: f64,
}

impl ProbeReport {
    fn within(observed: f64, declared: f64) -> bool {
        observed <= declared * SLACK + ABS_SLACK
    }

    pub fn monotone_ok(&self) -> bool {
        Self::within(self.max_one_sided, self.declared_monotone)
    }

    pub fn diffusion_ok(&self) -> bool {
        Self::within(self.max_diffusion_lipschitz, self.declared_lip_diffusion)
    }

    pub fn gradient_form_ok(&self) -> bool {
        Self::within(self.max_gradient_form, self.declared_monotone)
    }

    pub fn passed(&self) -> bool {
        self.monotone_ok() && self.diffusion_ok() && self.gradient_form_ok()
    }
}

/// Sample random `(t, history, x, y)` and record the worst one-sided
/// Lipschitz and diffusion Lipschitz quotients against the declared constants.
pub fn probe_assumptions(
    field: &dyn CoefficientField,
    domain: &ProbeDomain,
    n_probes: usize,
    seed: u64,
) -> Result<ProbeReport> {
    if n_probes == 0 {
        return Err(Error::invalid("n_probes", "must be >= 1"));
    }
    let (d, m) = (field.state_dim(), field.noise_dim());
    if domain.bounds.len() != d {
        return Err(Error::DimensionMismatch {
            context: "probe domain",
            expected: d,
            found: domain.bounds.len(),
        });
    }
    let grid = TimeGrid::new(1.0, PROBE_STEPS)?;
    let mut rng = auxiliary_rng(seed, 0, 7);
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let (mut sx, mut sy) = (vec![0.0; d * m], vec![0.0; d * m]);
    let mut grad = vec![0.0; d * d];
    let mut report = ProbeReport {
        n_probes,
        max_one_sided: f64::NEG_INFINITY,
        max_diffusion_lipschitz: 0.0,
        max_gradient_form: f64::NEG_INFINITY,
        declared_monotone: field.monotone_const(),
        declared_lip_diffusion: field.lip_diffusion(),
    };
    for probe in 0..n_probes {
        let noise = sample_noise(&grid, m, seed, probe as u64)?;
        let step = rng.random_range(0..=PROBE_STEPS);
        let hist = noise.history(step);
        let t = grid.time(step);
        let x = domain.sample(&mut rng);
        let y = domain.sample(&mut rng);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dist2: f64 = diff.iter().map(|v| v * v).sum();
        if dist2 == 0.0 {
            continue;
        }
        field.drift(t, &hist, &x, &mut bx);
        field.drift(t, &hist, &y, &mut by);
        let inner: f64 = diff.iter().zip(bx.iter().zip(&by)).map(|(u, (a, b))| u * (a - b)).sum();
        report.max_one_sided = report.max_one_sided.max(inner / dist2);

        field.diffusion(t, &hist, &x, &mut sx);
        field.diffusion(t, &hist, &y, &mut sy);
        let sdiff: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        report.max_diffusion_lipschitz = report.max_diffusion_lipschitz.max(sdiff / dist2.sqrt());

        field.grad_drift(t, &hist, &x, &mut grad);
        let z: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let zz: f64 = z.iter().map(|v| v * v).sum();
        if zz > 0.0 {
            let mut form = 0.0;
            for a in 0..d {
                for b in 0..d {
                    form += z[a] * grad[a * d + b] * z[b];
                }
            }
            report.max_gradient_form = report.max_gradient_form.max(form / zz);
        }
    }
    Ok(report)
}
