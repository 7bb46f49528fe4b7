//! Monte-Carlo oracle built on the physical FTR construction.
//!
//! Each draw combines two specular waves with independent uniform phases,
//! scaled by a common unit-mean Gamma fluctuation, plus circular Gaussian
//! diffuse scatter. Nothing here touches the series code.
//!
//! Samples are generated in batches; batch `b` of link `l` draws from the
//! ChaCha stream `2b + l` under the run seed, so results depend only on
//! `(seed, samples, batch_size)` and never on the thread count.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ftr::{FtrParams, LinkBudget};
use crate::secrecy::SecrecyScenario;

/// Minimum number of `γ_d > μ` survivors for a conditional estimate.
pub const MIN_CONDITIONING_SAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub batch_size: u64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64, batch_size: u64) -> Result<Self> {
        let c = Self {
            samples,
            seed,
            batch_size,
        };
        c.validate()?;
        Ok(c)
    }

    /// `samples` draws in batches of at most 2^16.
    pub fn with_samples(samples: u64, seed: u64) -> Result<Self> {
        Self::new(samples, seed, samples.clamp(1, 1 << 16))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(invalid("samples", "must be >= 1"));
        }
        if self.batch_size < 1 || self.batch_size > self.samples {
            return Err(invalid(
                "batch-size",
                format!("must lie in [1, samples], got {}", self.batch_size),
            ));
        }
        Ok(())
    }

    fn batches(&self) -> impl IndexedParallelIterator<Item = (u64, u64)> + '_ {
        let n = self.samples.div_ceil(self.batch_size) as usize;
        (0..n).into_par_iter().map(move |b| {
            let b = b as u64;
            let start = b * self.batch_size;
            (b, (self.samples - start).min(self.batch_size))
        })
    }
}

/// A Bernoulli-proportion estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub effective_samples: u64,
}

impl McEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        let value = hits as f64 / trials as f64;
        Self {
            value,
            std_error: (value * (1.0 - value) / trials as f64).sqrt(),
            effective_samples: trials,
        }
    }

    /// `|value - reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        let diff = (self.value - reference).abs();
        if self.std_error == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / self.std_error
        }
    }
}

/// Generator for the instantaneous SNR of one FTR link.
///
/// `p` is in SNR units (see [`SecrecyScenario`]); the draw is made on the
/// physical channel with `σ² / (P_t/N_0)` and then scaled by `P_t/N_0`, so
/// the budget changes the arithmetic path but not the distribution.
#[derive(Debug, Clone)]
pub struct FtrSampler {
    fluctuation: Gamma<f64>,
    diffuse: Normal<f64>,
    v1: f64,
    v2: f64,
    pt_over_n0: f64,
}

impl FtrSampler {
    pub fn new(p: &FtrParams, budget: LinkBudget) -> Result<Self> {
        p.validate()?;
        let budget = LinkBudget::new(budget.pt_over_n0)?;
        let p = p.with_sigma2(p.sigma2 / budget.pt_over_n0);
        let root = (1.0 - p.delta * p.delta).sqrt();
        let fluctuation = Gamma::new(p.m, 1.0 / p.m).map_err(|e| invalid("m", e.to_string()))?;
        let diffuse =
            Normal::new(0.0, p.sigma2.sqrt()).map_err(|e| invalid("sigma2", e.to_string()))?;
        Ok(Self {
            fluctuation,
            diffuse,
            v1: (p.sigma2 * p.k_ratio * (1.0 + root)).sqrt(),
            v2: (p.sigma2 * p.k_ratio * (1.0 - root)).max(0.0).sqrt(),
            pt_over_n0: budget.pt_over_n0,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let zeta: f64 = self.fluctuation.sample(rng);
        let amp = zeta.sqrt();
        let (s1, c1) = (TAU * rng.random::<f64>()).sin_cos();
        let (s2, c2) = (TAU * rng.random::<f64>()).sin_cos();
        let re = amp * (self.v1 * c1 + self.v2 * c2) + self.diffuse.sample(rng);
        let im = amp * (self.v1 * s1 + self.v2 * s2) + self.diffuse.sample(rng);
        self.pt_over_n0 * (re * re + im * im)
    }
}

/// One SNR draw. The sample mean converges to `(1+K)2σ²`.
pub fn sample_ftr_snr<R: Rng + ?Sized>(
    p: &FtrParams,
    budget: LinkBudget,
    rng: &mut R,
) -> Result<f64> {
    Ok(FtrSampler::new(p, budget)?.sample(rng))
}

fn stream_rng(seed: u64, batch: u64, link: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * batch + link);
    rng
}

/// Event counts from paired `(γ_d, γ_e)` draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecrecyCounts {
    pub samples: u64,
    /// `γ_d > μ`
    pub reliable: u64,
    /// `μ < γ_d < λ-1+λγ_e`
    pub leaked: u64,
    /// `γ_d > μ` and `γ_d >= λ-1+λγ_e`
    pub secure: u64,
    /// `γ_d <= λ-1+λγ_e`
    pub conventional_outage: u64,
}

impl SecrecyCounts {
    fn merge(self, o: Self) -> Self {
        Self {
            samples: self.samples + o.samples,
            reliable: self.reliable + o.reliable,
            leaked: self.leaked + o.leaked,
            secure: self.secure + o.secure,
            conventional_outage: self.conventional_outage + o.conventional_outage,
        }
    }

    pub fn modified(&self) -> Result<McEstimate> {
        if self.reliable < MIN_CONDITIONING_SAMPLES {
            return Err(Error::InsufficientConditioningSamples {
                survivors: self.reliable,
                required: MIN_CONDITIONING_SAMPLES,
            });
        }
        Ok(McEstimate::from_counts(self.leaked, self.reliable))
    }

    pub fn conventional(&self) -> McEstimate {
        McEstimate::from_counts(self.conventional_outage, self.samples)
    }
}

/// Draws `cfg.samples` independent pairs and counts the secrecy events.
pub fn mc_secrecy_counts(
    s: &SecrecyScenario,
    budget_d: LinkBudget,
    budget_e: LinkBudget,
    cfg: &McConfig,
) -> Result<SecrecyCounts> {
    s.validate()?;
    cfg.validate()?;
    let d = FtrSampler::new(&s.d_link, budget_d)?;
    let e = FtrSampler::new(&s.e_link, budget_e)?;
    let lambda = s.cfg.lambda;
    let mu = s.cfg.mu;
    let per_batch: Vec<SecrecyCounts> = cfg
        .batches()
        .map(|(b, n)| {
            let mut rng_d = stream_rng(cfg.seed, b, 0);
            let mut rng_e = stream_rng(cfg.seed, b, 1);
            let mut c = SecrecyCounts {
                samples: n,
                ..Default::default()
            };
            for _ in 0..n {
                let gd = d.sample(&mut rng_d);
                let ge = e.sample(&mut rng_e);
                let threshold = lambda - 1.0 + lambda * ge;
                if gd <= threshold {
                    c.conventional_outage += 1;
                }
                if gd > mu {
                    c.reliable += 1;
                    if gd < threshold {
                        c.leaked += 1;
                    } else {
                        c.secure += 1;
                    }
                }
            }
            c
        })
        .collect();
    Ok(per_batch
        .into_iter()
        .fold(SecrecyCounts::default(), SecrecyCounts::merge))
}

/// Empirical modified SOP, `#{μ < γ_d < λ-1+λγ_e} / #{γ_d > μ}`.
pub fn mc_modified_sop(
    s: &SecrecyScenario,
    budget_d: LinkBudget,
    budget_e: LinkBudget,
    cfg: &McConfig,
) -> Result<McEstimate> {
    mc_secrecy_counts(s, budget_d, budget_e, cfg)?.modified()
}

/// Empirical conventional SOP, `#{γ_d <= λ-1+λγ_e} / samples`.
pub fn mc_conventional_sop(
    s: &SecrecyScenario,
    budget_d: LinkBudget,
    budget_e: LinkBudget,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(mc_secrecy_counts(s, budget_d, budget_e, cfg)?.conventional())
}

/// Empirical CDF of one link at each point of `xs`.
pub fn mc_cdf(
    p: &FtrParams,
    budget: LinkBudget,
    xs: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    cfg.validate()?;
    let sampler = FtrSampler::new(p, budget)?;
    let per_batch: Vec<Vec<u64>> = cfg
        .batches()
        .map(|(b, n)| {
            let mut rng = stream_rng(cfg.seed, b, 0);
            let mut hits = vec![0u64; xs.len()];
            for _ in 0..n {
                let g = sampler.sample(&mut rng);
                for (h, &x) in hits.iter_mut().zip(xs) {
                    if g <= x {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .collect();
    let mut totals = vec![0u64; xs.len()];
    for hits in per_batch {
        for (t, h) in totals.iter_mut().zip(hits) {
            *t += h;
        }
    }
    Ok(totals
        .into_iter()
        .map(|h| McEstimate::from_counts(h, cfg.samples))
        .collect())
}

/// Sample mean and unbiased sample variance of the SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrMoments {
    pub mean: f64,
    pub variance: f64,
    pub samples: u64,
}

impl SnrMoments {
    pub fn std_error(&self) -> f64 {
        (self.variance / self.samples as f64).sqrt()
    }
}

pub fn mc_snr_moments(p: &FtrParams, budget: LinkBudget, cfg: &McConfig) -> Result<SnrMoments> {
    cfg.validate()?;
    let sampler = FtrSampler::new(p, budget)?;
    // Per-batch (n, mean, M2), merged in batch order with Chan's update.
    let per_batch: Vec<(f64, f64, f64)> = cfg
        .batches()
        .map(|(b, n)| {
            let mut rng = stream_rng(cfg.seed, b, 0);
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..n {
                let g = sampler.sample(&mut rng);
                let delta = g - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (g - mean);
            }
            (n as f64, mean, m2)
        })
        .collect();
    let (n, mean, m2) =
        per_batch
            .into_iter()
            .fold((0.0, 0.0, 0.0), |(na, ma, sa), (nb, mb, sb)| {
                let n = na + nb;
                let delta = mb - ma;
                (
                    n,
                    ma + delta * nb / n,
                    sa + sb + delta * delta * na * nb / n,
                )
            });
    Ok(SnrMoments {
        mean,
        variance: m2 / (n - 1.0).max(1.0),
        samples: cfg.samples,
    })
}
