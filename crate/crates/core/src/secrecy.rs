//! Secrecy outage probabilities.
//!
//! With `λ = 2^{R_s}` and reliability threshold `μ`, the modified secrecy
//! outage probability is
//!
//! ```text
//! SOP = Pr{μ < γ_d < λ-1+λγ_e} / Pr{γ_d > μ}
//! ```
//!
//! and the conventional one is `Pr{γ_d <= λ-1+λγ_e}`. The closed form and the
//! quadrature route below share only the FTR distribution layer; the
//! quadrature treats the CDF and PDF as black boxes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ftr::{
    sigma2_from_avg_snr, truncated_sum, FtrDistribution, FtrParams, LinkBudget, Truncation,
};
use crate::quadrature::{integrate_to_infinity, QuadOptions};
use crate::special::{ln_gamma_pos, log_add_exp, LogSum, SignedLog};

/// Target secrecy rate and reliability threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecrecyConfig {
    /// Confidential rate `R_s` in bits per channel use.
    pub rs: f64,
    /// Reliable-decoding SNR threshold `μ` (linear).
    pub mu: f64,
    /// `λ = 2^{R_s}`.
    pub lambda: f64,
}

impl SecrecyConfig {
    pub fn new(rs: f64, mu: f64) -> Result<Self> {
        if !(rs.is_finite() && rs >= 0.0) {
            return Err(invalid("rs", format!("must be finite and >= 0, got {rs}")));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(invalid("mu", format!("must be finite and >= 0, got {mu}")));
        }
        Ok(Self {
            rs,
            mu,
            lambda: rs.exp2(),
        })
    }

    fn validate(&self) -> Result<()> {
        let again = Self::new(self.rs, self.mu)?;
        if again.lambda != self.lambda {
            return Err(invalid("lambda", "must equal 2^rs"));
        }
        Ok(())
    }

    /// `(μ+1)/λ - 1`, the eavesdropper SNR above which leakage is possible.
    /// Negative when `μ < λ - 1`.
    pub fn wiretap_threshold(&self) -> f64 {
        (self.mu + 1.0) / self.lambda - 1.0
    }

    /// [`Self::wiretap_threshold`] clamped at zero, since `γ_e >= 0`.
    pub fn clamped_wiretap_threshold(&self) -> f64 {
        self.wiretap_threshold().max(0.0)
    }
}

/// Legitimate and eavesdropper links with the secrecy targets.
///
/// Link parameters are in SNR units: `σ²` here is `(P_t/N_0)·σ²`, so that
/// `2σ²` is the scale of the instantaneous SNR itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecrecyScenario {
    pub d_link: FtrParams,
    pub e_link: FtrParams,
    pub cfg: SecrecyConfig,
    pub trunc: Truncation,
}

impl SecrecyScenario {
    pub fn new(
        d_link: FtrParams,
        e_link: FtrParams,
        cfg: SecrecyConfig,
        trunc: Truncation,
    ) -> Result<Self> {
        let s = Self {
            d_link,
            e_link,
            cfg,
            trunc,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.d_link.validate()?;
        self.e_link.validate()?;
        self.cfg.validate()?;
        self.trunc.validate()
    }

    fn distributions(&self) -> Result<(FtrDistribution, FtrDistribution)> {
        self.validate()?;
        Ok((
            FtrDistribution::new(self.d_link, self.trunc)?,
            FtrDistribution::new(self.e_link, self.trunc)?,
        ))
    }

    /// Same scenario with the legitimate link's `σ²` set from an average SNR.
    pub fn with_avg_snr_d(&self, avg_snr_db: f64) -> Self {
        let sigma2 = sigma2_from_avg_snr(avg_snr_db, LinkBudget::default(), &self.d_link);
        Self {
            d_link: self.d_link.with_sigma2(sigma2),
            ..*self
        }
    }

    /// Same scenario with the eavesdropper link's `σ²` set from an average SNR.
    pub fn with_avg_snr_e(&self, avg_snr_db: f64) -> Self {
        let sigma2 = sigma2_from_avg_snr(avg_snr_db, LinkBudget::default(), &self.e_link);
        Self {
            e_link: self.e_link.with_sigma2(sigma2),
            ..*self
        }
    }
}

fn clamp_probability(v: f64, what: &str) -> f64 {
    let clamped = v.clamp(0.0, 1.0);
    if (clamped - v).abs() > 1e-9 {
        log::warn!("{what} clamped from {v:e} to {clamped}");
    }
    clamped
}

/// `ln Q(n, x)` for `n = 1, 2, …`, grown on demand by the recurrence
/// `Q(n+1, x) = Q(n, x) + e^{-x} x^n / n!`.
struct UpperGammaLadder {
    x: f64,
    ln_q: Vec<f64>,
}

impl UpperGammaLadder {
    fn new(x: f64) -> Self {
        Self {
            x,
            ln_q: Vec::new(),
        }
    }

    fn ln_q(&mut self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        if self.x == 0.0 {
            return 0.0;
        }
        while self.ln_q.len() < n {
            let k = self.ln_q.len();
            let kf = k as f64;
            let ln_term = kf * self.x.ln() - self.x - ln_gamma_pos(kf + 1.0);
            let prev = self.ln_q.last().copied().unwrap_or(f64::NEG_INFINITY);
            self.ln_q.push(log_add_exp(prev, ln_term));
        }
        self.ln_q[n - 1]
    }
}

/// Modified secrecy outage probability in closed form.
///
/// The quadruple series over `(j_d, n_d, k, j_e)` is regrouped as
///
/// ```text
/// S = e^{-(λ-1)/2σ_d²} Σ_{j_e} c_{j_e} Σ_k λ^k A_k Γ(j_e+k+1, β a) / β^{j_e+k+1}
/// A_k = (1/k!) Σ_{n>=k} (λ-1)^{n-k} / ((n-k)! (2σ_d²)^n) · Σ_{j_d>=n} w_{d,j_d}
/// ```
///
/// with `β = λ/2σ_d² + 1/2σ_e²`, `a` the clamped wiretap threshold and
/// `c_{j_e} = w_{e,j_e} / (j_e! (2σ_e²)^{j_e+1})`, so that
/// `SOP = F̄_e(a) - S / F̄_d(μ)`. Each `j_e` block is bounded by `w_{e,j_e}`,
/// so the outer series truncates like the weights themselves.
pub fn modified_sop(s: &SecrecyScenario) -> Result<f64> {
    let (d, e) = s.distributions()?;
    let cfg = &s.cfg;
    let lambda = cfg.lambda;
    let a = cfg.clamped_wiretap_threshold();
    let theta_d = s.d_link.scale();
    let theta_e = s.e_link.scale();

    let ccdf_e = e.ccdf(a)?;
    let ccdf_d_mu = d.ccdf(cfg.mu)?;
    if ccdf_d_mu <= 0.0 {
        return Err(Error::Domain("Pr{γ_d > μ} underflowed to zero".into()));
    }

    let wd = d.ln_weights()?;
    let jd = wd.len();

    // ln Σ_{j >= n} w_{d,j}
    let mut ln_tail = vec![SignedLog::zero(); jd];
    let mut acc = LogSum::new();
    for n in (0..jd).rev() {
        acc.add(wd[n].ln_abs, wd[n].negative);
        ln_tail[n] = SignedLog {
            ln_abs: acc.ln_abs(),
            negative: acc.is_negative(),
        };
    }

    let ln_lm1 = (lambda - 1.0).ln();
    let ln_theta_d = theta_d.ln();
    let mut ln_a = Vec::with_capacity(jd);
    for k in 0..jd {
        let mut sum = LogSum::new();
        for (n, tail) in ln_tail.iter().enumerate().skip(k) {
            if tail.is_zero() {
                continue;
            }
            let gap = n - k;
            let ln_pow = if gap == 0 {
                0.0
            } else if lambda == 1.0 {
                break;
            } else {
                gap as f64 * ln_lm1
            };
            sum.add(
                ln_pow - ln_gamma_pos(gap as f64 + 1.0) - n as f64 * ln_theta_d + tail.ln_abs,
                tail.negative,
            );
        }
        ln_a.push(SignedLog {
            ln_abs: sum.ln_abs() - ln_gamma_pos(k as f64 + 1.0),
            negative: sum.is_negative(),
        });
    }

    let beta = lambda / theta_d + 1.0 / theta_e;
    let ln_beta = beta.ln();
    let ln_lambda = lambda.ln();
    let mut ladder = UpperGammaLadder::new(beta * a);

    let total = truncated_sum(&s.trunc, |je| {
        let w = e.ln_weight(je)?;
        if w.is_zero() {
            return Ok(SignedLog::zero());
        }
        let jef = je as f64;
        let ln_c = w.ln_abs - ln_gamma_pos(jef + 1.0) - (jef + 1.0) * theta_e.ln();
        let mut block = LogSum::new();
        for (k, ak) in ln_a.iter().enumerate() {
            if ak.is_zero() {
                continue;
            }
            let n = je + k + 1;
            let nf = n as f64;
            let ln_term =
                k as f64 * ln_lambda + ak.ln_abs + ln_gamma_pos(nf) + ladder.ln_q(n) - nf * ln_beta;
            block.add(ln_term, ak.negative);
        }
        Ok(SignedLog {
            ln_abs: ln_c + block.ln_abs(),
            negative: w.negative ^ block.is_negative(),
        })
    })?;

    let series = (total.ln_abs() - (lambda - 1.0) / theta_d).exp();
    let series = if total.is_negative() { -series } else { series };
    Ok(clamp_probability(
        ccdf_e - series / ccdf_d_mu,
        "modified SOP",
    ))
}

fn quad_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_subdivisions: 4000,
    }
}

/// `∫_{lower}^∞ F_d(λ-1+λy) f_e(y) dy` by adaptive quadrature.
fn leakage_integral(
    d: &FtrDistribution,
    e: &FtrDistribution,
    lambda: f64,
    lower: f64,
) -> Result<f64> {
    // Beyond `cutoff` the remaining mass of f_e is below TAIL_MASS, two
    // orders under the quadrature's absolute tolerance. Grown in small steps
    // so the series are not asked for points far past the needed range.
    const TAIL_MASS: f64 = 1e-15;
    let mut cutoff = (lower + 10.0 * e.mean()).max(1e-3);
    let mut guard = 0;
    while e.ccdf(cutoff)? >= TAIL_MASS {
        cutoff *= 1.1;
        guard += 1;
        if guard > 500 {
            return Err(Error::Domain("eavesdropper tail does not decay".into()));
        }
    }
    let result = integrate_to_infinity(
        |y| {
            if y > cutoff {
                return Ok(0.0);
            }
            let f = e.pdf(y)?;
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(d.cdf(lambda - 1.0 + lambda * y)? * f)
        },
        lower,
        e.mean(),
        quad_options(),
    )?;
    Ok(result.value)
}

/// Modified SOP from its integral form, with the CDF and PDF evaluated as
/// black boxes inside an adaptive quadrature.
pub fn modified_sop_quadrature(s: &SecrecyScenario) -> Result<f64> {
    let (d, e) = s.distributions()?;
    let cfg = &s.cfg;
    let a = cfg.clamped_wiretap_threshold();
    let integral = leakage_integral(&d, &e, cfg.lambda, a)?;
    let ccdf_d_mu = d.ccdf(cfg.mu)?;
    if ccdf_d_mu <= 0.0 {
        return Err(Error::Domain("Pr{γ_d > μ} underflowed to zero".into()));
    }
    let boundary = d.cdf(cfg.mu)? * e.ccdf(a)?;
    Ok(clamp_probability(
        (integral - boundary) / ccdf_d_mu,
        "modified SOP (quadrature)",
    ))
}

/// Conventional SOP `Pr{γ_d <= λ-1+λγ_e}`; `μ` is ignored.
pub fn conventional_sop(s: &SecrecyScenario) -> Result<f64> {
    let (d, e) = s.distributions()?;
    let v = leakage_integral(&d, &e, s.cfg.lambda, 0.0)?;
    Ok(clamp_probability(v, "conventional SOP"))
}

/// Argument scaling of the incomplete gamma function in the asymptotic SOP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IncGammaScaling {
    /// `Γ(j_e+2, a / 2σ_e²)`, which follows from integrating against `f_e`.
    #[default]
    Divide,
    /// `Γ(j_e+2, a · 2σ_e²)`, the typeset variant; kept for comparison only.
    AsPrinted,
}

/// Asymptotic modified SOP as `γ̄_d → ∞`.
pub fn asop(s: &SecrecyScenario) -> Result<f64> {
    asop_with_scaling(s, IncGammaScaling::Divide)
}

pub fn asop_with_scaling(s: &SecrecyScenario, scaling: IncGammaScaling) -> Result<f64> {
    let (d, e) = s.distributions()?;
    let cfg = &s.cfg;
    let lambda = cfg.lambda;
    let a = cfg.clamped_wiretap_threshold();
    let theta_e = s.e_link.scale();
    // m_d^{m_d} d_0 / Γ(m_d), i.e. the high-SNR CDF slope times 2σ_d².
    let slope = d.asymptotic_slope()?;

    let arg = match scaling {
        IncGammaScaling::Divide => a / theta_e,
        IncGammaScaling::AsPrinted => a * theta_e,
    };
    let mut ladder = UpperGammaLadder::new(arg);
    // Σ_j w_{e,j} / j! · Γ(j+2, arg) = Σ_j w_{e,j} (j+1) Q(j+2, arg)
    let moment = truncated_sum(&s.trunc, |j| {
        let w = e.ln_weight(j)?;
        Ok(SignedLog {
            ln_abs: w.ln_abs + ((j + 1) as f64).ln() + ladder.ln_q(j + 2),
            negative: w.negative,
        })
    })?;
    let first = (lambda - 1.0 - cfg.mu) * e.ccdf(a)?;
    let second = lambda * theta_e * moment.value();
    Ok(slope * (first + second))
}

/// Which SOP evaluator a diversity estimate is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SopMethod {
    ClosedForm,
    Asymptotic,
}

/// Slope-based secrecy diversity order between two average SNRs of the
/// legitimate link, `-(log10 SOP(hi) - log10 SOP(lo)) / ((hi - lo)/10)`.
pub fn diversity_order(
    s: &SecrecyScenario,
    db_lo: f64,
    db_hi: f64,
    method: SopMethod,
) -> Result<f64> {
    if !(db_lo.is_finite() && db_hi.is_finite()) || db_hi <= db_lo {
        return Err(Error::Domain(format!(
            "diversity window needs db_hi > db_lo, got [{db_lo}, {db_hi}]"
        )));
    }
    let eval = |db: f64| -> Result<f64> {
        let scenario = s.with_avg_snr_d(db);
        let v = match method {
            SopMethod::ClosedForm => modified_sop(&scenario)?,
            SopMethod::Asymptotic => asop(&scenario)?,
        };
        if v <= 0.0 {
            return Err(Error::Underflow { avg_snr_db: db });
        }
        Ok(v)
    };
    let lo = eval(db_lo)?;
    let hi = eval(db_hi)?;
    Ok(-(hi.log10() - lo.log10()) / ((db_hi - db_lo) / 10.0))
}
