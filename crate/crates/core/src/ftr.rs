//! Fluctuating two-ray (FTR) distribution layer.
//!
//! The SNR of an FTR link is a mixture of Gamma(j+1, 2σ²) laws,
//!
//! ```text
//! f(x) = Σ_j w_j · x^j e^{-x/2σ²} / (j! (2σ²)^{j+1}),   w_j = m^m K^j d_j / (Γ(m) j!)
//! ```
//!
//! with `Σ_j w_j = 1`. Everything below evaluates these series in the log
//! domain and truncates them adaptively according to [`Truncation`].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::{
    ln_binomial, ln_gamma_pos, ln_legendre_p, ln_reg_lower_int, log_add_exp, ComplexScalar, LogSum,
    SignedLog,
};

/// Fading parameters of one FTR link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtrParams {
    /// Shape of the unit-mean Gamma fluctuation of the specular waves.
    pub m: f64,
    /// Specular-to-diffuse average power ratio `K`.
    pub k_ratio: f64,
    /// Similarity `Δ ∈ [0, 1]` of the two specular powers.
    pub delta: f64,
    /// Per-dimension variance of the diffuse component; the scale is `2σ²`.
    pub sigma2: f64,
}

impl FtrParams {
    pub fn new(m: f64, k_ratio: f64, delta: f64, sigma2: f64) -> Result<Self> {
        let p = Self {
            m,
            k_ratio,
            delta,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(invalid(
                "m",
                format!("must be finite and > 0, got {}", self.m),
            ));
        }
        if !(self.k_ratio.is_finite() && self.k_ratio >= 0.0) {
            return Err(invalid(
                "k",
                format!("must be finite and >= 0, got {}", self.k_ratio),
            ));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid(
                "delta",
                format!("must lie in [0, 1], got {}", self.delta),
            ));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(invalid(
                "sigma2",
                format!("must be finite and > 0, got {}", self.sigma2),
            ));
        }
        let (arg, _) = self.legendre_argument();
        if !arg.is_finite() || arg < 1.0 {
            return Err(invalid("delta", "Legendre argument is not finite"));
        }
        Ok(())
    }

    /// Distribution scale `2σ²`.
    pub fn scale(&self) -> f64 {
        2.0 * self.sigma2
    }

    pub fn with_sigma2(self, sigma2: f64) -> Self {
        Self { sigma2, ..self }
    }

    /// Converts a physical diffuse power into SNR units, `σ² → (P_t/N_0)σ²`.
    pub fn in_snr_units(self, budget: LinkBudget) -> Self {
        self.with_sigma2(self.sigma2 * budget.pt_over_n0)
    }

    /// Returns `(x, s)` with `s = sqrt((m+K)² - (KΔ)²)` and `x = (m+K)/s`.
    pub fn legendre_argument(&self) -> (f64, f64) {
        let sum = self.m + self.k_ratio;
        let kd = self.k_ratio * self.delta;
        if kd == 0.0 {
            return (1.0, sum);
        }
        let s = ((sum - kd) * (sum + kd)).sqrt();
        (sum / s, s)
    }
}

/// Series truncation policy for the infinite sums over `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub max_terms: usize,
    pub rel_tol: f64,
    /// Consecutive terms whose estimated remaining tail must fall below
    /// `rel_tol` times the running sum.
    pub tail_run: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            max_terms: 10000,
            rel_tol: 1e-12,
            tail_run: 3,
        }
    }
}

impl Truncation {
    pub fn new(max_terms: usize, rel_tol: f64, tail_run: usize) -> Result<Self> {
        let t = Self {
            max_terms,
            rel_tol,
            tail_run,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(invalid("max-terms", "must be >= 1"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(invalid(
                "rel-tol",
                format!("must be finite and > 0, got {}", self.rel_tol),
            ));
        }
        if self.tail_run < 1 {
            return Err(invalid("tail-run", "must be >= 1"));
        }
        Ok(())
    }
}

/// Transmit-power-to-noise ratio `P_t/N_0` (linear).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub pt_over_n0: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { pt_over_n0: 1.0 }
    }
}

impl LinkBudget {
    pub fn new(pt_over_n0: f64) -> Result<Self> {
        if !(pt_over_n0.is_finite() && pt_over_n0 > 0.0) {
            return Err(invalid(
                "pt-over-n0",
                format!("must be finite and > 0, got {pt_over_n0}"),
            ));
        }
        Ok(Self { pt_over_n0 })
    }

    pub fn from_db(db: f64) -> Result<Self> {
        Self::new(db_to_linear(db))
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `σ²` such that the average SNR `(P_t/N_0)(1+K)2σ²` equals `avg_snr_db`.
pub fn sigma2_from_avg_snr(avg_snr_db: f64, budget: LinkBudget, p: &FtrParams) -> f64 {
    db_to_linear(avg_snr_db) / (2.0 * budget.pt_over_n0 * (1.0 + p.k_ratio))
}

/// `i^q` for an integer number of quarter turns.
fn quarter_turn(q: i64) -> ComplexScalar {
    match q.rem_euclid(4) {
        0 => ComplexScalar::new(1.0, 0.0),
        1 => ComplexScalar::new(0.0, 1.0),
        2 => ComplexScalar::new(-1.0, 0.0),
        _ => ComplexScalar::new(0.0, -1.0),
    }
}

/// Result of the double-sum evaluation of `d_j`, scaled by `exp(ln_scale)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DoubleSum {
    pub ln_scale: f64,
    pub sum: ComplexScalar,
    /// `Σ |term|`, same scaling as `sum`.
    pub abs_sum: f64,
}

impl DoubleSum {
    /// `Σ|terms| / |Σ terms|`: digits lost to cancellation.
    pub fn condition(&self) -> f64 {
        self.abs_sum / self.sum.re.abs()
    }
}

pub(crate) fn d_double_sum(p: &FtrParams, j: usize) -> Result<DoubleSum> {
    let (arg, s) = p.legendre_argument();
    let m = p.m;
    let jf = j as f64;
    let degree = jf + m - 1.0;
    let ln_scale = ln_gamma_pos(jf + m) - (jf + m) * s.ln();
    // The specular factor (Δ/2)^k kills every k > 0 when Δ = 0.
    let k_max = if p.delta == 0.0 { 0 } else { j };
    let ln_half_delta = (0.5 * p.delta).ln();

    let mut sum = ComplexScalar::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for k in 0..=k_max {
        let ln_outer =
            ln_binomial(j as u64, k as u64) + if k > 0 { k as f64 * ln_half_delta } else { 0.0 };
        for l in 0..=k {
            let order = k as i64 - 2 * l as i64;
            // At argument 1 only the zero-order Legendre function survives.
            if arg == 1.0 && order != 0 {
                continue;
            }
            let legendre = ln_legendre_p(degree, order as i32, arg)?;
            if legendre.is_zero() {
                continue;
            }
            let ln_mag = ln_outer
                + ln_binomial(k as u64, l as u64)
                + ln_gamma_pos(jf + m + (2 * l) as f64 - k as f64)
                + legendre.ln_abs
                - (jf + m) * s.ln()
                - ln_scale;
            let mag = ln_mag.exp();
            // exp(iπ(2l-k)/2) from the series, times the factor e^{-iπμ/2} that
            // converts the x > 1 Legendre convention to the principal branch.
            let phase = quarter_turn(-order) * quarter_turn(-order);
            let signed = if legendre.negative { -mag } else { mag };
            sum += phase * signed;
            abs_sum += mag;
        }
    }
    Ok(DoubleSum {
        ln_scale,
        sum,
        abs_sum,
    })
}

fn check_imaginary(j: usize, ds: &DoubleSum) -> Result<()> {
    if ds.sum.im.abs() > 1e-9 * ds.sum.re.abs() + 1e-12 * (-ds.ln_scale).exp() {
        return Err(Error::ImaginaryResidue {
            j,
            real: ds.sum.re * ds.ln_scale.exp(),
            imag: ds.sum.im * ds.ln_scale.exp(),
        });
    }
    Ok(())
}

/// Mixture coefficient `d_j` from the finite double sum over `k ∈ [0, j]`,
/// `l ∈ [0, k]` of binomials, gamma functions and associated Legendre
/// functions, accumulated in complex arithmetic.
///
/// Numerically this sum cancels heavily as `j` grows; the series code uses
/// [`d_coeff_angular`] once the cancellation becomes significant.
pub fn d_coeff(p: &FtrParams, j: usize) -> Result<f64> {
    p.validate()?;
    let ds = d_double_sum(p, j)?;
    check_imaginary(j, &ds)?;
    let value = ds.sum.re * ds.ln_scale.exp();
    if !value.is_finite() {
        return Err(Error::Overflow { what: "d_coeff" });
    }
    Ok(value)
}

/// `d_0 = Γ(m) P_{m-1}(x) / s^m`, evaluated directly.
pub fn d0(p: &FtrParams) -> Result<f64> {
    p.validate()?;
    let (arg, s) = p.legendre_argument();
    let legendre = ln_legendre_p(p.m - 1.0, 0, arg)?;
    let v = (ln_gamma_pos(p.m) + legendre.ln_abs - p.m * s.ln()).exp();
    Ok(if legendre.negative { -v } else { v })
}

/// `ln d_j` from the phase-averaged form
/// `d_j = Γ(m+j) · (1/π) ∫_0^π (1+Δcos α)^j (m+K+KΔcos α)^{-(m+j)} dα`,
/// evaluated with the periodic trapezoid rule (all terms positive).
pub(crate) fn ln_d_angular(m: f64, k_ratio: f64, delta: f64, j: usize) -> Result<f64> {
    let jf = j as f64;
    let ln_gamma = ln_gamma_pos(m + jf);
    if delta == 0.0 || k_ratio == 0.0 && j == 0 {
        return Ok(ln_gamma - (m + jf) * (m + k_ratio).ln());
    }
    let exponent = |alpha: f64| -> f64 {
        let c = alpha.cos();
        let numer = if j == 0 {
            0.0
        } else {
            jf * (delta * c).ln_1p()
        };
        numer - (m + jf) * (m + k_ratio + k_ratio * delta * c).ln()
    };
    let trapezoid = |panels: usize| -> f64 {
        let h = PI / panels as f64;
        let values: Vec<f64> = (0..=panels).map(|i| exponent(i as f64 * h)).collect();
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (i, v) in values.iter().enumerate() {
            let w = if i == 0 || i == panels { 0.5 } else { 1.0 };
            total += w * (v - max).exp();
        }
        max + (total / panels as f64).ln()
    };
    let mut panels = 32;
    let mut prev = trapezoid(panels);
    while panels < 1 << 20 {
        panels *= 2;
        let cur = trapezoid(panels);
        // Converged once the change is at rounding level: the log of a huge
        // or tiny value carries ~ε|cur| absolute error, the sum ~ε·panels.
        let noise = f64::EPSILON * (4.0 * cur.abs() + panels as f64);
        if (cur - prev).abs() <= 1e-14 + noise {
            return Ok(ln_gamma + cur);
        }
        prev = cur;
    }
    Err(Error::Convergence {
        what: "phase-averaged d_j",
        iterations: panels,
    })
}

/// `d_j` from the phase-averaged integral representation; an independent
/// route to the same coefficient as [`d_coeff`].
pub fn d_coeff_angular(p: &FtrParams, j: usize) -> Result<f64> {
    p.validate()?;
    let v = ln_d_angular(p.m, p.k_ratio, p.delta, j)?.exp();
    if !v.is_finite() {
        return Err(Error::Overflow {
            what: "d_coeff_angular",
        });
    }
    Ok(v)
}

/// Largest `Σ|terms|/|sum|` accepted from the double sum before the table
/// switches to the phase-averaged route.
const MAX_DOUBLE_SUM_CONDITION: f64 = 1e3;

#[derive(Debug, Default)]
struct TableState {
    ln_weights: Vec<SignedLog>,
    double_sum_usable: bool,
}

/// Lazily grown table of `ln w_j` for one `(m, K, Δ)`.
#[derive(Debug)]
pub(crate) struct CoeffTable {
    shape: FtrParams,
    state: RwLock<TableState>,
}

type ShapeKey = [u64; 3];

fn table_cache() -> &'static Mutex<HashMap<ShapeKey, Arc<CoeffTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<ShapeKey, Arc<CoeffTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl CoeffTable {
    fn for_shape(p: &FtrParams) -> Arc<Self> {
        let key = [p.m.to_bits(), p.k_ratio.to_bits(), p.delta.to_bits()];
        let mut cache = table_cache().lock().expect("coefficient cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| {
                Arc::new(CoeffTable {
                    shape: p.with_sigma2(1.0),
                    state: RwLock::new(TableState {
                        ln_weights: Vec::new(),
                        double_sum_usable: true,
                    }),
                })
            })
            .clone()
    }

    fn ln_weight(&self, j: usize) -> Result<SignedLog> {
        {
            let state = self.state.read().expect("coefficient table poisoned");
            if let Some(w) = state.ln_weights.get(j) {
                return Ok(*w);
            }
        }
        let mut state = self.state.write().expect("coefficient table poisoned");
        let target = (j + 1).next_multiple_of(32);
        while state.ln_weights.len() < target {
            let next = state.ln_weights.len();
            let w = self.compute_weight(next, &mut state.double_sum_usable)?;
            state.ln_weights.push(w);
        }
        Ok(state.ln_weights[j])
    }

    fn compute_weight(&self, j: usize, double_sum_usable: &mut bool) -> Result<SignedLog> {
        let p = &self.shape;
        if p.k_ratio == 0.0 && j > 0 {
            return Ok(SignedLog::zero());
        }
        let mut ln_d = None;
        if *double_sum_usable {
            match d_double_sum(p, j) {
                Ok(ds) if ds.condition() <= MAX_DOUBLE_SUM_CONDITION => {
                    check_imaginary(j, &ds)?;
                    ln_d = Some(SignedLog {
                        ln_abs: ds.ln_scale + ds.sum.re.abs().ln(),
                        negative: ds.sum.re < 0.0,
                    });
                }
                Ok(_) | Err(Error::Convergence { .. }) | Err(Error::Overflow { .. }) => {
                    *double_sum_usable = false;
                }
                Err(e) => return Err(e),
            }
        }
        let ln_d = match ln_d {
            Some(v) => v,
            None => SignedLog {
                ln_abs: ln_d_angular(p.m, p.k_ratio, p.delta, j)?,
                negative: false,
            },
        };
        let jf = j as f64;
        let ln_k_pow = if j == 0 { 0.0 } else { jf * p.k_ratio.ln() };
        Ok(SignedLog {
            ln_abs: p.m * p.m.ln() - ln_gamma_pos(p.m) + ln_k_pow + ln_d.ln_abs
                - ln_gamma_pos(jf + 1.0),
            negative: ln_d.negative,
        })
    }
}

/// Sums `Σ_j sign_j exp(ln_term(j))` under the truncation policy.
///
/// The tail after term `j` is estimated as geometric with the ratio of the
/// last two magnitudes, `|t_j| · max(1, r/(1-r))`; a rising term (`r >= 1`)
/// never counts towards the stopping run. Comparing the bare last term
/// instead under-counts slowly decaying mixtures by the factor `1/(1-r)`.
pub(crate) fn truncated_sum<F>(trunc: &Truncation, mut ln_term: F) -> Result<LogSum>
where
    F: FnMut(usize) -> Result<SignedLog>,
{
    let ln_tol = trunc.rel_tol.ln();
    let mut acc = LogSum::new();
    let mut run = 0;
    let mut prev = f64::NEG_INFINITY;
    for j in 0..trunc.max_terms {
        let t = ln_term(j)?;
        let small = if t.is_zero() {
            true
        } else {
            acc.add(t.ln_abs, t.negative);
            let current = acc.ln_abs();
            let ln_r = t.ln_abs - prev;
            let ln_tail = if !prev.is_finite() {
                t.ln_abs
            } else if ln_r < 0.0 {
                // ln(r / (1 - r)), floored at 0
                t.ln_abs + (ln_r - (-ln_r.exp()).ln_1p()).max(0.0)
            } else {
                f64::INFINITY
            };
            current.is_finite() && ln_tail <= ln_tol + current
        };
        prev = t.ln_abs;
        if small {
            run += 1;
            if run >= trunc.tail_run {
                return Ok(acc);
            }
        } else {
            run = 0;
        }
    }
    Err(Error::Truncation {
        max_terms: trunc.max_terms,
    })
}

/// An FTR link bound to its truncation policy and cached coefficients.
#[derive(Debug, Clone)]
pub struct FtrDistribution {
    params: FtrParams,
    trunc: Truncation,
    table: Arc<CoeffTable>,
}

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("SNR argument must be >= 0, got {x}")));
    }
    Ok(())
}

fn clamp_probability(v: f64, what: &str) -> f64 {
    let clamped = v.clamp(0.0, 1.0);
    if (clamped - v).abs() > 1e-9 {
        log::warn!("{what} clamped from {v:e} to {clamped}");
    }
    clamped
}

impl FtrDistribution {
    pub fn new(params: FtrParams, trunc: Truncation) -> Result<Self> {
        params.validate()?;
        trunc.validate()?;
        Ok(Self {
            table: CoeffTable::for_shape(&params),
            params,
            trunc,
        })
    }

    pub fn params(&self) -> &FtrParams {
        &self.params
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    /// `ln w_j` (with sign) for the Gamma-mixture weight of component `j`.
    pub fn ln_weight(&self, j: usize) -> Result<SignedLog> {
        self.table.ln_weight(j)
    }

    /// Mixture weights up to the point where the truncation policy is met
    /// on the weights themselves.
    pub fn ln_weights(&self) -> Result<Vec<SignedLog>> {
        let mut out = Vec::new();
        truncated_sum(&self.trunc, |j| {
            let w = self.ln_weight(j)?;
            out.push(w);
            Ok(w)
        })?;
        Ok(out)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let theta = self.params.scale();
        if x == 0.0 {
            return Ok(self.ln_weight(0)?.value() / theta);
        }
        let z = x / theta;
        let ln_z = z.ln();
        let acc = truncated_sum(&self.trunc, |j| {
            let w = self.ln_weight(j)?;
            let jf = j as f64;
            Ok(SignedLog {
                ln_abs: w.ln_abs + jf * ln_z - z - ln_gamma_pos(jf + 1.0) - theta.ln(),
                negative: w.negative,
            })
        })?;
        Ok(acc.value().max(0.0))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let z = x / self.params.scale();
        let acc = truncated_sum(&self.trunc, |j| {
            let w = self.ln_weight(j)?;
            Ok(SignedLog {
                ln_abs: w.ln_abs + ln_reg_lower_int(j as u64 + 1, z),
                negative: w.negative,
            })
        })?;
        Ok(clamp_probability(acc.value(), "FTR CDF"))
    }

    pub fn ccdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        if x == 0.0 {
            return Ok(1.0);
        }
        let z = x / self.params.scale();
        let ln_z = z.ln();
        // ln Q(j+1, z) by the recurrence Q(j+1) = Q(j) + e^{-z} z^j / j!.
        let mut ln_q = f64::NEG_INFINITY;
        let acc = truncated_sum(&self.trunc, |j| {
            let jf = j as f64;
            ln_q = log_add_exp(ln_q, jf * ln_z - z - ln_gamma_pos(jf + 1.0));
            let w = self.ln_weight(j)?;
            Ok(SignedLog {
                ln_abs: w.ln_abs + ln_q,
                negative: w.negative,
            })
        })?;
        Ok(clamp_probability(acc.value(), "FTR CCDF"))
    }

    /// Leading-order CDF as `2σ² → ∞`: `m^m d_0 x / (Γ(m) 2σ²)`.
    pub fn cdf_asymptotic(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.asymptotic_slope()? * x)
    }

    /// `m^m d_0 / (Γ(m) 2σ²)`, the coefficient of `x` in the high-SNR CDF.
    pub fn asymptotic_slope(&self) -> Result<f64> {
        let p = &self.params;
        let d = d0(p)?;
        Ok((p.m * p.m.ln() - ln_gamma_pos(p.m)).exp() * d / p.scale())
    }

    /// Mean SNR `(1+K)·2σ²` of the normalized link (unit `P_t/N_0`).
    pub fn mean(&self) -> f64 {
        (1.0 + self.params.k_ratio) * self.params.scale()
    }
}

pub fn ftr_pdf(p: &FtrParams, x: f64, t: &Truncation) -> Result<f64> {
    FtrDistribution::new(*p, *t)?.pdf(x)
}

pub fn ftr_cdf(p: &FtrParams, x: f64, t: &Truncation) -> Result<f64> {
    FtrDistribution::new(*p, *t)?.cdf(x)
}

pub fn ftr_ccdf(p: &FtrParams, x: f64, t: &Truncation) -> Result<f64> {
    FtrDistribution::new(*p, *t)?.ccdf(x)
}

pub fn ftr_cdf_asymptotic(p: &FtrParams, x: f64) -> Result<f64> {
    FtrDistribution::new(*p, Truncation::default())?.cdf_asymptotic(x)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use approx::assert_relative_eq;

    fn fig2(sigma2: f64) -> FtrParams {
        FtrParams::new(3.5, 15.0, 0.5, sigma2).unwrap()
    }

    // mpmath, 40 digits: Γ(m+j)/π ∫_0^π (1+Δcos α)^j (m+K+KΔcos α)^{-(m+j)} dα,
    // cross-checked against the Legendre double sum (principal branch).
    const D_FIG2: [f64; 5] = [
        2.412_638_772_724_512_092_6e-4,
        4.124_507_352_415_725_020_7e-5,
        9.113_157_439_363_014_095_6e-6,
        2.474_696_471_437_588_962_4e-6,
        7.988_312_776_969_090_004_1e-7,
    ];

    #[test]
    fn d_coeff_trivial_cases() {
        let p = FtrParams::new(1.0, 0.0, 0.3, 1.0).unwrap();
        assert_relative_eq!(d_coeff(&p, 0).unwrap(), 1.0, max_relative = 1e-14);
        let p = FtrParams::new(2.3, 4.0, 0.0, 1.0).unwrap();
        let expected = (ln_gamma_pos(2.3) - 2.3 * 6.3f64.ln()).exp();
        assert_relative_eq!(d_coeff(&p, 0).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn d_coeff_matches_high_precision_reference() {
        let p = fig2(1.0);
        for (j, want) in D_FIG2.iter().enumerate() {
            assert_relative_eq!(d_coeff(&p, j).unwrap(), *want, max_relative = 1e-9);
            assert_relative_eq!(d_coeff_angular(&p, j).unwrap(), *want, max_relative = 1e-12);
        }
    }

    #[test]
    fn d_coeff_other_shapes_reference() {
        // mpmath values for (m, K, Δ) = (0.5, 5, 0.5)
        let p = FtrParams::new(0.5, 5.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(
            d_coeff(&p, 0).unwrap(),
            0.788_922_422_303_212_63,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            d_coeff(&p, 3).unwrap(),
            0.008_433_526_724_383_757_5,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            d_coeff_angular(&p, 50).unwrap(),
            2.605_573_126_026_837e26,
            max_relative = 1e-11
        );
    }

    #[test]
    fn d0_two_routes_agree() {
        assert_relative_eq!(
            d0(&FtrParams::new(1.0, 0.0, 0.5, 1.0).unwrap()).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            d0(&FtrParams::new(2.0, 4.0, 0.0, 1.0).unwrap()).unwrap(),
            1.0 / 36.0,
            max_relative = 1e-14
        );
        for (m, k, delta) in [
            (3.5, 15.0, 0.5),
            (0.5, 5.0, 0.5),
            (10.0, 15.0, 0.5),
            (1.3, 2.0, 0.9),
            (2.0, 7.0, 1.0),
        ] {
            let p = FtrParams::new(m, k, delta, 1.0).unwrap();
            assert_relative_eq!(
                d_coeff(&p, 0).unwrap(),
                d0(&p).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn double_sum_has_no_imaginary_residue() {
        let p = FtrParams::new(1.7, 3.0, 0.8, 1.0).unwrap();
        for j in 0..8 {
            let ds = d_double_sum(&p, j).unwrap();
            assert!(ds.sum.im.abs() <= 1e-12 * ds.sum.re.abs());
        }
    }

    #[test]
    fn weights_are_normalized() {
        for (m, k, delta) in [
            (0.5, 5.0, 0.5),
            (3.5, 15.0, 0.5),
            (10.0, 15.0, 0.5),
            (0.7, 30.0, 1.0),
            (2.0, 0.0, 0.5),
        ] {
            let dist = FtrDistribution::new(
                FtrParams::new(m, k, delta, 1.0).unwrap(),
                Truncation::default(),
            )
            .unwrap();
            let mut acc = LogSum::new();
            for w in dist.ln_weights().unwrap() {
                acc.add(w.ln_abs, w.negative);
            }
            assert!(
                (acc.value() - 1.0).abs() < 1e-10,
                "({m},{k},{delta}): {}",
                acc.value()
            );
        }
    }

    #[test]
    fn exponential_special_case() {
        let t = Truncation::default();
        let p = FtrParams::new(1.0, 0.0, 0.5, 0.5).unwrap();
        assert_relative_eq!(
            ftr_pdf(&p, 1.0, &t).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            ftr_cdf(&p, 2.0, &t).unwrap(),
            1.0 - (-2.0f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            ftr_ccdf(&p, 3.0, &t).unwrap(),
            (-3.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn values_at_zero() {
        let t = Truncation::default();
        let p = fig2(0.5);
        assert_eq!(ftr_cdf(&p, 0.0, &t).unwrap(), 0.0);
        assert_eq!(ftr_ccdf(&p, 0.0, &t).unwrap(), 1.0);
        let expected = (3.5 * 3.5f64.ln() - ln_gamma_pos(3.5)).exp() * d0(&p).unwrap() / p.scale();
        assert_relative_eq!(
            ftr_pdf(&p, 0.0, &t).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_eq!(ftr_cdf_asymptotic(&p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_is_rejected() {
        let t = Truncation::default();
        let p = fig2(0.5);
        assert!(matches!(ftr_pdf(&p, -1.0, &t), Err(Error::Domain(_))));
        assert!(matches!(ftr_cdf(&p, -1e-300, &t), Err(Error::Domain(_))));
        assert!(matches!(ftr_ccdf(&p, f64::NAN, &t), Err(Error::Domain(_))));
    }

    #[test]
    fn pdf_matches_finite_difference_of_cdf() {
        let t = Truncation::default();
        let p = fig2(1.0 / 32.0);
        let x = 0.5;
        let h = 1e-5;
        let fd = (ftr_cdf(&p, x + h, &t).unwrap() - ftr_cdf(&p, x - h, &t).unwrap()) / (2.0 * h);
        assert!((ftr_pdf(&p, x, &t).unwrap() - fd).abs() < 1e-6);
    }

    #[test]
    fn pdf_integrates_to_cdf() {
        let t = Truncation::default();
        let p = fig2(0.5);
        let dist = FtrDistribution::new(p, t).unwrap();
        let opts = QuadOptions::default();
        let mut prev = 0.0;
        let mut acc = 0.0;
        for i in 1..=20 {
            let x = 0.75 * i as f64;
            acc += integrate(|y| dist.pdf(y), prev, x, opts).unwrap().value;
            prev = x;
            assert!((acc - dist.cdf(x).unwrap()).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn complement_and_monotonicity() {
        let dist = FtrDistribution::new(
            FtrParams::new(0.5, 5.0, 0.5, 0.5).unwrap(),
            Truncation::default(),
        )
        .unwrap();
        let mut prev = 0.0;
        for i in 0..400 {
            let x = 0.1 * i as f64;
            let c = dist.cdf(x).unwrap();
            let cc = dist.ccdf(x).unwrap();
            assert!((c + cc - 1.0).abs() < 1e-9, "x={x}");
            assert!(c >= prev, "x={x}");
            prev = c;
        }
    }

    #[test]
    fn ccdf_keeps_tail_precision() {
        let dist = FtrDistribution::new(
            FtrParams::new(1.0, 0.0, 0.5, 0.5).unwrap(),
            Truncation::default(),
        )
        .unwrap();
        assert_relative_eq!(
            dist.ccdf(60.0).unwrap(),
            (-60.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn scale_invariance() {
        let t = Truncation::default();
        let a = fig2(3.7);
        let b = fig2(0.5);
        for x in [0.1, 1.0, 4.0, 20.0] {
            let lhs = ftr_cdf(&a, x, &t).unwrap();
            let rhs = ftr_cdf(&b, x / a.scale(), &t).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300),
                "x={x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn asymptotic_cdf_tracks_series() {
        let t = Truncation::default();
        let p = FtrParams::new(1.0, 0.0, 0.5, 50.0).unwrap();
        assert_relative_eq!(
            ftr_cdf_asymptotic(&p, 1.0).unwrap(),
            0.01,
            max_relative = 1e-14
        );
        let x = 2.0;
        let p = fig2(0.5 * 1e4 * x);
        let ratio = ftr_cdf_asymptotic(&p, x).unwrap() / ftr_cdf(&p, x, &t).unwrap();
        assert!((0.98..=1.02).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn sigma2_mapping() {
        let b = LinkBudget::new(1.0).unwrap();
        let p15 = fig2(1.0);
        let p0 = FtrParams::new(1.0, 0.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(
            sigma2_from_avg_snr(0.0, b, &p15),
            1.0 / 32.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(sigma2_from_avg_snr(10.0, b, &p0), 5.0, max_relative = 1e-15);
        assert_relative_eq!(
            2.0 * sigma2_from_avg_snr(5.0, b, &p15),
            10f64.powf(0.5) / 16.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn truncation_failure_is_reported() {
        let t = Truncation::new(5, 1e-12, 3).unwrap();
        let p = FtrParams::new(0.5, 5.0, 0.5, 0.5).unwrap();
        assert!(matches!(
            ftr_ccdf(&p, 1.0, &t),
            Err(Error::Truncation { max_terms: 5 })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(FtrParams::new(0.0, 1.0, 0.5, 1.0).is_err());
        assert!(FtrParams::new(1.0, -1.0, 0.5, 1.0).is_err());
        assert!(FtrParams::new(1.0, 1.0, 1.5, 1.0).is_err());
        assert!(FtrParams::new(1.0, 1.0, 0.5, 0.0).is_err());
        assert!(Truncation::new(0, 1e-12, 3).is_err());
        assert!(Truncation::new(10, 0.0, 3).is_err());
        assert!(LinkBudget::new(-1.0).is_err());
    }

    #[test]
    fn legendre_out_of_range_shape_still_evaluates() {
        // KΔ/(m+K) > 0.943 pushes the Legendre argument past 3; the
        // phase-averaged route takes over inside the table.
        let p = FtrParams::new(1.0, 17.0, 1.0, 0.5).unwrap();
        assert!(p.legendre_argument().0 >= 3.0);
        assert!(matches!(d_coeff(&p, 1), Err(Error::Convergence { .. })));
        let dist = FtrDistribution::new(p, Truncation::default()).unwrap();
        let c = dist.cdf(1.0).unwrap();
        assert!((c + dist.ccdf(1.0).unwrap() - 1.0).abs() < 1e-9);
    }
}
