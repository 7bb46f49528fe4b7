//! Special-function kernel for the FTR series.
//!
//! Everything here is a pure function of its arguments. Log-domain variants
//! (`ln_*`) exist for the series code, which routinely combines factors far
//! outside the `f64` range.
#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};

/// Complex scalar used for the phase factors in the `d_j` double sum.
pub type ComplexScalar = num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_741_8;

/// `zeta(k) - 1` for k = 2..=31.
const ZETA_MINUS_ONE: [f64; 30] = [
    0.644_934_066_848_226_436_5,
    0.202_056_903_159_594_285_4,
    0.082_323_233_711_138_191_52,
    0.036_927_755_143_369_926_33,
    0.017_343_061_984_449_139_72,
    0.008_349_277_381_922_826_840,
    0.004_077_356_197_944_339_379,
    0.002_008_392_826_082_214_418,
    0.000_994_575_127_818_085_337_2,
    0.000_494_188_604_119_464_558_7,
    0.000_246_086_553_308_048_298_6,
    0.000_122_713_347_578_489_146_8,
    0.000_061_248_135_058_704_829_26,
    0.000_030_588_236_307_020_493_55,
    0.000_015_282_259_408_651_871_73,
    7.637_197_637_899_762_274e-6,
    3.817_293_264_999_839_857e-6,
    1.908_212_716_553_938_926e-6,
    9.539_620_338_727_961_132e-7,
    4.769_329_867_878_064_631e-7,
    2.384_505_027_277_329_900e-7,
    1.192_199_259_653_110_731e-7,
    5.960_818_905_125_947_961e-8,
    2.980_350_351_465_228_019e-8,
    1.490_155_482_836_504_124e-8,
    7.450_711_789_835_429_492e-9,
    3.725_334_024_788_457_055e-9,
    1.862_659_723_513_049_006e-9,
    9.313_274_324_196_681_829e-10,
    4.656_629_065_033_784_073e-10,
];

/// Natural log of the gamma function for `a > 0`.
pub fn ln_gamma(a: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!(
            "ln_gamma requires a finite a > 0, got {a}"
        )));
    }
    Ok(ln_gamma_pos(a))
}

/// `ln Γ(a)` for a known-positive finite argument.
pub(crate) fn ln_gamma_pos(a: f64) -> f64 {
    debug_assert!(a > 0.0);
    if a == 1.0 || a == 2.0 {
        return 0.0;
    }
    if a < 0.5 {
        return ln_gamma_pos(a + 1.0) - a.ln();
    }
    if a <= 2.5 {
        // Taylor series about 2 keeps full relative accuracy near the roots at 1 and 2.
        return if a >= 1.5 {
            ln_gamma_two_plus(a - 2.0)
        } else {
            let z = a - 1.0;
            ln_gamma_two_plus(z) - z.ln_1p()
        };
    }
    if a < 10.0 {
        let mut shifted = a;
        let mut prod = 1.0;
        while shifted < 10.0 {
            prod *= shifted;
            shifted += 1.0;
        }
        return stirling(shifted) - prod.ln();
    }
    stirling(a)
}

/// `ln Γ(2 + z)` for `|z| <= 0.5`.
fn ln_gamma_two_plus(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut zk = z;
    for (i, zeta) in ZETA_MINUS_ONE.iter().enumerate() {
        let k = (i + 2) as f64;
        zk *= z;
        let term = zeta * zk / k;
        sum += if i % 2 == 0 { term } else { -term };
    }
    z * (1.0 - EULER_GAMMA) + sum
}

fn stirling(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r
        * (1.0 / 12.0
            + r2 * (-1.0 / 360.0
                + r2 * (1.0 / 1260.0
                    + r2 * (-1.0 / 1680.0
                        + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 / 156.0))))));
    (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + series
}

/// `ln(e^a + e^b)` with `-inf` as the additive identity.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Sign-aware log-sum-exp accumulator.
///
/// Positive and negative contributions are kept as separate log-magnitudes so
/// that terms spanning hundreds of orders of magnitude can be combined without
/// overflow, and so that the final cancellation happens exactly once.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    ln_pos: f64,
    ln_neg: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self {
            ln_pos: f64::NEG_INFINITY,
            ln_neg: f64::NEG_INFINITY,
        }
    }

    /// Adds `sign * exp(ln_mag)`.
    pub fn add(&mut self, ln_mag: f64, negative: bool) {
        if negative {
            self.ln_neg = log_add_exp(self.ln_neg, ln_mag);
        } else {
            self.ln_pos = log_add_exp(self.ln_pos, ln_mag);
        }
    }

    pub fn add_positive(&mut self, ln_mag: f64) {
        self.add(ln_mag, false);
    }

    /// Log of the absolute value of the accumulated sum.
    pub fn ln_abs(&self) -> f64 {
        if self.ln_neg == f64::NEG_INFINITY {
            return self.ln_pos;
        }
        if self.ln_pos == f64::NEG_INFINITY {
            return self.ln_neg;
        }
        let (hi, lo) = if self.ln_pos >= self.ln_neg {
            (self.ln_pos, self.ln_neg)
        } else {
            (self.ln_neg, self.ln_pos)
        };
        hi + (-(lo - hi).exp_m1()).ln()
    }

    pub fn is_negative(&self) -> bool {
        self.ln_neg > self.ln_pos
    }

    pub fn value(&self) -> f64 {
        let mag = self.ln_abs().exp();
        if self.is_negative() {
            -mag
        } else {
            mag
        }
    }
}

/// `ln Q(n, x)` where `Q` is the regularized upper incomplete gamma function
/// for integer shape `n >= 1`: `Q(n, x) = e^{-x} Σ_{k<n} x^k / k!`.
pub fn ln_reg_upper_int(n: u64, x: f64) -> f64 {
    debug_assert!(n >= 1 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    if x < n as f64 {
        // P is the smaller side here and has a cancellation-free series.
        return (-lower_series(n, x).exp()).ln_1p();
    }
    ln_upper_finite_sum(n, x)
}

/// `ln P(n, x)`, the regularized lower incomplete gamma function for integer
/// shape `n >= 1`.
pub fn ln_reg_lower_int(n: u64, x: f64) -> f64 {
    debug_assert!(n >= 1 && x >= 0.0);
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < n as f64 {
        lower_series(n, x)
    } else {
        (-ln_upper_finite_sum(n, x).exp()).ln_1p()
    }
}

// Q(n, x) = e^{-x} Σ_{k<n} x^k / k!; all terms positive.
fn ln_upper_finite_sum(n: u64, x: f64) -> f64 {
    let ln_x = x.ln();
    let mut acc = LogSum::new();
    let mut ln_term = 0.0;
    acc.add_positive(ln_term);
    for k in 1..n {
        ln_term += ln_x - (k as f64).ln();
        acc.add_positive(ln_term);
    }
    (acc.ln_abs() - x).min(0.0)
}

// P(n, x) = x^n e^{-x} / n! · Σ_k x^k / ((n+1)…(n+k)); positive terms.
fn lower_series(n: u64, x: f64) -> f64 {
    let nf = n as f64;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut k = 1.0;
    loop {
        term *= x / (nf + k);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    (nf * x.ln() - x - ln_gamma_pos(nf + 1.0) + sum.ln()).min(0.0)
}

fn check_upper_args(n: u64, x: f64) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain(format!(
            "incomplete gamma shape must be >= 1, got {n}"
        )));
    }
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!(
            "incomplete gamma argument must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

/// Upper incomplete gamma function `Γ(n, x)` for integer shape `n >= 1`.
pub fn gamma_upper_int(n: u64, x: f64) -> Result<f64> {
    check_upper_args(n, x)?;
    // (n-1)! by direct product while it is representable, so that
    // Γ(n, x) <= Γ(n, 0) holds bit-for-bit.
    let value = if n <= 171 {
        let factorial = (1..n).fold(1.0, |acc, k| acc * k as f64);
        if x == 0.0 {
            factorial
        } else {
            factorial * ln_reg_upper_int(n, x).exp()
        }
    } else {
        (ln_gamma_pos(n as f64) + ln_reg_upper_int(n, x)).exp()
    };
    if !value.is_finite() {
        return Err(Error::Overflow {
            what: "gamma_upper_int",
        });
    }
    Ok(value)
}

/// `ln Γ(n, x)` for integer shape `n >= 1`.
pub fn ln_gamma_upper_int(n: u64, x: f64) -> Result<f64> {
    check_upper_args(n, x)?;
    Ok(ln_gamma_pos(n as f64) + ln_reg_upper_int(n, x))
}

/// Binomial coefficient `C(n, k)` as a float.
///
/// Exact whenever the value fits in a `u128` (every `n <= 120`); beyond that
/// it is evaluated through `ln_gamma`.
pub fn binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!(
            "binomial requires k <= n, got n={n}, k={k}"
        )));
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        match acc.checked_mul((n - k + i) as u128) {
            Some(v) => acc = v / i as u128,
            None => return Ok(ln_binomial(n, k).exp()),
        }
    }
    Ok(acc as f64)
}

pub(crate) fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma_pos(n as f64 + 1.0) - ln_gamma_pos(k as f64 + 1.0) - ln_gamma_pos((n - k) as f64 + 1.0)
}

const LEGENDRE_MAX_ITER: usize = 100_000;

/// A real value stored as `sign * exp(ln_abs)`; `ln_abs = -inf` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub negative: bool,
}

impl SignedLog {
    pub fn zero() -> Self {
        Self {
            ln_abs: f64::NEG_INFINITY,
            negative: false,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }

    pub fn value(&self) -> f64 {
        let mag = self.ln_abs.exp();
        if self.negative {
            -mag
        } else {
            mag
        }
    }
}

/// Associated Legendre function of the first kind `P_ν^μ(x)` for real degree
/// `ν > -1`, integer order `μ` and `1 <= x < 3`.
///
/// Uses the convention for arguments off the cut,
/// `P_ν^μ(x) = (x²-1)^{μ/2} d^μ/dx^μ P_ν(x)` for `μ >= 0`, with no
/// `(-1)^μ` phase. Negative orders follow from
/// `P_ν^{-μ} = Γ(ν-μ+1)/Γ(ν+μ+1) · P_ν^μ`.
pub fn legendre_p(degree: f64, order: i32, x: f64) -> Result<f64> {
    let v = ln_legendre_p(degree, order, x)?;
    let out = v.value();
    if !out.is_finite() {
        return Err(Error::Overflow { what: "legendre_p" });
    }
    Ok(out)
}

/// Log-magnitude and sign of [`legendre_p`]; stays finite when the value
/// itself would under- or overflow.
pub fn ln_legendre_p(degree: f64, order: i32, x: f64) -> Result<SignedLog> {
    if !degree.is_finite() || degree <= -1.0 {
        return Err(Error::Domain(format!(
            "Legendre degree must be > -1, got {degree}"
        )));
    }
    if !x.is_finite() || x < 1.0 {
        return Err(Error::Domain(format!(
            "Legendre argument must be >= 1, got {x}"
        )));
    }
    if x == 1.0 {
        return Ok(if order == 0 {
            SignedLog {
                ln_abs: 0.0,
                negative: false,
            }
        } else {
            SignedLog::zero()
        });
    }
    let z = 0.5 * (1.0 - x);
    if z <= -1.0 {
        return Err(Error::Convergence {
            what: "Legendre hypergeometric series (x >= 3)",
            iterations: 0,
        });
    }

    let n = order.unsigned_abs() as u64;
    let nf = n as f64;
    // P_ν^{-n}(x) = ((x-1)/(x+1))^{n/2} / n! · ₂F₁(-ν, ν+1; 1+n; (1-x)/2)
    let hyp = hypergeometric_legendre(degree, nf, z)?;
    if hyp == 0.0 {
        return Ok(SignedLog::zero());
    }
    let mut ln_abs =
        0.5 * nf * ((x - 1.0).ln() - (x + 1.0).ln()) - ln_gamma_pos(nf + 1.0) + hyp.abs().ln();
    let mut negative = hyp < 0.0;

    if order > 0 {
        // Γ(ν+n+1)/Γ(ν-n+1) = Π_{i=-n+1}^{n} (ν + i); a zero factor means P_ν^n ≡ 0.
        for i in (1 - n as i64)..=(n as i64) {
            let factor = degree + i as f64;
            if factor == 0.0 {
                return Ok(SignedLog::zero());
            }
            ln_abs += factor.abs().ln();
            negative ^= factor < 0.0;
        }
    }
    Ok(SignedLog { ln_abs, negative })
}

/// `₂F₁(-ν, ν+1; 1+n; z)` for `-1 < z <= 0`.
fn hypergeometric_legendre(degree: f64, n: f64, z: f64) -> Result<f64> {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut small_run = 0;
    for i in 0..LEGENDRE_MAX_ITER {
        let fi = i as f64;
        term *= (fi - degree) * (fi + degree + 1.0) / ((fi + 1.0 + n) * (fi + 1.0)) * z;
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Overflow {
                what: "Legendre hypergeometric series",
            });
        }
        if term == 0.0 {
            return Ok(sum);
        }
        // Only trust the stopping test once the term ratio has turned below one.
        if fi > degree && term.abs() <= 1e-17 * sum.abs() {
            small_run += 1;
            if small_run >= 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::Convergence {
        what: "Legendre hypergeometric series",
        iterations: LEGENDRE_MAX_ITER,
    })
}
