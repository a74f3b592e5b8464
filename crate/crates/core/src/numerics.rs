//! Special functions used by the distribution code: the standard normal
//! density and distribution, the regularized incomplete gamma function, and
//! the noncentral chi-squared CDF.
//!
//! Everything here is a pure function of its arguments.

use crate::error::{Result, SabrError};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal distribution function.
///
/// Evaluated through `erfc` so that the lower tail keeps full relative
/// precision down to the underflow threshold.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(t^2) erfc(t)`.
pub(crate) fn erfcx(t: f64) -> f64 {
    if t < 0.0 {
        return 2.0 * (t * t).exp() - erfcx(-t);
    }
    if t < 5.0 {
        return (t * t).exp() * libm::erfc(t);
    }
    // Laplace continued fraction, evaluated bottom-up.
    let mut f = t;
    for n in (1..=60).rev() {
        f = t + 0.5 * n as f64 / f;
    }
    FRAC_1_SQRT_PI / f
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln(1 + e) - e` without cancellation for small `e`.
fn log1pmx(e: f64) -> f64 {
    if e.abs() > 0.5 {
        return e.ln_1p() - e;
    }
    // With t = e / (2 + e): ln(1+e) = 2 atanh(t) and e = 2t / (1 - t).
    let t = e / (2.0 + e);
    let t2 = t * t;
    let mut odd = 0.0;
    let mut pow = t * t2;
    let mut k = 3.0;
    while pow.abs() > 1e-18 * t2 {
        odd += pow / k;
        pow *= t2;
        k += 2.0;
    }
    2.0 * odd - 2.0 * t2 / (1.0 - t)
}

/// `ln Γ(a+1) - [a ln a - a + ln(2πa)/2]` for `a >= 10`.
fn stirling_correction(a: f64) -> f64 {
    let r = 1.0 / a;
    let r2 = r * r;
    r * (1.0 / 12.0
        + r2 * (-1.0 / 360.0
            + r2 * (1.0 / 1260.0
                + r2 * (-1.0 / 1680.0
                    + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0 + r2 / 156.0))))))
}

/// `x^a e^{-x} / Γ(a+1)`, the common prefactor of the incomplete gamma
/// series and of Poisson masses (`a = k`, `x = λ`).
pub fn gamma_power_term(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if a == 0.0 { 1.0 } else { 0.0 };
    }
    if a < 10.0 {
        return (a * x.ln() - x - ln_gamma(a + 1.0)).exp();
    }
    let e = (x - a) / a;
    let lnv = a * log1pmx(e)
        - 0.5 * (2.0 * std::f64::consts::PI * a).ln()
        - stirling_correction(a);
    lnv.exp()
}

fn check_gamma_args(x: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(SabrError::domain("incomplete gamma shape", alpha));
    }
    if !(x >= 0.0) {
        return Err(SabrError::domain("incomplete gamma argument", x));
    }
    Ok(())
}

fn gamma_iteration_cap(alpha: f64) -> usize {
    10_000 + (50.0 * alpha.sqrt()) as usize
}

/// Series part: P(x; a) for x < a + 1.
fn lower_series(x: f64, alpha: f64) -> Result<f64> {
    let cap = gamma_iteration_cap(alpha);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut denom = alpha;
    for _ in 0..cap {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term < sum * 1e-17 {
            return Ok(gamma_power_term(alpha, x) * sum);
        }
    }
    Err(SabrError::NonConvergence {
        what: "incomplete gamma series",
        iterations: cap,
    })
}

/// Continued-fraction part: Q(x; a) for x >= a + 1 (modified Lentz).
fn upper_fraction(x: f64, alpha: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let cap = gamma_iteration_cap(alpha);
    let mut b = x + 1.0 - alpha;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..cap {
        let an = -(i as f64) * (i as f64 - alpha);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            // x^a e^{-x} / Γ(a) = a * gamma_power_term(a, x)
            return Ok(alpha * gamma_power_term(alpha, x) * h);
        }
    }
    Err(SabrError::NonConvergence {
        what: "incomplete gamma continued fraction",
        iterations: cap,
    })
}

/// Regularized lower incomplete gamma function `γ(α, x) / Γ(α)`, i.e. the
/// CDF of a unit-scale gamma variable with shape `alpha`.
pub fn reg_gamma_lower(x: f64, alpha: f64) -> Result<f64> {
    check_gamma_args(x, alpha)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < alpha + 1.0 {
        lower_series(x, alpha).map(|p| p.min(1.0))
    } else {
        upper_fraction(x, alpha).map(|q| (1.0 - q).clamp(0.0, 1.0))
    }
}

/// Regularized upper incomplete gamma function `1 - reg_gamma_lower`,
/// computed without cancellation in the right tail.
pub fn reg_gamma_upper(x: f64, alpha: f64) -> Result<f64> {
    check_gamma_args(x, alpha)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < alpha + 1.0 {
        lower_series(x, alpha).map(|p| (1.0 - p).clamp(0.0, 1.0))
    } else {
        upper_fraction(x, alpha).map(|q| q.min(1.0))
    }
}

/// Degrees of freedom and noncentrality of a noncentral chi-squared law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ncx2Params {
    dof: f64,
    noncentrality: f64,
}

impl Ncx2Params {
    pub fn new(dof: f64, noncentrality: f64) -> Result<Self> {
        if !(dof > 0.0) || !dof.is_finite() {
            return Err(SabrError::domain("ncx2 degrees of freedom", dof));
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return Err(SabrError::domain("ncx2 noncentrality", noncentrality));
        }
        Ok(Self { dof, noncentrality })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    /// Bessel order `δ/2 - 1` of the density.
    pub fn bessel_order(&self) -> f64 {
        0.5 * self.dof - 1.0
    }
}

const NCX2_TAIL_TOL: f64 = 1e-14;

/// Noncentral chi-squared CDF as a Poisson mixture of central chi-squared
/// CDFs. Summation starts at the modal Poisson index and walks outward in
/// both directions until the neglected Poisson mass is below tolerance.
pub fn ncx2_cdf(x: f64, params: Ncx2Params) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(SabrError::domain("ncx2 argument", x));
    }
    let y = 0.5 * x;
    let a0 = 0.5 * params.dof;
    let lambda = 0.5 * params.noncentrality;
    if y == 0.0 {
        return Ok(0.0);
    }
    if y.is_infinite() {
        return Ok(1.0);
    }
    if lambda == 0.0 {
        return reg_gamma_lower(y, a0);
    }

    let cap = (10.0 * params.noncentrality) as usize + 1000;
    let k0 = lambda.floor();
    let w0 = gamma_power_term(k0, lambda);
    let p0 = reg_gamma_lower(y, a0 + k0)?;
    let t0 = gamma_power_term(a0 + k0, y);
    let mut sum = w0 * p0;
    let mut iterations = 0usize;

    // Upward: P(y; a+1) = P(y; a) - y^a e^{-y} / Γ(a+1).
    let (mut k, mut w, mut p, mut t) = (k0, w0, p0, t0);
    loop {
        let q = lambda / (k + 1.0);
        if q < 1.0 && p * w * q / (1.0 - q) < NCX2_TAIL_TOL {
            break;
        }
        if w == 0.0 && k > lambda {
            break;
        }
        iterations += 1;
        if iterations > cap {
            return Err(SabrError::NonConvergence {
                what: "noncentral chi-squared series",
                iterations: cap,
            });
        }
        w *= q;
        p = (p - t).max(0.0);
        t *= y / (a0 + k + 1.0);
        k += 1.0;
        sum += w * p;
        if p == 0.0 {
            break;
        }
    }

    // Downward: P(y; a-1) = P(y; a) + y^{a-1} e^{-y} / Γ(a).
    let (mut k, mut w, mut p, mut t) = (k0, w0, p0, t0);
    while k > 0.0 {
        let q = k / lambda;
        if q < 1.0 && w * q / (1.0 - q) < NCX2_TAIL_TOL {
            break;
        }
        iterations += 1;
        if iterations > cap {
            return Err(SabrError::NonConvergence {
                what: "noncentral chi-squared series",
                iterations: cap,
            });
        }
        w *= q;
        t *= (a0 + k) / y;
        p = (p + t).min(1.0);
        k -= 1.0;
        sum += w * p;
    }

    Ok(sum.clamp(0.0, 1.0))
}

/// Modified Bessel function of the first kind by its power series.
///
/// Only used to cross-check distribution identities in tests; it makes no
/// attempt at efficiency for large arguments.
pub fn bessel_i(alpha: f64, z: f64) -> Result<f64> {
    if !(alpha > -1.0) {
        return Err(SabrError::domain("bessel order", alpha));
    }
    if !(z >= 0.0) {
        return Err(SabrError::domain("bessel argument", z));
    }
    if z == 0.0 {
        return if alpha == 0.0 {
            Ok(1.0)
        } else if alpha > 0.0 {
            Ok(0.0)
        } else {
            Err(SabrError::Overflow { what: "bessel_i" })
        };
    }
    let half = 0.5 * z;
    let quarter_sq = half * half;
    let mut term = (alpha * half.ln() - ln_gamma(alpha + 1.0)).exp();
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= quarter_sq / (k * (k + alpha));
        sum += term;
        if !sum.is_finite() {
            return Err(SabrError::Overflow { what: "bessel_i" });
        }
        if k > half && term < sum * 1e-17 {
            break;
        }
    }
    Ok(sum)
}
