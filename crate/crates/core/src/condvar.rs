//! The conditional average variance `I = (σ_t² h)^{-1} ∫ σ_s² ds` given the
//! volatility at both ends of a step.
//!
//! Conditioning is expressed through `ν̂ = ν√h` and the standardized log
//! volatility move `Ẑ`, with `σ_{t+h}/σ_t = exp(ν̂ Ẑ)`. The first four raw
//! moments have closed forms in terms of
//!
//! ```text
//! m_k(Ẑ) = [N(Ẑ + kν̂) - N(Ẑ - kν̂)] / (2kν̂ n(√(Ẑ² + k²ν̂²)))
//! ```
//!
//! Those closed forms divide by `ν̂^2`, `ν̂^4` and `ν̂^6` after heavy
//! cancellation, so for small `ν̂` the same expressions are expanded as
//! power series in `ν̂²` and the cancelling leading coefficients are
//! dropped exactly.

use crate::error::{Result, SabrError};
use crate::numerics::erfcx;
use crate::sampling::{sample_normal, RngStream};
use crate::summation::CompensatedSum;

const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Closed forms are used at or above this `ν̂`.
const SERIES_NU_HAT: f64 = 0.5;
/// Hot-path mean/cv switch to the series below this `ν̂`.
const FAST_SERIES_NU_HAT: f64 = 0.05;
const SERIES_TERMS: usize = 40;
const FAST_SERIES_TERMS: usize = 20;

/// Conditioning variables of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondVarInputs {
    nu_hat: f64,
    z_hat: f64,
}

impl CondVarInputs {
    pub fn new(nu_hat: f64, z_hat: f64) -> Result<Self> {
        if !(nu_hat > 0.0) || !nu_hat.is_finite() {
            return Err(SabrError::domain("nu_hat", nu_hat));
        }
        if !z_hat.is_finite() {
            return Err(SabrError::domain("z_hat", z_hat));
        }
        Ok(Self { nu_hat, z_hat })
    }

    /// Build from the realized volatility ratio `σ_{t+h}/σ_t`.
    pub fn from_vol_ratio(nu_hat: f64, vol_ratio: f64) -> Result<Self> {
        if !(vol_ratio > 0.0) || !vol_ratio.is_finite() {
            return Err(SabrError::domain("vol_ratio", vol_ratio));
        }
        Self::new(nu_hat, vol_ratio.ln() / nu_hat)
    }

    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }

    pub fn z_hat(&self) -> f64 {
        self.z_hat
    }

    pub fn vol_ratio(&self) -> f64 {
        (self.nu_hat * self.z_hat).exp()
    }

    fn use_series(&self, threshold: f64) -> bool {
        self.nu_hat < threshold && self.nu_hat * self.z_hat.abs() <= 1.0
    }
}

/// Conditional raw moments of `I` and the derived shape statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mu: f64,
    pub mu2p: f64,
    pub mu3p: f64,
    pub mu4p: f64,
    /// Coefficient of variation, standard deviation over mean.
    pub cv: f64,
    pub skew: f64,
    pub exkurt: f64,
}

impl MomentSet {
    pub fn variance(&self) -> f64 {
        (self.cv * self.mu).powi(2)
    }

    /// Shape statistics recomputed from the raw moments alone.
    pub fn shape_from_raw(&self) -> (f64, f64, f64) {
        let mu = self.mu;
        let var = self.mu2p - mu * mu;
        let c3 = self.mu3p - 3.0 * mu * self.mu2p + 2.0 * mu.powi(3);
        let c4 = self.mu4p - 4.0 * mu * self.mu3p + 6.0 * mu * mu * self.mu2p - 3.0 * mu.powi(4);
        (var.sqrt() / mu, c3 / var.powf(1.5), c4 / (var * var) - 3.0)
    }
}

/// Closed-form `m_k` at `a = kν̂`. Far in the tail the scaled complementary
/// error function keeps `N(·)` and the density from underflowing together.
fn m_closed(a: f64, z: f64) -> f64 {
    // m is even in z; put the evaluation point in the lower tail.
    let x = -z.abs();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    if x > -25.0 {
        let diff = if x + a < 0.0 {
            0.5 * (libm::erfc(-(x + a) * r) - libm::erfc(-(x - a) * r))
        } else {
            1.0 - 0.5 * libm::erfc((a + x) * r) - 0.5 * libm::erfc((a - x) * r)
        };
        return diff * SQRT_2PI * (0.5 * (x * x + a * a)).exp() / (2.0 * a);
    }
    let up = erfcx(-(x + a) * r) * (-x * a).exp();
    let dn = erfcx(-(x - a) * r) * (x * a).exp();
    SQRT_HALF_PI * (up - dn) / (2.0 * a)
}

type Series = Vec<f64>;

fn series_mul(a: &[f64], b: &[f64]) -> Series {
    let n = a.len().min(b.len());
    let mut out = vec![0.0; n];
    for (i, &ai) in a.iter().take(n).enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().take(n - i).enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn series_axpy(out: &mut [f64], scale: f64, a: &[f64]) {
    for (o, &x) in out.iter_mut().zip(a) {
        *o += scale * x;
    }
}

fn series_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Series building blocks in powers of `x = ν̂²`: `cosh(ν̂Ẑ)` and the
/// `k`-independent coefficients `M_n` with `m_k = Σ M_n k^{2n} x^n`.
struct SeriesBasis {
    cosh: Series,
    m: Series,
}

impl SeriesBasis {
    fn new(z: f64, terms: usize) -> Self {
        let z2 = z * z;
        let mut cosh = vec![0.0; terms];
        let mut gauss = vec![0.0; terms];
        let mut shift = vec![0.0; terms];
        let (mut c, mut g, mut e) = (1.0, 1.0, 1.0);
        for n in 0..terms {
            cosh[n] = c;
            gauss[n] = g;
            shift[n] = e;
            let nf = n as f64;
            c *= z2 / ((2.0 * nf + 1.0) * (2.0 * nf + 2.0));
            g *= -0.5 / (nf + 1.0);
            e *= 0.5 / (nf + 1.0);
        }
        // e^{-u²/2} cosh(Ẑu) = Σ g_j u^{2j}; average over [0, a] divides by 2j+1.
        let mut h = series_mul(&gauss, &cosh);
        for (j, hj) in h.iter_mut().enumerate() {
            *hj /= 2.0 * j as f64 + 1.0;
        }
        // times e^{a²/2}
        let m = series_mul(&h, &shift);
        Self { cosh, m }
    }

    fn mk(&self, k: u32) -> Series {
        let k2 = f64::from(k * k);
        let mut p = 1.0;
        self.m
            .iter()
            .map(|&c| {
                let v = c * p;
                p *= k2;
                v
            })
            .collect()
    }
}

/// Normalized moments of `J = I / (σ_{t+h}/σ_t)`: mean and central moments.
#[derive(Debug, Clone, Copy)]
struct Central {
    mean: f64,
    var: f64,
    c3: f64,
    c4: f64,
}

fn drop_leading(mut s: Series, n: usize) -> Series {
    for c in s.iter_mut().take(n) {
        *c = 0.0;
    }
    s
}

fn central_series(inputs: &CondVarInputs, terms: usize, order: usize) -> Central {
    let basis = SeriesBasis::new(inputs.z_hat, terms);
    let x = inputs.nu_hat * inputs.nu_hat;
    let cc = &basis.cosh;
    let p1 = basis.mk(1);
    let p2 = basis.mk(2);

    // j2 = (m2 - c m1) / x
    let mut b2 = p2.clone();
    series_axpy(&mut b2, -1.0, &series_mul(cc, &p1));
    let j1 = p1.clone();
    let j2: Series = b2[1..].to_vec();
    let j1sq = series_mul(&j1, &j1);
    let mut var = j2.clone();
    series_axpy(&mut var, -1.0, &j1sq);
    let var = drop_leading(var, 1);
    if order < 4 {
        return Central {
            mean: series_eval(&j1, x),
            var: series_eval(&var, x),
            c3: f64::NAN,
            c4: f64::NAN,
        };
    }

    let p3 = basis.mk(3);
    let p4 = basis.mk(4);
    let c2 = series_mul(cc, cc);
    let c3s = series_mul(&c2, cc);

    // 8 x² j3 = 3 m3 - 8 c m2 + (4c² + 1) m1
    let mut b3 = vec![0.0; terms];
    series_axpy(&mut b3, 3.0, &p3);
    series_axpy(&mut b3, -8.0, &series_mul(cc, &p2));
    series_axpy(&mut b3, 4.0, &series_mul(&c2, &p1));
    series_axpy(&mut b3, 1.0, &p1);
    // 24 x³ j4 = 2 m4 - 9c m3 + (12c² + 2) m2 - (4c³ + 3c) m1
    let mut b4 = vec![0.0; terms];
    series_axpy(&mut b4, 2.0, &p4);
    series_axpy(&mut b4, -9.0, &series_mul(cc, &p3));
    series_axpy(&mut b4, 12.0, &series_mul(&c2, &p2));
    series_axpy(&mut b4, 2.0, &p2);
    series_axpy(&mut b4, -4.0, &series_mul(&c3s, &p1));
    series_axpy(&mut b4, -3.0, &series_mul(cc, &p1));

    let j3: Series = b3[2..].iter().map(|c| c / 8.0).collect();
    let j4: Series = b4[3..].iter().map(|c| c / 24.0).collect();

    let j1j2 = series_mul(&j1, &j2);
    let j1cube = series_mul(&j1sq, &j1);
    let mut c3 = j3.clone();
    series_axpy(&mut c3, -3.0, &j1j2);
    series_axpy(&mut c3, 2.0, &j1cube);
    let c3 = drop_leading(c3, 2);

    let mut c4 = j4.clone();
    series_axpy(&mut c4, -4.0, &series_mul(&j1, &j3));
    series_axpy(&mut c4, 6.0, &series_mul(&j1sq, &j2));
    series_axpy(&mut c4, -3.0, &series_mul(&j1sq, &j1sq));
    let c4 = drop_leading(c4, 2);

    Central {
        mean: series_eval(&j1, x),
        var: series_eval(&var, x),
        c3: series_eval(&c3, x),
        c4: series_eval(&c4, x),
    }
}

fn central_closed(inputs: &CondVarInputs, order: usize) -> Result<Central> {
    let nu = inputs.nu_hat;
    let z = inputs.z_hat;
    let x = nu * nu;
    let r = (nu * z).exp();
    let c = 0.5 * (r + 1.0 / r);
    let m1 = m_closed(nu, z);
    let m2 = m_closed(2.0 * nu, z);
    let b2 = m2 - c * m1;
    if !(b2 > 0.0) {
        return Err(SabrError::LossOfPrecision {
            what: "second conditional moment",
        });
    }
    let j1 = m1;
    let j2 = b2 / x;
    let var = j2 - j1 * j1;
    if order < 4 {
        return Ok(Central {
            mean: j1,
            var,
            c3: f64::NAN,
            c4: f64::NAN,
        });
    }
    let m3 = m_closed(3.0 * nu, z);
    let m4 = m_closed(4.0 * nu, z);
    let b3 = 3.0 * m3 - 8.0 * c * m2 + (4.0 * c * c + 1.0) * m1;
    let b4 = 2.0 * m4 - 9.0 * c * m3 + (12.0 * c * c + 2.0) * m2 - c * (4.0 * c * c + 3.0) * m1;
    if !(b3 > 0.0) || !(b4 > 0.0) {
        return Err(SabrError::LossOfPrecision {
            what: "higher conditional moments",
        });
    }
    let j3 = b3 / (8.0 * x * x);
    let j4 = b4 / (24.0 * x * x * x);
    Ok(Central {
        mean: j1,
        var,
        c3: j3 - 3.0 * j1 * j2 + 2.0 * j1.powi(3),
        c4: j4 - 4.0 * j1 * j3 + 6.0 * j1 * j1 * j2 - 3.0 * j1.powi(4),
    })
}

/// The coefficient `m_k(Ẑ)` for `k` in `1..=4`.
pub fn m_k(inputs: CondVarInputs, k: u32) -> Result<f64> {
    if !(1..=4).contains(&k) {
        return Err(SabrError::domain("m_k order", f64::from(k)));
    }
    if inputs.use_series(SERIES_NU_HAT) {
        let basis = SeriesBasis::new(inputs.z_hat, SERIES_TERMS);
        return Ok(series_eval(&basis.mk(k), inputs.nu_hat * inputs.nu_hat));
    }
    Ok(m_closed(f64::from(k) * inputs.nu_hat, inputs.z_hat))
}

/// First four conditional raw moments of the average variance with the
/// coefficient of variation, skewness and excess kurtosis.
pub fn cond_moments(inputs: CondVarInputs) -> Result<MomentSet> {
    let j = if inputs.use_series(SERIES_NU_HAT) {
        central_series(&inputs, SERIES_TERMS, 4)
    } else {
        central_closed(&inputs, 4)?
    };
    let r = inputs.vol_ratio();
    let (m, v) = (j.mean, j.var);
    let r2 = r * r;
    Ok(MomentSet {
        mu: r * m,
        mu2p: r2 * (v + m * m),
        mu3p: r2 * r * (j.c3 + 3.0 * m * v + m.powi(3)),
        mu4p: r2 * r2 * (j.c4 + 4.0 * m * j.c3 + 6.0 * m * m * v + m.powi(4)),
        cv: v.sqrt() / m,
        skew: j.c3 / v.powf(1.5),
        exkurt: j.c4 / (v * v) - 3.0,
    })
}

/// Conditional mean and coefficient of variation only; this is all the
/// default sampler needs and is much cheaper than [`cond_moments`].
pub fn mean_and_cv(inputs: CondVarInputs) -> Result<(f64, f64)> {
    let j = if inputs.use_series(FAST_SERIES_NU_HAT) {
        central_series(&inputs, FAST_SERIES_TERMS, 2)
    } else {
        central_closed(&inputs, 2)?
    };
    Ok((inputs.vol_ratio() * j.mean, j.var.max(0.0).sqrt() / j.mean))
}

/// Leading small-`ν̂` behaviour of `(cv, skewness, excess kurtosis)`.
pub fn small_time_stats(nu_hat: f64) -> (f64, f64, f64) {
    let s3 = 3f64.sqrt();
    (nu_hat / s3, 6.0 * s3 / 5.0 * nu_hat, 276.0 / 35.0 * nu_hat * nu_hat)
}

/// Shifted lognormal `mean [(1 - weight) + weight exp(log_sd X - log_sd²/2)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlnParams {
    mean: f64,
    log_sd: f64,
    weight: f64,
}

impl SlnParams {
    /// `log_sd = 0` is accepted and means a point mass at `mean`.
    pub fn new(mean: f64, log_sd: f64, weight: f64) -> Result<Self> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(SabrError::domain("sln mean", mean));
        }
        if !(log_sd >= 0.0) || !log_sd.is_finite() {
            return Err(SabrError::domain("sln log_sd", log_sd));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(SabrError::domain("sln weight", weight));
        }
        Ok(Self {
            mean,
            log_sd,
            weight,
        })
    }

    pub fn point_mass(mean: f64) -> Result<Self> {
        Self::new(mean, 0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn log_sd(&self) -> f64 {
        self.log_sd
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// `w = exp(σ²) - 1`.
    pub fn w(&self) -> f64 {
        (self.log_sd * self.log_sd).exp_m1()
    }

    /// Lower bound of the support, `mean (1 - weight)`.
    pub fn floor(&self) -> f64 {
        self.mean * (1.0 - self.weight)
    }

    pub fn cv(&self) -> f64 {
        self.weight * self.w().sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let w = self.w();
        w.sqrt() * (w + 3.0)
    }

    pub fn exkurtosis(&self) -> f64 {
        let w = self.w();
        w * (w * w * w + 6.0 * w * w + 15.0 * w + 16.0)
    }
}

/// Outcome of the three-moment fit; `clamped` records that the required
/// weight exceeded one and the fit fell back to a plain lognormal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlnFit {
    pub params: SlnParams,
    pub clamped: bool,
}

/// Fit an SLN to mean, coefficient of variation and skewness.
pub fn sln_fit_three_moments(mean: f64, cv: f64, skew: f64) -> Result<SlnFit> {
    if !(cv > 0.0) || !(skew > 0.0) {
        return Ok(SlnFit {
            params: SlnParams::point_mass(mean)?,
            clamped: false,
        });
    }
    // arcosh(1 + u) = ln(1 + u + √(u(u + 2))) keeps precision for small s.
    let u = 0.5 * skew * skew;
    let theta = (u + (u * (u + 2.0)).sqrt()).ln_1p();
    let half_root = (theta / 6.0).sinh();
    let w = 4.0 * half_root * half_root;
    let weight = cv / (2.0 * half_root);
    if weight > 1.0 {
        return Ok(SlnFit {
            params: SlnParams::new(mean, (cv * cv).ln_1p().sqrt(), 1.0)?,
            clamped: true,
        });
    }
    Ok(SlnFit {
        params: SlnParams::new(mean, w.ln_1p().sqrt(), weight)?,
        clamped: false,
    })
}

/// The fixed-weight `λ = 5/6` fit that matches mean and coefficient of
/// variation.
pub fn sln_fit_small_time(moments: &MomentSet) -> Result<SlnParams> {
    sln_fit_mean_cv(moments.mu, moments.cv)
}

pub(crate) fn sln_fit_mean_cv(mean: f64, cv: f64) -> Result<SlnParams> {
    let log_sd = (36.0 / 25.0 * cv * cv).ln_1p().sqrt();
    SlnParams::new(mean, log_sd, 5.0 / 6.0)
}

/// One draw from the SLN law.
#[inline]
pub fn sample_avg_var(stream: &mut RngStream, params: &SlnParams) -> f64 {
    if params.log_sd == 0.0 {
        return params.mean;
    }
    let x = sample_normal(stream);
    let s = params.log_sd;
    params.mean * ((1.0 - params.weight) + params.weight * (s * x - 0.5 * s * s).exp())
}

/// How the average variance distribution is fitted each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlnMethod {
    /// Fixed `λ = 5/6`, matching mean and coefficient of variation.
    #[default]
    SmallTime,
    /// Exact match of mean, coefficient of variation and skewness.
    ThreeMoment,
}

/// Fit the average-variance law for one step with the chosen method.
pub fn fit_avg_var(method: SlnMethod, inputs: CondVarInputs) -> Result<SlnParams> {
    match method {
        SlnMethod::SmallTime => {
            let (mu, cv) = mean_and_cv(inputs)?;
            sln_fit_mean_cv(mu, cv)
        }
        SlnMethod::ThreeMoment => {
            let m = cond_moments(inputs)?;
            Ok(sln_fit_three_moments(m.mu, m.cv, m.skew)?.params)
        }
    }
}

/// Monte Carlo estimates of the first four raw moments with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMoments {
    pub nu_hat: f64,
    pub z_hat: f64,
    pub raw: [f64; 4],
    pub stderr: [f64; 4],
}

/// Brute-force conditional moments of `∫₀¹ e^{2ν̂ Z_s} ds` given `Z₁ = Ẑ`,
/// from Brownian bridges and trapezoidal integration.
pub fn bridge_moment_oracle(
    nu_hat: f64,
    z_hat: f64,
    n_steps: usize,
    n_paths: usize,
    stream: &mut RngStream,
) -> Result<OracleMoments> {
    Ok(bridge_moment_oracle_grid(&[nu_hat], &[z_hat], n_steps, n_paths, stream)?[0])
}

/// Grid version of [`bridge_moment_oracle`]; every `(ν̂, Ẑ)` pair is
/// integrated over the same bridges. Results are ordered `ν̂`-major.
pub fn bridge_moment_oracle_grid(
    nu_hats: &[f64],
    z_hats: &[f64],
    n_steps: usize,
    n_paths: usize,
    stream: &mut RngStream,
) -> Result<Vec<OracleMoments>> {
    if n_steps < 1000 {
        return Err(SabrError::domain("oracle n_steps", n_steps as f64));
    }
    if n_paths < 100_000 {
        return Err(SabrError::domain("oracle n_paths", n_paths as f64));
    }
    for &nu in nu_hats {
        CondVarInputs::new(nu, 0.0)?;
    }
    let n = n_steps;
    let dt = 1.0 / n as f64;
    // B_{i+1} | B_i ~ N(B_i shrink_i, var_i) for a bridge pinned at 0 at s = 1.
    let (shrink, scale): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let rem = 1.0 - i as f64 * dt;
            let next = 1.0 - (i + 1) as f64 * dt;
            (next / rem, (dt * next / rem).sqrt())
        })
        .unzip();

    // Deterministic drift factor e^{2ν̂ s Ẑ} with trapezoid weights folded in.
    let combos: Vec<(usize, f64)> = nu_hats
        .iter()
        .enumerate()
        .flat_map(|(a, _)| z_hats.iter().map(move |&z| (a, z)))
        .collect();
    let drift: Vec<Vec<f64>> = combos
        .iter()
        .map(|&(a, z)| {
            (0..=n)
                .map(|i| {
                    let s = i as f64 * dt;
                    let w = if i == 0 || i == n { 0.5 * dt } else { dt };
                    w * (2.0 * nu_hats[a] * s * z).exp()
                })
                .collect()
        })
        .collect();

    let mut sums = vec![[CompensatedSum::new(); 8]; combos.len()];
    let mut integral = vec![0.0; combos.len()];
    let mut noise = vec![0.0; nu_hats.len()];
    for _ in 0..n_paths {
        // s = 0 and s = 1 have B = 0
        for (c, &(_, _)) in combos.iter().enumerate() {
            integral[c] = drift[c][0] + drift[c][n];
        }
        let mut b = 0.0;
        for i in 0..n - 1 {
            b = b * shrink[i] + scale[i] * sample_normal(stream);
            for (a, &nu) in nu_hats.iter().enumerate() {
                noise[a] = (2.0 * nu * b).exp();
            }
            for (c, &(a, _)) in combos.iter().enumerate() {
                integral[c] += noise[a] * drift[c][i + 1];
            }
        }
        for (c, acc) in sums.iter_mut().enumerate() {
            let v = integral[c];
            let mut p = 1.0;
            for slot in acc.iter_mut() {
                p *= v;
                slot.add(p);
            }
        }
    }

    let np = n_paths as f64;
    Ok(combos
        .iter()
        .zip(&sums)
        .map(|(&(a, z), acc)| {
            let mut raw = [0.0; 4];
            let mut stderr = [0.0; 4];
            for k in 0..4 {
                let m = acc[k].total() / np;
                let m2 = acc[2 * k + 1].total() / np;
                raw[k] = m;
                stderr[k] = ((m2 - m * m).max(0.0) / np).sqrt();
            }
            OracleMoments {
                nu_hat: nu_hats[a],
                z_hat: z,
                raw,
                stderr,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(nu: f64, z: f64) -> CondVarInputs {
        CondVarInputs::new(nu, z).unwrap()
    }

    #[test]
    fn inputs_round_trip_vol_ratio() {
        let i = CondVarInputs::from_vol_ratio(0.37, 1.23).unwrap();
        assert!((i.vol_ratio() - 1.23).abs() < 1e-12);
        let j = CondVarInputs::from_vol_ratio(0.37, i.vol_ratio()).unwrap();
        assert!((j.z_hat() - i.z_hat()).abs() < 1e-12);
        assert!(CondVarInputs::new(0.0, 1.0).is_err());
        assert!(CondVarInputs::from_vol_ratio(0.3, -1.0).is_err());
    }

    #[test]
    fn m_k_small_nu_limit() {
        for k in 1..=4 {
            for z in [-3.0, -1.2, 0.0, 0.7, 3.0] {
                let m = m_k(inputs(1e-6, z), k).unwrap();
                assert!((m - 1.0).abs() < 1e-9, "k={k} z={z} m={m}");
            }
        }
        assert!(m_k(inputs(0.3, 0.0), 0).is_err());
        assert!(m_k(inputs(0.3, 0.0), 5).is_err());
    }

    #[test]
    fn m_k_even_in_z() {
        for k in 1..=4 {
            for z in [0.3, 1.5, 4.0, 9.0, 20.0] {
                for nu in [0.05, 0.4, 1.3] {
                    assert_eq!(m_k(inputs(nu, z), k).unwrap(), m_k(inputs(nu, -z), k).unwrap());
                }
            }
        }
    }

    #[test]
    fn m_k_reference_value() {
        // mpmath at 40 digits: [N(0.4) - N(-0.4)] / (0.8 n(0.4))
        let m = m_k(inputs(0.4, 0.0), 1).unwrap();
        assert!((m - 1.055_079_713_239_254_6).abs() < 1e-12, "{m}");
    }

    #[test]
    fn m_k_closed_form_branches_agree() {
        // a just below and above |z| switch formulas
        for (a, z) in [(0.999_999, 1.0), (1.000_001, 1.0), (2.5, 2.5 - 1e-9)] {
            let lhs = m_closed(a, z);
            let rhs = {
                let num = crate::numerics::norm_cdf(z + a) - crate::numerics::norm_cdf(z - a);
                num / (2.0 * a * crate::numerics::norm_pdf((z * z + a * a).sqrt()))
            };
            assert!(((lhs - rhs) / rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn m_k_either_side_of_tail_switch() {
        // 50-digit values of the defining ratio
        let cases = [
            (0.3, 24.9, 118.680_282_965_263_34),
            (4.0, 24.9, 1.075_240_243_170_752_3e41),
            (0.3, 25.5, 138.713_805_250_510_29),
            (4.0, 25.5, 1.152_322_951_629_428_6e42),
        ];
        for (a, z, expect) in cases {
            let m = m_closed(a, z);
            assert!(((m - expect) / expect).abs() < 1e-12, "a={a} z={z} {m}");
        }
        assert!(m_closed(0.5, 60.0).is_finite());
    }

    #[test]
    fn series_and_closed_forms_agree_in_overlap() {
        for nu in [0.3, 0.45, 0.7] {
            for z in [-1.4, -0.5, 0.0, 1.0] {
                let i = inputs(nu, z);
                let s = central_series(&i, SERIES_TERMS, 4);
                let c = central_closed(&i, 4).unwrap();
                assert!(((s.mean - c.mean) / c.mean).abs() < 1e-13);
                assert!(((s.var - c.var) / c.var).abs() < 1e-11, "nu={nu} z={z}");
                assert!(((s.c3 - c.c3) / c.c3).abs() < 1e-9, "nu={nu} z={z}");
                assert!(((s.c4 - c.c4) / c.c4).abs() < 1e-8, "nu={nu} z={z}");
            }
        }
    }

    #[test]
    fn moments_match_high_precision_reference() {
        // (nu_hat, z_hat, raw moments, cv, skew, exkurt) from 60-digit arithmetic
        let cases = [
            (0.05, -2.0, [0.907_101_397_512_038_95, 0.823_518_868_299_118_17, 0.748_261_387_791_800_16, 0.680_448_655_180_384_48], 0.028_872_329_466_717_604, 0.103_993_493_820_082_93, 0.019_749_196_423_910_313),
            (0.25, 0.5, [1.160_043_908_791_904_2, 1.374_419_977_043_125_5, 1.663_605_096_461_969_1, 2.057_707_855_984_051_9], 0.146_084_276_671_515_5, 0.531_992_850_635_515_48, 0.521_944_134_840_841_54),
            (0.8, -1.5, [0.462_843_533_522_827_33, 0.268_438_486_305_127_07, 0.200_878_842_993_482_78, 0.200_468_787_634_320_15], 0.503_063_636_902_824_55, 2.095_204_565_724_434_7, 9.223_401_450_055_405_8),
            (1.5, 3.0, [1_393.161_612_351_858_6, 3_586_790.482_934_147, 22_832_908_347.169_016, 543_978_220_475_904.84], 0.920_871_565_240_222_54, 6.274_980_451_392_440_2, 162.084_450_408_821_16),
        ];
        for (nu, z, raw, cv, skew, kurt) in cases {
            let m = cond_moments(inputs(nu, z)).unwrap();
            let got = [m.mu, m.mu2p, m.mu3p, m.mu4p];
            for k in 0..4 {
                assert!(((got[k] - raw[k]) / raw[k]).abs() < 1e-11, "nu={nu} z={z} k={k}");
            }
            assert!(((m.cv - cv) / cv).abs() < 1e-11);
            assert!(((m.skew - skew) / skew).abs() < 1e-9);
            assert!(((m.exkurt - kurt) / kurt).abs() < 1e-8, "nu={nu} z={z}");
        }
    }

    #[test]
    fn zero_vol_of_vol_limit() {
        let m = cond_moments(inputs(1e-7, 0.0)).unwrap();
        assert!((m.mu - 1.0).abs() < 1e-12);
        assert!((m.mu2p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_consistency_grid() {
        for i in 0..20 {
            let nu = 0.05 + 0.05 * i as f64;
            for j in 0..=16 {
                let z = -4.0 + 0.5 * j as f64;
                let m = cond_moments(inputs(nu, z)).unwrap();
                assert!(m.mu2p >= m.mu * m.mu);
                assert!(m.cv.is_finite() && m.skew.is_finite() && m.exkurt.is_finite());
                assert!(m.skew > 0.0, "nu={nu} z={z}");
            }
        }
    }

    #[test]
    fn moments_finite_over_wide_range() {
        for nu in [0.01, 0.5, 1.0, 2.0] {
            for z in [-8.0, -3.0, 0.0, 3.0, 8.0] {
                let m = cond_moments(inputs(nu, z)).unwrap();
                for v in [m.mu, m.mu2p, m.mu3p, m.mu4p, m.cv, m.skew, m.exkurt] {
                    assert!(v.is_finite(), "nu={nu} z={z} {m:?}");
                }
            }
        }
    }

    #[test]
    fn shape_statistics_match_raw_moments() {
        let m = cond_moments(inputs(0.6, 0.5)).unwrap();
        let (cv, s, k) = m.shape_from_raw();
        assert!((cv - m.cv).abs() < 1e-12);
        assert!((s - m.skew).abs() < 1e-9);
        assert!((k - m.exkurt).abs() < 1e-8);
    }

    #[test]
    fn fast_mean_cv_matches_full_moments() {
        for nu in [0.001, 0.049, 0.051, 0.075, 0.3, 1.2] {
            for z in [-2.5, 0.0, 1.7] {
                let (mu, cv) = mean_and_cv(inputs(nu, z)).unwrap();
                let m = cond_moments(inputs(nu, z)).unwrap();
                assert!(((mu - m.mu) / m.mu).abs() < 1e-13);
                assert!(((cv - m.cv) / m.cv).abs() < 1e-8, "nu={nu} z={z}");
            }
        }
    }

    #[test]
    fn small_time_stats_values() {
        let (v, s, k) = small_time_stats(0.1);
        assert!((v - 0.057_735_026_918_962_58).abs() < 1e-15);
        assert!((s - 0.207_846_096_908_265_3).abs() < 1e-15);
        assert!((k - 0.078_857_142_857_142_86).abs() < 1e-15);
        let (v, s, k) = small_time_stats(1e-12);
        assert!(v < 1e-11 && s < 1e-11 && k < 1e-11);
        let m = cond_moments(inputs(0.01, 0.0)).unwrap();
        assert!((m.cv / v_of(0.01) - 1.0).abs() < 1e-4);
    }

    fn v_of(nu: f64) -> f64 {
        small_time_stats(nu).0
    }

    #[test]
    fn three_moment_fit_lognormal_consistent() {
        let cv: f64 = 0.3;
        let skew = cv * (cv * cv + 3.0);
        let fit = sln_fit_three_moments(1.0, cv, skew).unwrap();
        assert!((fit.params.weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_moment_fit_small_skew_limit() {
        let v = 0.01;
        for s in [1e-3, 1e-4] {
            let fit = sln_fit_three_moments(1.0, v, s).unwrap();
            // weight ≈ v / (s/3 - s³/81)
            let expect = v / (s / 3.0 - s.powi(3) / 81.0);
            if expect <= 1.0 {
                assert!((fit.params.weight() / expect - 1.0).abs() < 1e-8);
            }
        }
        let fit = sln_fit_three_moments(1.0, 1e-4, 1e-3).unwrap();
        assert!((fit.params.weight() - 0.3).abs() < 1e-6);
    }

    #[test]
    fn three_moment_fit_round_trip() {
        let fit = sln_fit_three_moments(1.0, 0.2, 0.8).unwrap();
        assert!(!fit.clamped);
        assert!((fit.params.cv() - 0.2).abs() < 1e-12);
        assert!((fit.params.skewness() - 0.8).abs() < 1e-12);
        let w = fit.params.w();
        assert!((w * (w + 3.0).powi(2) - 0.64).abs() < 1e-12);
    }

    #[test]
    fn three_moment_fit_clamps_infeasible_weight() {
        // skew far below the lognormal value for this cv
        let fit = sln_fit_three_moments(1.0, 0.5, 0.3).unwrap();
        assert!(fit.clamped);
        assert_eq!(fit.params.weight(), 1.0);
        assert!((fit.params.cv() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fit_is_point_mass() {
        let fit = sln_fit_three_moments(1.3, 0.0, 0.0).unwrap();
        assert_eq!(fit.params.log_sd(), 0.0);
        let mut s = RngStream::new(1, 1);
        assert_eq!(sample_avg_var(&mut s, &fit.params), 1.3);
    }

    #[test]
    fn small_time_fit_matches_mean_and_cv() {
        let m = cond_moments(inputs(0.4, 0.3)).unwrap();
        let p = sln_fit_small_time(&m).unwrap();
        assert_eq!(p.mean(), m.mu);
        assert_eq!(p.weight(), 5.0 / 6.0);
        assert!((p.cv() - m.cv).abs() < 1e-14);
    }

    #[test]
    fn small_time_fit_skewness_close_at_small_nu() {
        let m = cond_moments(inputs(0.2, -0.1)).unwrap();
        let p = sln_fit_small_time(&m).unwrap();
        assert!((p.skewness() / m.skew - 1.0).abs() < 0.02);
    }

    #[test]
    fn avg_var_sample_mean() {
        let p = SlnParams::new(1.1, 0.35, 5.0 / 6.0).unwrap();
        let mut s = RngStream::new(9, 0);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_avg_var(&mut s, &p)).collect();
        assert!(xs.iter().all(|&x| x > p.floor()));
        let m = crate::summation::mean(&xs);
        let sd = p.cv() * p.mean();
        assert!((m - 1.1).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn oracle_rejects_small_configs() {
        let mut s = RngStream::new(1, 0);
        assert!(bridge_moment_oracle(0.3, 0.0, 100, 100_000, &mut s).is_err());
        assert!(bridge_moment_oracle(0.3, 0.0, 1000, 10, &mut s).is_err());
    }
}
