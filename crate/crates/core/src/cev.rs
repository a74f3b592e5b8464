//! The CEV law with an absorbing boundary at zero.
//!
//! `CEV(mean, var_scale)` is the terminal law of `dF = σ F^β dW` started at
//! `mean` after total variance `σ² T = var_scale`. Everything is expressed
//! through `z(y) = y^{2β*} / (β*² var_scale)`, in which the survival function
//! is a noncentral chi-squared CDF and exact sampling is a gamma /
//! shifted-Poisson / gamma composition.

use crate::error::{Result, SabrError};
use crate::numerics::{ncx2_cdf, reg_gamma_upper, Ncx2Params};
use crate::sampling::{sample_gamma, sample_poisson, RngStream};

const BETA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CevParams {
    beta: f64,
    mean: f64,
    var_scale: f64,
}

impl CevParams {
    pub fn new(beta: f64, mean: f64, var_scale: f64) -> Result<Self> {
        if !(beta > BETA_MARGIN && beta < 1.0 - BETA_MARGIN) {
            return Err(SabrError::domain("cev beta", beta));
        }
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(SabrError::domain("cev mean", mean));
        }
        if !(var_scale > 0.0) || !var_scale.is_finite() {
            return Err(SabrError::domain("cev var_scale", var_scale));
        }
        Ok(Self {
            beta,
            mean,
            var_scale,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn var_scale(&self) -> f64 {
        self.var_scale
    }

    pub fn beta_star(&self) -> f64 {
        1.0 - self.beta
    }

    /// Shape of the absorption gamma, `1/(2β*)`.
    pub fn alpha(&self) -> f64 {
        0.5 / self.beta_star()
    }

    /// `z` of the starting point.
    pub fn z0(&self) -> f64 {
        z_transform(self.mean, self).z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ZCoord {
    pub z: f64,
}

pub fn z_transform(y: f64, params: &CevParams) -> ZCoord {
    let bs = params.beta_star();
    ZCoord {
        z: y.powf(2.0 * bs) / (bs * bs * params.var_scale),
    }
}

pub fn z_inverse(z: ZCoord, params: &CevParams) -> f64 {
    let bs = params.beta_star();
    (bs * bs * params.var_scale * z.z).powf(0.5 / bs)
}

/// `P(F_T > y)` for `y > 0`.
pub fn cev_survival(y: f64, params: &CevParams) -> Result<f64> {
    if !(y > 0.0) {
        return Err(SabrError::domain("cev survival point", y));
    }
    if !(params.mean > 0.0) {
        return Ok(0.0);
    }
    let nc = z_transform(y, params).z;
    if nc.is_infinite() {
        return Ok(0.0);
    }
    ncx2_cdf(params.z0(), Ncx2Params::new(1.0 / params.beta_star(), nc)?)
}

/// Mass at zero, `1 - P_G(z0/2; 1/(2β*))`.
pub fn absorption_prob(params: &CevParams) -> Result<f64> {
    if !(params.mean > 0.0) {
        return Ok(1.0);
    }
    reg_gamma_upper(0.5 * params.z0(), params.alpha())
}

/// One exact CEV draw.
#[inline]
pub fn cev_sample(stream: &mut RngStream, params: &CevParams) -> f64 {
    if !(params.mean > 0.0) {
        return 0.0;
    }
    let half_z0 = 0.5 * params.z0();
    let x = sample_gamma(stream, params.alpha()).expect("alpha > 1/2");
    if x >= half_z0 {
        return 0.0;
    }
    let n = sample_poisson(stream, half_z0 - x).expect("positive poisson mean");
    let z_t = 2.0 * sample_gamma(stream, n as f64 + 1.0).expect("shape >= 1");
    z_inverse(ZCoord { z: z_t }, params)
}

/// Draw under the Islah approximation as a power of a CEV variable with
/// elasticity `β' = β/(1 - β*ρ²)`.
///
/// `d_sigma_term` is `(β*ρ/ν)(σ_{t+h} - σ_t)`. At `ρ = 0` this is exactly
/// [`cev_sample`] on `CEV(f_prev, var_scale)`.
pub fn islah_sample(
    stream: &mut RngStream,
    beta: f64,
    rho: f64,
    f_prev: f64,
    d_sigma_term: f64,
    var_scale: f64,
) -> Result<f64> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(SabrError::domain("islah rho", rho));
    }
    if !(f_prev >= 0.0) || !f_prev.is_finite() {
        return Err(SabrError::domain("islah f_prev", f_prev));
    }
    if !d_sigma_term.is_finite() {
        return Err(SabrError::domain("islah d_sigma_term", d_sigma_term));
    }
    if rho == 0.0 {
        let p = CevParams::new(beta, f_prev, var_scale)?;
        return Ok(cev_sample(stream, &p));
    }
    CevParams::new(beta, 1.0, var_scale)?;
    if f_prev == 0.0 {
        return Ok(0.0);
    }
    let bs = 1.0 - beta;
    let denom = 1.0 - bs * rho * rho;
    let beta_p = beta / denom;
    let bs_p = bs * (1.0 - rho * rho) / denom;
    let ratio = bs_p / bs;
    let mean_p = (ratio * (f_prev.powf(bs) + d_sigma_term)).abs().powf(1.0 / bs_p);
    let params_p = CevParams::new(beta_p, mean_p, var_scale)?;
    let y = cev_sample(stream, &params_p);
    Ok((y.powf(bs_p) / ratio).powf(1.0 / bs))
}
