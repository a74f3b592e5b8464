//! SABR path simulation.
//!
//! Each step draws the terminal volatility, then the conditional average
//! variance `I` from a shifted lognormal, and finally the forward from a
//! distribution with the conditional mean `F̄`. The forward step is exact
//! CEV (`Scheme::Cev`), the Islah power-of-CEV approximation, an exact
//! lognormal draw when `β = 1`, or a plain Euler update.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cev::{cev_sample, islah_sample, CevParams};
use crate::condvar::{fit_avg_var, sample_avg_var, CondVarInputs, SlnMethod};
use crate::error::{Result, SabrError};
use crate::sampling::{sample_normal, RngStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SabrParams {
    f0: f64,
    sigma0: f64,
    vov: f64,
    beta: f64,
    rho: f64,
}

impl SabrParams {
    pub fn new(f0: f64, sigma0: f64, vov: f64, beta: f64, rho: f64) -> Result<Self> {
        let check = |ok: bool, what: &'static str, v: f64| {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(SabrError::domain(what, v))
            }
        };
        check(f0 > 0.0, "f0", f0)?;
        check(sigma0 > 0.0, "sigma0", sigma0)?;
        check(vov >= 0.0, "vov", vov)?;
        check((0.0..=1.0).contains(&beta), "beta", beta)?;
        check((-1.0..=1.0).contains(&rho), "rho", rho)?;
        Ok(Self {
            f0,
            sigma0,
            vov,
            beta,
            rho,
        })
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn vov(&self) -> f64 {
        self.vov
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta_star(&self) -> f64 {
        1.0 - self.beta
    }

    pub fn rho_star(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub f: f64,
    pub sigma: f64,
    pub absorbed: bool,
}

impl PathState {
    pub fn initial(params: &SabrParams) -> Self {
        Self {
            t: 0.0,
            f: params.f0,
            sigma: params.sigma0,
            absorbed: false,
        }
    }

    fn advance(self, h: f64, f: f64, sigma: f64) -> Self {
        let absorbed = self.absorbed || f <= 0.0;
        Self {
            t: self.t + h,
            f: if absorbed { 0.0 } else { f },
            sigma,
            absorbed,
        }
    }
}

/// Intermediate quantities of one conditional step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub z_hat: f64,
    pub avg_var: f64,
    pub cond_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Cev,
    Islah,
    Lognormal,
    Euler,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Cev => "cev",
            Scheme::Islah => "islah",
            Scheme::Lognormal => "lognormal",
            Scheme::Euler => "euler",
        }
    }

    /// Whether the scheme can run with elasticity `beta`.
    pub fn supports_beta(&self, beta: f64) -> bool {
        match self {
            Scheme::Cev | Scheme::Islah => beta > 1e-6 && beta < 1.0 - 1e-6,
            Scheme::Lognormal => beta == 1.0,
            Scheme::Euler => true,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SabrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cev" => Ok(Scheme::Cev),
            "islah" => Ok(Scheme::Islah),
            "lognormal" | "ln" => Ok(Scheme::Lognormal),
            "euler" => Ok(Scheme::Euler),
            other => Err(SabrError::Parse {
                field: "scheme".into(),
                message: format!("unknown scheme '{other}'"),
            }),
        }
    }
}

/// Advance the volatility over `h`. Returns `(σ_{t+h}, Ẑ)` with
/// `Ẑ = X - ν̂/2`; at `ν = 0` the volatility is unchanged.
#[inline]
pub fn vol_step(stream: &mut RngStream, sigma_t: f64, vov: f64, h: f64) -> (f64, f64) {
    let nu_hat = vov * h.sqrt();
    let z_hat = sample_normal(stream) - 0.5 * nu_hat;
    (sigma_t * (nu_hat * z_hat).exp(), z_hat)
}

/// Conditional mean of `F_{t+h}` given `σ_{t+h}` and `I`.
pub fn cond_mean(
    params: &SabrParams,
    state: &PathState,
    sigma_next: f64,
    avg_var: f64,
    h: f64,
) -> f64 {
    let d_sigma = sigma_next - state.sigma;
    cond_mean_from(params, state.f, state.sigma, d_sigma, avg_var, h)
}

#[inline]
fn cond_mean_from(
    params: &SabrParams,
    f: f64,
    sigma: f64,
    d_sigma: f64,
    avg_var: f64,
    h: f64,
) -> f64 {
    let rho = params.rho;
    let f_bs = f.powf(params.beta_star());
    let drift = rho * d_sigma / (params.vov * f_bs);
    let var = rho * rho * sigma * sigma * h * avg_var / (2.0 * f_bs * f_bs);
    f * (drift - var).exp()
}

/// Fixed per-run quantities.
#[derive(Debug, Clone, Copy)]
struct StepContext {
    params: SabrParams,
    scheme: Scheme,
    method: SlnMethod,
    h: f64,
    sqrt_h: f64,
    nu_hat: f64,
    rho_star_sq: f64,
}

impl StepContext {
    fn new(scheme: Scheme, params: SabrParams, h: f64, method: SlnMethod) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(SabrError::domain("h", h));
        }
        if !scheme.supports_beta(params.beta) {
            return Err(SabrError::Config(format!(
                "scheme {scheme} cannot run with beta = {}",
                params.beta
            )));
        }
        if scheme == Scheme::Islah && (params.rho.abs() == 1.0 || params.vov == 0.0) {
            return Err(SabrError::Config(
                "islah scheme needs |rho| < 1 and vov > 0".into(),
            ));
        }
        Ok(Self {
            params,
            scheme,
            method,
            h,
            sqrt_h: h.sqrt(),
            nu_hat: params.vov * h.sqrt(),
            rho_star_sq: 1.0 - params.rho * params.rho,
        })
    }

    /// Volatility move and average variance; `None` at `ν = 0`.
    fn conditioning(
        &self,
        stream: &mut RngStream,
        sigma: f64,
    ) -> Result<Option<(f64, f64, f64)>> {
        if self.params.vov == 0.0 {
            return Ok(None);
        }
        let z_hat = sample_normal(stream) - 0.5 * self.nu_hat;
        let d_sigma = sigma * (self.nu_hat * z_hat).exp_m1();
        let inputs = CondVarInputs::new(self.nu_hat, z_hat)?;
        let sln = fit_avg_var(self.method, inputs)?;
        let avg_var = sample_avg_var(stream, &sln);
        Ok(Some((z_hat, d_sigma, avg_var)))
    }

    fn step(
        &self,
        stream: &mut RngStream,
        state: PathState,
    ) -> Result<(PathState, Option<StepDiagnostics>)> {
        if self.scheme == Scheme::Euler {
            return Ok((self.euler(stream, state), None));
        }
        let p = &self.params;
        let h = self.h;
        let sigma = state.sigma;
        let Some((z_hat, d_sigma, avg_var)) = self.conditioning(stream, sigma)? else {
            // constant volatility: the forward is exactly CEV or lognormal
            if state.absorbed {
                return Ok((state.advance(h, 0.0, sigma), None));
            }
            let var = sigma * sigma * h;
            let f = match self.scheme {
                Scheme::Lognormal => {
                    let x = sample_normal(stream);
                    state.f * (var.sqrt() * x - 0.5 * var).exp()
                }
                _ => cev_sample(stream, &CevParams::new(p.beta, state.f, var)?),
            };
            return Ok((state.advance(h, f, sigma), None));
        };
        let sigma_next = sigma + d_sigma;
        if state.absorbed {
            return Ok((state.advance(h, 0.0, sigma_next), None));
        }
        let f_bar = cond_mean_from(p, state.f, sigma, d_sigma, avg_var, h);
        let var = self.rho_star_sq * sigma * sigma * h * avg_var;
        let f = match self.scheme {
            Scheme::Cev if var == 0.0 => f_bar,
            Scheme::Cev => cev_sample(stream, &CevParams::new(p.beta, f_bar, var)?),
            Scheme::Islah => {
                let d = p.beta_star() * p.rho / p.vov * d_sigma;
                islah_sample(stream, p.beta, p.rho, state.f, d, var)?
            }
            Scheme::Lognormal => {
                let x = sample_normal(stream);
                f_bar * (var.sqrt() * x - 0.5 * var).exp()
            }
            Scheme::Euler => unreachable!(),
        };
        let diag = StepDiagnostics {
            z_hat,
            avg_var,
            cond_mean: f_bar,
        };
        Ok((state.advance(h, f, sigma_next), Some(diag)))
    }

    fn euler(&self, stream: &mut RngStream, state: PathState) -> PathState {
        let p = &self.params;
        let w2 = sample_normal(stream);
        let w_perp = sample_normal(stream);
        let w1 = p.rho * w2 + self.rho_star_sq.sqrt() * w_perp;
        let sigma_next =
            state.sigma * (p.vov * self.sqrt_h * w2 - 0.5 * p.vov * p.vov * self.h).exp();
        if state.absorbed {
            return state.advance(self.h, 0.0, sigma_next);
        }
        let f = state.f + state.sigma * state.f.powf(p.beta) * self.sqrt_h * w1;
        state.advance(self.h, f, sigma_next)
    }
}

fn single_step(
    scheme: Scheme,
    stream: &mut RngStream,
    params: &SabrParams,
    state: PathState,
    h: f64,
) -> Result<PathState> {
    let ctx = StepContext::new(scheme, *params, h, SlnMethod::SmallTime)?;
    Ok(ctx.step(stream, state)?.0)
}

/// One step of the CEV scheme.
pub fn sabr_step_cev(
    stream: &mut RngStream,
    params: &SabrParams,
    state: PathState,
    h: f64,
) -> Result<PathState> {
    single_step(Scheme::Cev, stream, params, state, h)
}

/// One step of the CEV scheme with its conditioning values.
pub fn sabr_step_cev_diag(
    stream: &mut RngStream,
    params: &SabrParams,
    state: PathState,
    h: f64,
) -> Result<(PathState, Option<StepDiagnostics>)> {
    StepContext::new(Scheme::Cev, *params, h, SlnMethod::SmallTime)?.step(stream, state)
}

pub fn sabr_step_islah(
    stream: &mut RngStream,
    params: &SabrParams,
    state: PathState,
    h: f64,
) -> Result<PathState> {
    single_step(Scheme::Islah, stream, params, state, h)
}

pub fn sabr_step_lognormal(
    stream: &mut RngStream,
    params: &SabrParams,
    state: PathState,
    h: f64,
) -> Result<PathState> {
    single_step(Scheme::Lognormal, stream, params, state, h)
}

pub fn sabr_step_euler(
    stream: &mut RngStream,
    params: &SabrParams,
    state: PathState,
    h: f64,
) -> Result<PathState> {
    single_step(Scheme::Euler, stream, params, state, h)
}

/// Number of steps of size `h` in `t`, requiring `t/h` to be an integer up
/// to rounding.
pub fn step_count(t: f64, h: f64) -> Result<usize> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(SabrError::domain("maturity", t));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(SabrError::domain("h", h));
    }
    let ratio = t / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 2.0 * f64::EPSILON * n {
        return Err(SabrError::Config(format!(
            "maturity {t} is not a whole number of steps of size {h}"
        )));
    }
    Ok(n as usize)
}

/// Options beyond the scheme and grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub sln_method: SlnMethod,
}

/// Terminal forwards of `n_paths` paths; path `p` uses stream `(seed, p)`.
pub fn simulate_terminal(
    scheme: Scheme,
    params: &SabrParams,
    t: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut out =
        simulate_observations(scheme, params, &[t], h, n_paths, seed, SimOptions::default())?;
    Ok(out.pop().expect("one observation time"))
}

/// Forwards observed at each of `times` (ascending), one path set shared by
/// all times. Indexed `[time][path]`.
pub fn simulate_observations(
    scheme: Scheme,
    params: &SabrParams,
    times: &[f64],
    h: f64,
    n_paths: usize,
    seed: u64,
    options: SimOptions,
) -> Result<Vec<Vec<f64>>> {
    if times.is_empty() {
        return Err(SabrError::Config("no observation times".into()));
    }
    let ctx = StepContext::new(scheme, *params, h, options.sln_method)?;
    let marks = times
        .iter()
        .map(|&t| step_count(t, h))
        .collect::<Result<Vec<_>>>()?;
    if marks.windows(2).any(|w| w[1] < w[0]) {
        return Err(SabrError::Config("observation times must be ascending".into()));
    }
    let paths: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut stream = RngStream::new(seed, p as u64);
            let mut state = PathState::initial(params);
            let mut obs = Vec::with_capacity(marks.len());
            let mut done = 0;
            for &mark in &marks {
                while done < mark {
                    state = ctx.step(&mut stream, state)?.0;
                    done += 1;
                }
                obs.push(state.f);
            }
            Ok(obs)
        })
        .collect::<Result<_>>()?;
    Ok((0..marks.len())
        .map(|k| paths.iter().map(|o| o[k]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case1() -> SabrParams {
        SabrParams::new(1.0, 0.25, 0.3, 0.3, -0.8).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SabrParams::new(0.0, 0.2, 0.3, 0.5, 0.0).is_err());
        assert!(SabrParams::new(1.0, 0.2, -0.1, 0.5, 0.0).is_err());
        assert!(SabrParams::new(1.0, 0.2, 0.3, 1.1, 0.0).is_err());
        assert!(SabrParams::new(1.0, 0.2, 0.3, 0.5, -1.5).is_err());
        let p = SabrParams::new(1.0, 0.2, 0.3, 0.4, 0.6).unwrap();
        assert!((p.rho_star() - 0.8).abs() < 1e-15);
        assert!((p.beta_star() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn scheme_parsing() {
        for s in [Scheme::Cev, Scheme::Islah, Scheme::Lognormal, Scheme::Euler] {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("milstein".parse::<Scheme>().is_err());
    }

    #[test]
    fn step_count_rules() {
        assert_eq!(step_count(10.0, 1.0 / 16.0).unwrap(), 160);
        assert_eq!(step_count(1.0, 0.1).unwrap(), 10);
        assert_eq!(step_count(1.0, 1.0 / 400.0).unwrap(), 400);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 2.0).is_err());
    }

    #[test]
    fn zero_vov_keeps_volatility() {
        let mut s = RngStream::new(1, 0);
        let (sig, _) = vol_step(&mut s, 0.3, 0.0, 0.25);
        assert_eq!(sig, 0.3);
    }

    #[test]
    fn cond_mean_zero_rho_is_identity() {
        let p = SabrParams::new(1.3, 0.2, 0.4, 0.5, 0.0).unwrap();
        let st = PathState::initial(&p);
        assert_eq!(cond_mean(&p, &st, 0.25, 1.1, 0.5), 1.3);
    }

    #[test]
    fn cond_mean_lognormal_form() {
        let p = SabrParams::new(1.3, 0.2, 0.4, 1.0, -0.5).unwrap();
        let st = PathState::initial(&p);
        let (sn, i, h): (f64, f64, f64) = (0.23, 1.05, 0.5);
        let expect = 1.3 * (-0.5 * (sn - 0.2) / 0.4 - 0.25 * 0.04 * h * i / 2.0).exp();
        assert!((cond_mean(&p, &st, sn, i, h) / expect - 1.0).abs() < 1e-13);
    }

    #[test]
    fn incompatible_scheme_rejected() {
        let p = case1();
        assert!(simulate_terminal(Scheme::Lognormal, &p, 1.0, 1.0, 10, 0).is_err());
        let ln = SabrParams::new(1.0, 0.25, 0.3, 1.0, -0.8).unwrap();
        assert!(simulate_terminal(Scheme::Cev, &ln, 1.0, 1.0, 10, 0).is_err());
        assert!(simulate_terminal(Scheme::Cev, &p, 1.0, 0.3, 10, 0).is_err());
    }

    #[test]
    fn perfect_correlation_returns_conditional_mean() {
        let p = SabrParams::new(1.0, 0.25, 0.3, 0.3, -1.0).unwrap();
        let mut s = RngStream::new(3, 0);
        let (next, diag) = sabr_step_cev_diag(&mut s, &p, PathState::initial(&p), 0.5).unwrap();
        assert_eq!(next.f, diag.unwrap().cond_mean);
    }

    #[test]
    fn absorption_is_permanent() {
        let p = SabrParams::new(0.05, 0.8, 0.6, 0.3, -0.5).unwrap();
        let mut s = RngStream::new(4, 0);
        let mut st = PathState::initial(&p);
        let mut absorbed_at = None;
        for k in 0..40 {
            st = sabr_step_cev(&mut s, &p, st, 0.25).unwrap();
            if st.absorbed && absorbed_at.is_none() {
                absorbed_at = Some(k);
            }
            if absorbed_at.is_some() {
                assert!(st.absorbed);
                assert_eq!(st.f, 0.0);
            }
            assert!(st.sigma > 0.0);
        }
        assert!(absorbed_at.is_some());
    }

    #[test]
    fn time_advances_by_h() {
        let p = case1();
        let mut s = RngStream::new(4, 1);
        let st = sabr_step_euler(&mut s, &p, PathState::initial(&p), 0.25).unwrap();
        assert_eq!(st.t, 0.25);
    }

    #[test]
    fn observations_match_terminal() {
        let p = case1();
        let obs = simulate_observations(
            Scheme::Cev,
            &p,
            &[1.0, 2.0],
            0.5,
            200,
            9,
            SimOptions::default(),
        )
        .unwrap();
        let term = simulate_terminal(Scheme::Cev, &p, 2.0, 0.5, 200, 9).unwrap();
        assert_eq!(obs[1], term);
    }
}
