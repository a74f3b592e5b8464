//! Benchmark runs: European call pricing over repeated simulations, bias
//! against benchmark prices, convergence and martingale studies.

pub mod cases;
pub mod config;
pub mod fixtures;
pub mod output;

use std::time::Instant;

use crate::condvar::SlnMethod;
use crate::engine::{simulate_observations, step_count, Scheme, SimOptions};
use crate::error::{Result, SabrError};
use crate::summation::{mean, sample_stdev, CompensatedSum};

pub use cases::CaseSpec;
pub use config::{load_config, parse_config, RunSetup};
pub use fixtures::Fixtures;
pub use output::{format_csv, write_results, CsvOptions};

/// How the per-repetition price stdev is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdevMode {
    /// Sample stdev of the repetition prices (needs two or more reps).
    #[default]
    AcrossReps,
    /// Pooled per-path payoff stdev divided by `√N`; same target, far
    /// fewer repetitions needed.
    PooledPaths,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub h: f64,
    pub n_paths: usize,
    pub n_reps: usize,
    pub base_seed: u64,
    pub stdev_mode: StdevMode,
    pub sln_method: SlnMethod,
}

impl RunConfig {
    pub fn new(scheme: Scheme, h: f64, n_paths: usize, n_reps: usize, base_seed: u64) -> Result<Self> {
        let cfg = Self {
            scheme,
            h,
            n_paths,
            n_reps,
            base_seed,
            stdev_mode: StdevMode::AcrossReps,
            sln_method: SlnMethod::SmallTime,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(SabrError::Config(format!("h must be positive, got {}", self.h)));
        }
        if self.n_paths == 0 || self.n_reps == 0 {
            return Err(SabrError::Config("n_paths and n_reps must be positive".into()));
        }
        Ok(())
    }

    fn check_case(&self, case: &CaseSpec) -> Result<()> {
        self.validate()?;
        for &t in &case.maturities {
            step_count(t, self.h)?;
        }
        if !self.scheme.supports_beta(case.params.beta()) {
            return Err(SabrError::Config(format!(
                "scheme {} cannot run with beta = {}",
                self.scheme,
                case.params.beta()
            )));
        }
        Ok(())
    }
}

/// Statistics of one `(T, K)` over all repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub price_mean: f64,
    pub bias: Option<f64>,
    pub stdev: Option<f64>,
    pub rms: Option<f64>,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub case: String,
    pub scheme: Scheme,
    pub maturity: f64,
    pub strike: f64,
    pub h: f64,
    pub n_paths: usize,
    pub n_reps: usize,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaseReport {
    pub rows: Vec<RunRow>,
    /// `(T, K)` pairs without a benchmark price; their bias is omitted.
    pub missing_fixtures: Vec<(f64, f64)>,
}

/// `√(bias² + stdev²)`.
pub fn rms_error(bias: f64, stdev: f64) -> f64 {
    bias.hypot(stdev)
}

/// Undiscounted call price `E[(F_T - K)⁺]`; NaN for an empty sample.
pub fn price_european_call(terminal_prices: &[f64], strike: f64) -> f64 {
    let acc: CompensatedSum = terminal_prices.iter().map(|&f| (f - strike).max(0.0)).collect();
    acc.total() / terminal_prices.len() as f64
}

fn payoff_variance(terminal_prices: &[f64], strike: f64, price: f64) -> f64 {
    let acc: CompensatedSum = terminal_prices
        .iter()
        .map(|&f| {
            let d = (f - strike).max(0.0) - price;
            d * d
        })
        .collect();
    acc.total() / (terminal_prices.len() as f64 - 1.0)
}

/// Price every `(T, K)` of `case` over `config.n_reps` repetitions with
/// seeds `base_seed + r`. Bias is taken against `fixtures` where a price
/// exists.
pub fn run_case(case: &CaseSpec, config: &RunConfig, fixtures: &Fixtures) -> Result<CaseReport> {
    config.check_case(case)?;
    let nt = case.maturities.len();
    let nk = case.strikes.len();
    let mut prices = vec![Vec::with_capacity(config.n_reps); nt * nk];
    let mut pooled_var = vec![0.0; nt * nk];
    let mut seconds = Vec::with_capacity(config.n_reps);
    let options = SimOptions {
        sln_method: config.sln_method,
    };
    for rep in 0..config.n_reps {
        let seed = config.base_seed.wrapping_add(rep as u64);
        let start = Instant::now();
        let obs = simulate_observations(
            config.scheme,
            &case.params,
            &case.maturities,
            config.h,
            config.n_paths,
            seed,
            options,
        )?;
        seconds.push(start.elapsed().as_secs_f64());
        for (ti, terminal) in obs.iter().enumerate() {
            for (ki, &k) in case.strikes.iter().enumerate() {
                let p = price_european_call(terminal, k);
                if config.stdev_mode == StdevMode::PooledPaths {
                    pooled_var[ti * nk + ki] += payoff_variance(terminal, k, p);
                }
                prices[ti * nk + ki].push(p);
            }
        }
    }
    let cpu_seconds = mean(&seconds);
    let mut report = CaseReport::default();
    for (ti, &t) in case.maturities.iter().enumerate() {
        for (ki, &k) in case.strikes.iter().enumerate() {
            let idx = ti * nk + ki;
            let reps = &prices[idx];
            let price_mean = mean(reps);
            let bias = match fixtures.price(&case.label, t, k) {
                Some(reference) => {
                    let errs: Vec<f64> = reps.iter().map(|p| p - reference).collect();
                    Some(mean(&errs))
                }
                None => {
                    report.missing_fixtures.push((t, k));
                    None
                }
            };
            let stdev = match config.stdev_mode {
                StdevMode::AcrossReps => sample_stdev(reps),
                StdevMode::PooledPaths if config.n_paths > 1 => Some(
                    (pooled_var[idx] / config.n_reps as f64 / config.n_paths as f64).sqrt(),
                ),
                StdevMode::PooledPaths => None,
            };
            let rms = match (bias, stdev) {
                (Some(b), Some(s)) => Some(rms_error(b, s)),
                _ => None,
            };
            report.rows.push(RunRow {
                case: case.label.clone(),
                scheme: config.scheme,
                maturity: t,
                strike: k,
                h: config.h,
                n_paths: config.n_paths,
                n_reps: config.n_reps,
                stats: RunStats {
                    price_mean,
                    bias,
                    stdev,
                    rms,
                    cpu_seconds,
                },
            });
        }
    }
    Ok(report)
}

/// One [`run_case`] per `(N, h)` of `schedule`, in order. Other settings
/// come from `template`.
pub fn convergence_study(
    case: &CaseSpec,
    schedule: &[(usize, f64)],
    template: &RunConfig,
    fixtures: &Fixtures,
) -> Result<CaseReport> {
    if schedule.is_empty() {
        return Err(SabrError::Config("empty convergence schedule".into()));
    }
    let mut out = CaseReport::default();
    for &(n_paths, h) in schedule {
        let cfg = RunConfig {
            n_paths,
            h,
            ..*template
        };
        let mut rep = run_case(case, &cfg, fixtures)?;
        out.rows.append(&mut rep.rows);
        for m in rep.missing_fixtures {
            if !out.missing_fixtures.contains(&m) {
                out.missing_fixtures.push(m);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    pub maturity: f64,
    pub scheme: Scheme,
    pub h: f64,
    /// `mean(F_T) - F₀`.
    pub forward_error: f64,
    pub stderr: f64,
    pub atm_price: f64,
    pub atm_price_error: Option<f64>,
    pub cpu_seconds: f64,
}

/// Forward drift and ATM call price per maturity for each scheme and step.
/// One path set per `(scheme, h)` is observed at every maturity.
pub fn martingale_study(
    case: &CaseSpec,
    schemes: &[Scheme],
    h_list: &[f64],
    n_paths: usize,
    seed: u64,
    fixtures: &Fixtures,
) -> Result<Vec<MartingaleRow>> {
    let atm = case
        .atm_index()
        .ok_or_else(|| SabrError::Config(format!("case {} has no ATM strike", case.label)))?;
    let strike = case.strikes[atm];
    let f0 = case.params.f0();
    let mut rows = Vec::new();
    for &scheme in schemes {
        for &h in h_list {
            let cfg = RunConfig::new(scheme, h, n_paths, 1, seed)?;
            cfg.check_case(case)?;
            let start = Instant::now();
            let obs = simulate_observations(
                scheme,
                &case.params,
                &case.maturities,
                h,
                n_paths,
                seed,
                SimOptions::default(),
            )?;
            let cpu_seconds = start.elapsed().as_secs_f64();
            for (ti, &t) in case.maturities.iter().enumerate() {
                let terminal = &obs[ti];
                let stderr = sample_stdev(terminal).unwrap_or(f64::NAN) / (n_paths as f64).sqrt();
                let atm_price = price_european_call(terminal, strike);
                rows.push(MartingaleRow {
                    maturity: t,
                    scheme,
                    h,
                    forward_error: mean(terminal) - f0,
                    stderr,
                    atm_price,
                    atm_price_error: fixtures.price(&case.label, t, strike).map(|p| atm_price - p),
                    cpu_seconds,
                });
            }
        }
    }
    Ok(rows)
}
