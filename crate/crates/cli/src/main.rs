//! `sabr`: price benchmark cases, run convergence and martingale studies,
//! and inspect the conditional moments and CEV law.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when `--bias`
//! is requested but a benchmark price is missing, 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sabr_core::cev::{absorption_prob, cev_sample, cev_survival, CevParams};
use sabr_core::condvar::{bridge_moment_oracle_grid, cond_moments, CondVarInputs};
use sabr_core::harness::config::{parse_config_with_overrides, RunSetup};
use sabr_core::harness::output::{fmt_real, format_martingale_csv, write_text};
use sabr_core::harness::{
    convergence_study, format_csv, martingale_study, run_case, CaseReport, CaseSpec, CsvOptions,
    Fixtures,
};
use sabr_core::{RngStream, SabrError, Scheme};

#[derive(Parser)]
#[command(name = "sabr", version, about = "SABR Monte Carlo with exact CEV transitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price every (T, K) of a case; one CSV row each.
    Price(PriceArgs),
    /// Repeat `price` over a schedule of (paths, step) pairs.
    Converge(ConvergeArgs),
    /// Forward drift and ATM price per maturity.
    Martingale(MartingaleArgs),
    /// Conditional moments of the average variance.
    Moments(MomentsArgs),
    /// Survival function and absorption mass of the CEV law.
    CevCdf(CevCdfArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in case: case1 .. case5.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    /// Step size; fractions such as 1/16 are accepted.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    n_paths: Option<String>,
    #[arg(long)]
    n_reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    f0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    vov: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    /// Comma-separated.
    #[arg(long)]
    maturities: Option<String>,
    /// Comma-separated.
    #[arg(long)]
    strikes: Option<String>,
    /// Per-repetition stdev estimate: reps or paths.
    #[arg(long)]
    stdev: Option<String>,
    /// Average-variance fit: small-time or three-moment.
    #[arg(long)]
    sln: Option<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write CSV here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Replace an existing output file.
    #[arg(long)]
    force: bool,
    /// Print NA for timings so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Fail with status 3 if any (T, K) lacks a benchmark price.
    #[arg(long)]
    bias: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// `N:h` pairs, comma-separated. Defaults to five rows doubling N and
    /// halving h from the run's values.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    bias: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MartingaleArgs {
    #[arg(long, default_value = "case5")]
    case: String,
    /// Comma-separated scheme names.
    #[arg(long, default_value = "cev,islah")]
    schemes: String,
    /// Comma-separated step sizes.
    #[arg(long, default_value = "1/2,1")]
    h: String,
    #[arg(long, default_value_t = 100_000)]
    n_paths: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct MomentsArgs {
    /// Comma-separated ν√h values.
    #[arg(long, allow_hyphen_values = true)]
    nu_hat: String,
    /// Comma-separated standardized vol moves.
    #[arg(long, allow_hyphen_values = true, default_value = "0")]
    z_hat: String,
    /// Add Brownian-bridge estimates with this many bridges.
    #[arg(long)]
    oracle_paths: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    oracle_steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CevCdfArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    mean: f64,
    /// Total variance σ²T.
    #[arg(long)]
    var: f64,
    /// Comma-separated positive points.
    #[arg(long)]
    points: String,
    /// Add an empirical column from this many exact draws.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_list(field: &str, raw: &str) -> Result<Vec<f64>, SabrError> {
    raw.split(',')
        .map(|s| {
            let s = s.trim();
            let v = match s.split_once('/') {
                Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
                None => s.parse().ok(),
            };
            v.ok_or_else(|| SabrError::Parse {
                field: field.to_string(),
                message: format!("'{s}' is not a number"),
            })
        })
        .collect()
}

fn setup(run: &RunArgs) -> Result<RunSetup, SabrError> {
    let text = match &run.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| SabrError::Config(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let quoted = |s: &str| format!("\"{s}\"");
    let mut ov: Vec<(String, String)> = Vec::new();
    let mut push = |key: &str, v: &Option<String>, wrap: &dyn Fn(&str) -> String| {
        if let Some(v) = v {
            ov.push((key.to_string(), wrap(v)));
        }
    };
    let bare = |s: &str| s.to_string();
    let list = |s: &str| format!("[{s}]");
    push("case", &run.case, &quoted);
    push("scheme", &run.scheme, &quoted);
    push("h", &run.h, &bare);
    push("n_paths", &run.n_paths, &bare);
    push("n_reps", &run.n_reps, &bare);
    push("seed", &run.seed, &bare);
    push("f0", &run.f0, &bare);
    push("sigma0", &run.sigma0, &bare);
    push("vov", &run.vov, &bare);
    push("beta", &run.beta, &bare);
    push("rho", &run.rho, &bare);
    push("maturities", &run.maturities, &list);
    push("strikes", &run.strikes, &list);
    push("stdev", &run.stdev, &quoted);
    push("sln", &run.sln, &quoted);
    parse_config_with_overrides(&text, &ov)
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), SabrError> {
    match &out.output {
        Some(path) => write_text(path, text, out.force),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn opts(out: &OutputArgs) -> CsvOptions {
    CsvOptions {
        timing: !out.no_timing,
    }
}

fn check_bias(report: &CaseReport, case: &CaseSpec, bias: bool) -> Result<(), SabrError> {
    match report.missing_fixtures.first() {
        Some(&(maturity, strike)) if bias => Err(SabrError::MissingFixture {
            case: case.label.clone(),
            maturity,
            strike,
        }),
        _ => Ok(()),
    }
}

fn price(args: PriceArgs) -> Result<(), SabrError> {
    let s = setup(&args.run)?;
    let report = run_case(&s.case, &s.config, Fixtures::builtin())?;
    check_bias(&report, &s.case, args.bias)?;
    emit(&args.out, &format_csv(&report.rows, opts(&args.out)))
}

fn converge(args: ConvergeArgs) -> Result<(), SabrError> {
    let s = setup(&args.run)?;
    let schedule: Vec<(usize, f64)> = match &args.schedule {
        Some(raw) => raw
            .split(',')
            .map(|pair| {
                let bad = || SabrError::Parse {
                    field: "schedule".into(),
                    message: format!("expected N:h, got '{pair}'"),
                };
                let (n, h) = pair.trim().split_once(':').ok_or_else(bad)?;
                let n = n.trim().parse::<usize>().map_err(|_| bad())?;
                let h = parse_list("schedule", h)?;
                Ok((n, h[0]))
            })
            .collect::<Result<_, SabrError>>()?,
        None => (0..5)
            .map(|i| (s.config.n_paths << i, s.config.h / f64::from(1u32 << i)))
            .collect(),
    };
    let report = convergence_study(&s.case, &schedule, &s.config, Fixtures::builtin())?;
    check_bias(&report, &s.case, args.bias)?;
    emit(&args.out, &format_csv(&report.rows, opts(&args.out)))
}

fn martingale(args: MartingaleArgs) -> Result<(), SabrError> {
    let case = CaseSpec::builtin(&args.case)?;
    let schemes = args
        .schemes
        .split(',')
        .map(|s| s.trim().parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()?;
    let hs = parse_list("h", &args.h)?;
    let rows = martingale_study(&case, &schemes, &hs, args.n_paths, args.seed, Fixtures::builtin())?;
    emit(&args.out, &format_martingale_csv(&rows, opts(&args.out)))
}

fn moments(args: MomentsArgs) -> Result<(), SabrError> {
    let nus = parse_list("nu_hat", &args.nu_hat)?;
    let zs = parse_list("z_hat", &args.z_hat)?;
    let oracle = match args.oracle_paths {
        Some(n) => {
            let mut stream = RngStream::new(args.seed, 0);
            Some(bridge_moment_oracle_grid(&nus, &zs, args.oracle_steps, n, &mut stream)?)
        }
        None => None,
    };
    let mut text = String::from("nu_hat,z_hat,mu1,mu2,mu3,mu4,cv,skew,exkurt");
    if oracle.is_some() {
        text.push_str(",oracle_mu1,oracle_mu2,oracle_mu3,oracle_mu4,se_mu1,se_mu2,se_mu3,se_mu4");
    }
    text.push('\n');
    let mut idx = 0;
    for &nu in &nus {
        for &z in &zs {
            let m = cond_moments(CondVarInputs::new(nu, z)?)?;
            let mut row: Vec<String> = [nu, z, m.mu, m.mu2p, m.mu3p, m.mu4p, m.cv, m.skew, m.exkurt]
                .iter()
                .map(|&x| fmt_real(x))
                .collect();
            if let Some(o) = &oracle {
                row.extend(o[idx].raw.iter().chain(&o[idx].stderr).map(|&x| fmt_real(x)));
            }
            idx += 1;
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    emit(&args.out, &text)
}

fn cev_cdf(args: CevCdfArgs) -> Result<(), SabrError> {
    let p = CevParams::new(args.beta, args.mean, args.var)?;
    let points = parse_list("points", &args.points)?;
    let draws = args.samples.map(|n| {
        let mut s = RngStream::new(args.seed, 0);
        let mut xs: Vec<f64> = (0..n).map(|_| cev_sample(&mut s, &p)).collect();
        xs.sort_by(f64::total_cmp);
        xs
    });
    let empirical = |y: f64| {
        draws
            .as_ref()
            .map(|xs| fmt_real(xs.partition_point(|&x| x <= y) as f64 / xs.len() as f64))
    };
    let mut text = String::from("y,cdf,survival");
    if draws.is_some() {
        text.push_str(",empirical_cdf");
    }
    text.push('\n');
    let absorbed = absorption_prob(&p)?;
    let mut rows = vec![(0.0, absorbed, 1.0 - absorbed)];
    for &y in &points {
        let surv = cev_survival(y, &p)?;
        rows.push((y, 1.0 - surv, surv));
    }
    for (y, cdf, surv) in rows {
        let mut fields = vec![fmt_real(y), fmt_real(cdf), fmt_real(surv)];
        fields.extend(empirical(y));
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    emit(&args.out, &text)
}

fn exit_code(err: &SabrError) -> u8 {
    match err {
        SabrError::MissingFixture { .. } => 3,
        SabrError::Config(_) | SabrError::Parse { .. } | SabrError::Domain { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Price(a) => price(a),
        Command::Converge(a) => converge(a),
        Command::Martingale(a) => martingale(a),
        Command::Moments(a) => moments(a),
        Command::CevCdf(a) => cev_cdf(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sabr: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
