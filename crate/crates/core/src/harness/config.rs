//! Run configuration files.
//!
//! ```toml
//! case = "case1"        # or give f0, sigma0, vov, beta, rho, maturities, strikes
//! scheme = "cev"
//! h = 0.0625            # "1/16" is accepted too
//! n_paths = 100000
//! n_reps = 50
//! seed = 1
//! ```
//!
//! Explicit model keys override the named case. Every key can also be
//! overridden with a `key=value` pair, as the command line does.

use std::path::Path;

use toml::{Table, Value};

use super::cases::CaseSpec;
use super::{RunConfig, StdevMode};
use crate::condvar::SlnMethod;
use crate::engine::{SabrParams, Scheme};
use crate::error::{Result, SabrError};

pub const CONFIG_KEYS: [&str; 16] = [
    "case", "label", "f0", "sigma0", "vov", "beta", "rho", "maturities", "strikes", "scheme",
    "h", "n_paths", "n_reps", "seed", "stdev", "sln",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunSetup {
    pub case: CaseSpec,
    pub config: RunConfig,
}

struct Reader<'a> {
    table: &'a Table,
    text: Option<&'a str>,
}

impl Reader<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> SabrError {
        let mut message = message.into();
        if let Some(line) = self.text.and_then(|t| line_of(t, key)) {
            message = format!("line {line}: {message}");
        }
        SabrError::Parse {
            field: key.to_string(),
            message,
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => value_real(v)
                .map(Some)
                .ok_or_else(|| self.err(key, format!("expected a number, found {v}"))),
        }
    }

    fn count(&self, key: &str) -> Result<Option<u64>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Value::Float(f)) if *f >= 0.0 && f.fract() == 0.0 && *f < 9.0e15 => {
                Ok(Some(*f as u64))
            }
            Some(v) => Err(self.err(key, format!("expected a non-negative integer, found {v}"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    value_real(v)
                        .ok_or_else(|| self.err(key, format!("expected numbers, found {v}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => value_real(v)
                .map(|x| Some(vec![x]))
                .ok_or_else(|| self.err(key, format!("expected a list of numbers, found {v}"))),
        }
    }

    fn text(&self, key: &str) -> Result<Option<&str>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(self.err(key, format!("expected a string, found {v}"))),
        }
    }
}

fn value_real(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        Value::String(s) => parse_fraction(s),
        _ => None,
    }
}

/// `"0.25"`, `"1/16"`.
fn parse_fraction(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

/// Set `key` from a raw command-line string. The value is read as TOML
/// when possible and as a bare string otherwise.
pub fn apply_override(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    if !CONFIG_KEYS.contains(&key) {
        return Err(SabrError::Parse {
            field: key.to_string(),
            message: "unknown configuration key".into(),
        });
    }
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    table.insert(key.to_string(), value);
    Ok(())
}

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| SabrError::Parse {
        field: "config".into(),
        message: e.to_string(),
    })
}

/// Build a run from a parsed table. `text` only improves error messages.
pub fn setup_from_table(table: &Table, text: Option<&str>) -> Result<RunSetup> {
    let r = Reader { table, text };
    if let Some(key) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(r.err(key, "unknown configuration key"));
    }
    let base = match r.text("case")? {
        Some(name) => Some(CaseSpec::builtin(name).map_err(|e| r.err("case", e.to_string()))?),
        None => None,
    };
    let pick = |key: &str, from_base: Option<f64>| -> Result<f64> {
        r.real(key)?
            .or(from_base)
            .ok_or_else(|| r.err(key, "missing (give it or name a built-in case)"))
    };
    let bp = base.as_ref().map(|c| c.params);
    let params = SabrParams::new(
        pick("f0", bp.map(|p| p.f0()))?,
        pick("sigma0", bp.map(|p| p.sigma0()))?,
        pick("vov", bp.map(|p| p.vov()))?,
        pick("beta", bp.map(|p| p.beta()))?,
        pick("rho", bp.map(|p| p.rho()))?,
    )
    .map_err(|e| match e {
        SabrError::Domain { what, value } => r.err(what, format!("out of range: {value}")),
        other => other,
    })?;
    let maturities = r
        .list("maturities")?
        .or_else(|| base.as_ref().map(|c| c.maturities.clone()))
        .ok_or_else(|| r.err("maturities", "missing"))?;
    let strikes = r
        .list("strikes")?
        .or_else(|| base.as_ref().map(|c| c.strikes.clone()))
        .ok_or_else(|| r.err("strikes", "missing"))?;
    let label = r
        .text("label")?
        .map(str::to_string)
        .or_else(|| base.as_ref().map(|c| c.label.clone()))
        .unwrap_or_else(|| "custom".to_string());
    let case = CaseSpec::new(label, params, maturities, strikes)?;

    let scheme = match r.text("scheme")? {
        Some(s) => s.parse::<Scheme>().map_err(|e| r.err("scheme", e.to_string()))?,
        None => Scheme::Cev,
    };
    let stdev_mode = match r.text("stdev")? {
        None | Some("reps") => StdevMode::AcrossReps,
        Some("paths") => StdevMode::PooledPaths,
        Some(other) => return Err(r.err("stdev", format!("expected 'reps' or 'paths', got '{other}'"))),
    };
    let sln_method = match r.text("sln")? {
        None | Some("small-time") => SlnMethod::SmallTime,
        Some("three-moment") => SlnMethod::ThreeMoment,
        Some(other) => {
            return Err(r.err("sln", format!("expected 'small-time' or 'three-moment', got '{other}'")))
        }
    };
    let config = RunConfig {
        scheme,
        h: r.real("h")?.unwrap_or(1.0),
        n_paths: r.count("n_paths")?.unwrap_or(100_000) as usize,
        n_reps: r.count("n_reps")?.unwrap_or(50) as usize,
        base_seed: r.count("seed")?.unwrap_or(1),
        stdev_mode,
        sln_method,
    };
    config.validate()?;
    Ok(RunSetup { case, config })
}

pub fn parse_config(text: &str) -> Result<RunSetup> {
    parse_config_with_overrides(text, &[])
}

pub fn parse_config_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<RunSetup> {
    let mut table = parse_table(text)?;
    for (k, v) in overrides {
        apply_override(&mut table, k, v)?;
    }
    setup_from_table(&table, Some(text))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunSetup> {
    load_config_with_overrides(path, &[])
}

pub fn load_config_with_overrides(
    path: impl AsRef<Path>,
    overrides: &[(String, String)],
) -> Result<RunSetup> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_config_with_overrides(&text, overrides)
}

/// Self-contained TOML for `setup`; parsing it gives `setup` back.
pub fn to_toml(setup: &RunSetup) -> String {
    let c = &setup.case;
    let p = &c.params;
    let cfg = &setup.config;
    let mut t = Table::new();
    t.insert("label".into(), Value::String(c.label.clone()));
    for (k, v) in [
        ("f0", p.f0()),
        ("sigma0", p.sigma0()),
        ("vov", p.vov()),
        ("beta", p.beta()),
        ("rho", p.rho()),
        ("h", cfg.h),
    ] {
        t.insert(k.into(), Value::Float(v));
    }
    let floats = |xs: &[f64]| Value::Array(xs.iter().map(|&x| Value::Float(x)).collect());
    t.insert("maturities".into(), floats(&c.maturities));
    t.insert("strikes".into(), floats(&c.strikes));
    t.insert("scheme".into(), Value::String(cfg.scheme.to_string()));
    t.insert("n_paths".into(), Value::Integer(cfg.n_paths as i64));
    t.insert("n_reps".into(), Value::Integer(cfg.n_reps as i64));
    t.insert("seed".into(), Value::Integer(cfg.base_seed as i64));
    let stdev = match cfg.stdev_mode {
        StdevMode::AcrossReps => "reps",
        StdevMode::PooledPaths => "paths",
    };
    t.insert("stdev".into(), Value::String(stdev.into()));
    let sln = match cfg.sln_method {
        SlnMethod::SmallTime => "small-time",
        SlnMethod::ThreeMoment => "three-moment",
    };
    t.insert("sln".into(), Value::String(sln.into()));
    toml::to_string(&t).expect("plain table serializes")
}
