use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use super::{MartingaleRow, RunRow};
use crate::error::{Result, SabrError};

pub const CSV_HEADER: &str = "case,scheme,T,K,h,n_paths,n_reps,price,bias,stdev,rms,cpu_seconds";
pub const MARTINGALE_HEADER: &str =
    "T,scheme,h,forward_error,stderr,atm_price,atm_price_error,cpu_seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    /// Print wall-clock seconds; off gives byte-identical reruns.
    pub timing: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { timing: true }
    }
}

/// 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), fmt_real)
}

fn fmt_time(x: f64, opts: CsvOptions) -> String {
    if opts.timing {
        fmt_real(x)
    } else {
        "NA".to_string()
    }
}

pub fn format_csv(rows: &[RunRow], opts: CsvOptions) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.stats;
        let fields = [
            r.case.clone(),
            r.scheme.to_string(),
            fmt_real(r.maturity),
            fmt_real(r.strike),
            fmt_real(r.h),
            r.n_paths.to_string(),
            r.n_reps.to_string(),
            fmt_real(s.price_mean),
            fmt_opt(s.bias),
            fmt_opt(s.stdev),
            fmt_opt(s.rms),
            fmt_time(s.cpu_seconds, opts),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn format_martingale_csv(rows: &[MartingaleRow], opts: CsvOptions) -> String {
    let mut out = String::from(MARTINGALE_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            fmt_real(r.maturity),
            r.scheme.to_string(),
            fmt_real(r.h),
            fmt_real(r.forward_error),
            fmt_real(r.stderr),
            fmt_real(r.atm_price),
            fmt_opt(r.atm_price_error),
            fmt_time(r.cpu_seconds, opts),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Write `text` to `path`; an existing file is replaced only when
/// `overwrite` is set.
pub fn write_text(path: impl AsRef<Path>, text: &str, overwrite: bool) -> Result<()> {
    let path = path.as_ref();
    let mut opts = OpenOptions::new();
    opts.write(true);
    if overwrite {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut file = opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            SabrError::Config(format!(
                "{} exists; pass the overwrite flag to replace it",
                path.display()
            ))
        } else {
            e.into()
        }
    })?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_results(
    path: impl AsRef<Path>,
    rows: &[RunRow],
    opts: CsvOptions,
    overwrite: bool,
) -> Result<()> {
    write_text(path, &format_csv(rows, opts), overwrite)
}
