//! Benchmark prices and published statistics shipped with the crate.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Result, SabrError};

const FIXTURE_TEXT: &str = include_str!("../../fixtures/fdm.toml");
const KEY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize)]
pub struct PriceTable {
    pub case: String,
    pub maturity: f64,
    pub strikes: Vec<f64>,
    pub values: Vec<f64>,
    pub source: String,
    pub provenance: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct StdevRow {
    pub case: String,
    pub maturity: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Annotation {
    pub case: String,
    pub method: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RmsTable {
    pub case: String,
    pub maturity: f64,
    pub strike: f64,
    pub n_paths: Vec<usize>,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Fixtures {
    #[serde(default)]
    pub price: Vec<PriceTable>,
    #[serde(default)]
    pub stdev: Vec<StdevRow>,
    #[serde(default)]
    pub annotation: Vec<Annotation>,
    #[serde(default)]
    pub rms: Vec<RmsTable>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= KEY_TOL * a.abs().max(b.abs()).max(1.0)
}

impl Fixtures {
    pub fn parse(text: &str) -> Result<Self> {
        let fx: Fixtures = toml::from_str(text).map_err(|e| SabrError::Parse {
            field: "fixtures".into(),
            message: e.to_string(),
        })?;
        for t in &fx.price {
            if t.strikes.len() != t.values.len() {
                return Err(SabrError::Parse {
                    field: format!("price.{}", t.case),
                    message: "strikes and values differ in length".into(),
                });
            }
        }
        Ok(fx)
    }

    /// The fixtures compiled into the library.
    pub fn builtin() -> &'static Fixtures {
        static CELL: OnceLock<Fixtures> = OnceLock::new();
        CELL.get_or_init(|| Fixtures::parse(FIXTURE_TEXT).expect("shipped fixtures parse"))
    }

    pub fn price_table(&self, case: &str, maturity: f64) -> Option<&PriceTable> {
        self.price
            .iter()
            .find(|t| t.case == case && close(t.maturity, maturity))
    }

    /// Benchmark price for `(case, T, K)`.
    pub fn price(&self, case: &str, maturity: f64, strike: f64) -> Option<f64> {
        let t = self.price_table(case, maturity)?;
        t.strikes
            .iter()
            .position(|&k| close(k, strike))
            .map(|i| t.values[i])
    }

    /// Published per-repetition stdev at `(case, T, h)`, aligned with the
    /// strikes of the matching price table.
    pub fn reported_stdev(&self, case: &str, maturity: f64, h: f64) -> Option<&[f64]> {
        self.stdev
            .iter()
            .find(|r| r.case == case && close(r.maturity, maturity) && close(r.h, h))
            .map(|r| r.values.as_slice())
    }

    pub fn annotation(&self, case: &str, method: &str) -> Option<&[f64]> {
        self.annotation
            .iter()
            .find(|a| a.case == case && a.method == method)
            .map(|a| a.values.as_slice())
    }

    pub fn rms_table(&self, case: &str) -> Option<&RmsTable> {
        self.rms.iter().find(|r| r.case == case)
    }
}
