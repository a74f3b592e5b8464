use crate::engine::SabrParams;
use crate::error::{Result, SabrError};

/// A benchmark parameter set with its maturities and strikes.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub label: String,
    pub params: SabrParams,
    pub maturities: Vec<f64>,
    pub strikes: Vec<f64>,
}

pub const BUILTIN_CASES: [&str; 5] = ["case1", "case2", "case3", "case4", "case5"];

impl CaseSpec {
    pub fn new(
        label: impl Into<String>,
        params: SabrParams,
        maturities: Vec<f64>,
        strikes: Vec<f64>,
    ) -> Result<Self> {
        if maturities.is_empty() || strikes.is_empty() {
            return Err(SabrError::Config(
                "a case needs at least one maturity and one strike".into(),
            ));
        }
        if let Some(&t) = maturities.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(SabrError::domain("maturity", t));
        }
        if let Some(&k) = strikes.iter().find(|&&k| !(k >= 0.0 && k.is_finite())) {
            return Err(SabrError::domain("strike", k));
        }
        Ok(Self {
            label: label.into(),
            params,
            maturities,
            strikes,
        })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let ratios = [0.2, 0.4, 0.8, 1.0, 1.2, 1.6, 2.0];
        let (params, maturities, strikes) = match name {
            "case1" => (SabrParams::new(1.0, 0.25, 0.3, 0.3, -0.8)?, vec![10.0], ratios.to_vec()),
            "case2" => (SabrParams::new(1.0, 0.25, 0.3, 0.6, -0.5)?, vec![10.0], ratios.to_vec()),
            "case3" => (
                SabrParams::new(0.05, 0.4, 0.6, 0.3, 0.0)?,
                vec![1.0],
                vec![0.02, 0.04, 0.05, 0.06, 0.08, 0.10],
            ),
            "case4" => (SabrParams::new(1.1, 0.4, 0.8, 0.3, -0.3)?, vec![4.0], vec![1.1]),
            "case5" => (
                SabrParams::new(1.1, 0.3, 0.5, 0.4, -0.8)?,
                (1..=10).map(f64::from).collect(),
                vec![1.1],
            ),
            other => {
                return Err(SabrError::Config(format!(
                    "unknown case '{other}' (expected one of {})",
                    BUILTIN_CASES.join(", ")
                )))
            }
        };
        Self::new(name, params, maturities, strikes)
    }

    /// Index of the at-the-money strike, if the case has one.
    pub fn atm_index(&self) -> Option<usize> {
        let f0 = self.params.f0();
        self.strikes
            .iter()
            .position(|&k| (k - f0).abs() <= 1e-12 * f0)
    }
}
