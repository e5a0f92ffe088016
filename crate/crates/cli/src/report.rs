//! JSON report assembly.
//!
//! Reports serialize through `serde_json::Value`, whose map is a BTreeMap:
//! keys come out sorted, so byte-level diffs between runs are meaningful.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use flipdml::bootstrap::{BandResult, SupTestResult};
use flipdml::inference::{InferenceState, TestResult};
use flipdml::panel::DesignSummary;
use flipdml::stats;
use flipdml::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub dataset_path: String,
    pub dataset_digest: String,
    pub validation: String,
    pub spec_q: usize,
    pub learner: String,
    pub k_folds: usize,
    pub seed: u64,
    pub bootstrap_m: usize,
    pub grid_points: usize,
    pub alpha: f64,
    pub df_correction: bool,
}

pub fn tool_id() -> String {
    format!("flipdml {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub index: usize,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// One row per θ̂_i: estimate, cluster-robust SE, t = estimate/SE,
/// two-sided normal p, and the (1−α) CI.
pub fn coefficient_table(theta: &[f64], state: &InferenceState, alpha: f64) -> Vec<CoefficientRow> {
    let z = stats::normal_quantile(1.0 - alpha / 2.0);
    theta
        .iter()
        .enumerate()
        .map(|(i, &est)| {
            let se = state.var_theta[(i, i)].max(0.0).sqrt();
            let t = if se > 0.0 { est / se } else { f64::INFINITY };
            CoefficientRow {
                index: i,
                estimate: est,
                se,
                t,
                p_value: if se > 0.0 {
                    stats::normal_two_sided_p(t)
                } else {
                    0.0
                },
                ci_low: est - z * se,
                ci_high: est + z * se,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct WaldBlock {
    pub zero: TestResult,
    /// Not applicable (null) for the constant spec.
    pub homogeneous: Option<TestResult>,
    /// Defined for q >= 2 only.
    pub linearity: Option<TestResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupBlock {
    pub zero_sup: SupTestResult,
    pub homogeneous_sup: SupTestResult,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub provenance: Provenance,
    pub design: DesignSummary,
    pub coefficients: Vec<CoefficientRow>,
    pub tests: WaldBlock,
    pub mistakes: flipdml::inference::MistakesEstimate,
    pub curve: BandResult,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct TestReport {
    pub provenance: Provenance,
    pub design: DesignSummary,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wald: Option<WaldBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup: Option<SupBlock>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct BandReport {
    pub provenance: Provenance,
    pub design: DesignSummary,
    pub curve: BandResult,
    pub warnings: Vec<String>,
}

/// Render any report as pretty JSON with sorted keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    let mut s = serde_json::to_string_pretty(&v)
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Write to `--out` or stdout.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".to_string(),
            source: e,
        }),
    }
}

/// Curve CSV with both bands: `x,f_hat,se,pw_lo,pw_hi,uni_lo,uni_hi`.
pub fn write_curve_csv(band: &BandResult, path: &Path) -> Result<()> {
    let mut out = String::from("x,f_hat,se,pw_lo,pw_hi,uni_lo,uni_hi\n");
    for i in 0..band.grid.len() {
        let f = band.f_hat[i];
        let pw = band.pointwise_halfwidth[i];
        let uni = band.uniform_halfwidth[i];
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            band.grid[i],
            f,
            band.se[i],
            f - pw,
            f + pw,
            f - uni,
            f + uni
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
