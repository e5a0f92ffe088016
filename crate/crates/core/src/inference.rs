//! Cluster-robust variance and Wald-type inference.
//!
//! Scores are Ψⁱ_c = Xⁱ_c ∘ Û_c ∘ ε̂_c. With J = (1/N) DᵀD the sandwich is
//!
//!   Var(θ̂) = (1/N²) J⁻¹ [ Σ_c s_c s_cᵀ ] J⁻¹,   s_c[i] = Σ_p Ψⁱ_cp,
//!
//! i.e. each cluster contributes the outer product of its score sums —
//! the double sum over a cluster's rows collapses to a product of sums.
//! Pointwise: σ̂²(f̂(x)) = r(x) Var(θ̂) r(x)ᵀ with r(x) = (1, x, …, x^q).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{final_design, power_basis, DmlFit};
use crate::linalg::{self, Mat};
use crate::panel::PanelDataset;
use crate::stats;

/// Per-cluster score vectors, one (q+1)×n_c block per cluster.
#[derive(Debug, Clone)]
pub struct ClusterScores {
    /// `per_cluster[c]` has row i = Ψⁱ_c.
    pub per_cluster: Vec<Mat>,
}

/// Ψⁱ_c for every cluster and power.
pub fn build_scores(fit: &DmlFit, ds: &PanelDataset) -> ClusterScores {
    let q = fit.spec.degree();
    let per_cluster = (0..ds.n_clusters())
        .map(|c| {
            let range = ds.cluster_rows(c);
            let mut block = Mat::zeros(q + 1, range.len());
            for (local, r) in range.enumerate() {
                let x = ds.rows()[r].modifier;
                let ue = fit.u_hat[r] * fit.eps_hat[r];
                let mut p = 1.0;
                for i in 0..=q {
                    block[(i, local)] = p * ue;
                    p *= x;
                }
            }
            block
        })
        .collect();
    ClusterScores { per_cluster }
}

/// Scaling matrix, cluster score sums, and the sandwich covariance.
#[derive(Debug, Clone)]
pub struct InferenceState {
    /// J = (1/N) DᵀD, (q+1)×(q+1), symmetric positive definite.
    pub j: Mat,
    /// C×(q+1); row c is the cluster's score-sum vector s_c.
    pub cluster_score_sums: Mat,
    /// Sandwich covariance of θ̂.
    pub var_theta: Mat,
    pub n: usize,
    pub c: usize,
    pub q: usize,
    pub df_correction: bool,
}

/// Plain sandwich (no small-cluster correction).
pub fn sandwich_variance(
    fit: &DmlFit,
    ds: &PanelDataset,
    scores: &ClusterScores,
) -> Result<InferenceState> {
    sandwich_variance_opts(fit, ds, scores, false)
}

/// Sandwich with optional C/(C−1) inflation of the middle matrix for
/// small-cluster sensitivity analysis.
pub fn sandwich_variance_opts(
    fit: &DmlFit,
    ds: &PanelDataset,
    scores: &ClusterScores,
    df_correction: bool,
) -> Result<InferenceState> {
    let q = fit.spec.degree();
    let n = ds.n_rows();
    let c = ds.n_clusters();

    let design = final_design(ds, q, &fit.u_hat);
    let mut j = design.gram();
    j.scale(1.0 / n as f64);

    let mut sums = Mat::zeros(c, q + 1);
    for (ci, block) in scores.per_cluster.iter().enumerate() {
        for i in 0..=q {
            sums[(ci, i)] = block.row(i).iter().sum();
        }
    }

    let mut middle = Mat::zeros(q + 1, q + 1);
    for ci in 0..c {
        let s = sums.row(ci);
        for i in 0..=q {
            for k in 0..=q {
                middle[(i, k)] += s[i] * s[k];
            }
        }
    }
    if df_correction {
        middle.scale(c as f64 / (c as f64 - 1.0));
    }

    let l = linalg::cholesky(&j).ok_or(Error::SingularJ)?;
    let j_inv = linalg::cholesky_inverse(&l);
    let mut var = j_inv.matmul(&middle).matmul(&j_inv);
    var.scale(1.0 / (n as f64 * n as f64));
    var.symmetrize();

    Ok(InferenceState {
        j,
        cluster_score_sums: sums,
        var_theta: var,
        n,
        c,
        q,
        df_correction,
    })
}

/// σ̂(f̂(x)): square root of r(x) Var(θ̂) r(x)ᵀ. Tiny negative quadratic
/// forms (floating-point residue of a PSD matrix) clamp to zero.
pub fn pointwise_se(state: &InferenceState, x: f64) -> f64 {
    let r = power_basis(x, state.q);
    let quad = linalg::quad_form(&state.var_theta, &r);
    debug_assert!(quad >= -1e-12 * state.var_theta.trace().abs());
    quad.max(0.0).sqrt()
}

/// Test decision at a fixed significance level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    FailToReject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Wald,
    Z,
    BootstrapSup,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
    pub p_value: f64,
    pub method: TestMethod,
    /// Reject/fail-to-reject at conventional levels.
    pub decision_at: BTreeMap<String, Decision>,
    /// Set by [`compare_fits`]: the covariance between the two fits is
    /// ignored.
    pub independence_assumed: bool,
}

const DECISION_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

fn decisions(p: f64) -> BTreeMap<String, Decision> {
    DECISION_LEVELS
        .iter()
        .map(|&a| {
            let d = if p < a {
                Decision::Reject
            } else {
                Decision::FailToReject
            };
            (format!("{a:.2}"), d)
        })
        .collect()
}

/// Named restriction presets on the polynomial coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaldPreset {
    /// H₀: θ₀ = … = θ_q = 0 (no effect anywhere).
    Zero,
    /// H₀: θ₁ = … = θ_q = 0 (flat effect); needs q ≥ 1.
    Homogeneous,
    /// H₀: θ₂ = … = θ_q = 0 (effect is linear); needs q ≥ 2.
    Linearity,
}

/// Restriction matrix for a preset, or `RankMismatch` when the preset is
/// degenerate for this degree.
pub fn preset_restriction(preset: WaldPreset, q: usize) -> Result<Mat> {
    let rows: Vec<usize> = match preset {
        WaldPreset::Zero => (0..=q).collect(),
        WaldPreset::Homogeneous => (1..=q).collect(),
        WaldPreset::Linearity => (2..=q).collect(),
    };
    if rows.is_empty() {
        return Err(Error::RankMismatch(format!(
            "{preset:?} restriction is empty for degree q = {q}"
        )));
    }
    let mut r = Mat::zeros(rows.len(), q + 1);
    for (i, &coef) in rows.iter().enumerate() {
        r[(i, coef)] = 1.0;
    }
    Ok(r)
}

/// Wald test of H₀: Rθ = 0 with W = (Rθ̂)ᵀ [R Var Rᵀ]⁻¹ (Rθ̂) ~ χ²_rank(R).
pub fn wald_test(state: &InferenceState, theta: &[f64], restriction: &Mat) -> Result<TestResult> {
    let r = restriction.nrows();
    let k = state.q + 1;
    if restriction.ncols() != k || r > k || r == 0 {
        return Err(Error::RankMismatch(format!(
            "restriction is {r}×{}, parameter has {k} coefficients",
            restriction.ncols()
        )));
    }
    let sv = linalg::singular_values(restriction);
    if sv[r - 1] < 1e-10 * sv[0].max(f64::MIN_POSITIVE) {
        return Err(Error::RankMismatch(
            "restriction rows are linearly dependent".into(),
        ));
    }

    let r_theta = restriction.matvec(theta);
    let rv = restriction
        .matmul(&state.var_theta)
        .matmul(&restriction.transpose());
    let l = linalg::cholesky(&rv).ok_or(Error::SingularRestriction)?;
    let solved = linalg::cholesky_solve(&l, &r_theta);
    let w = linalg::dot(&r_theta, &solved).max(0.0);
    let p = stats::chi2_sf(w, r);
    Ok(TestResult {
        statistic: w,
        dof: Some(r),
        p_value: p,
        method: TestMethod::Wald,
        decision_at: decisions(p),
        independence_assumed: false,
    })
}

/// Wald test for a named preset.
pub fn wald_test_preset(
    state: &InferenceState,
    theta: &[f64],
    preset: WaldPreset,
) -> Result<TestResult> {
    let restriction = preset_restriction(preset, state.q)?;
    wald_test(state, theta, &restriction)
}

/// Two-sided z-test of H₀: aᵀθ = 0.
pub fn linear_combination_test(
    state: &InferenceState,
    theta: &[f64],
    a: &[f64],
) -> Result<TestResult> {
    if a.len() != state.q + 1 {
        return Err(Error::RankMismatch(format!(
            "weight vector has length {}, expected {}",
            a.len(),
            state.q + 1
        )));
    }
    let var = linalg::quad_form(&state.var_theta, a);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let z = linalg::dot(a, theta) / var.sqrt();
    let p = stats::normal_two_sided_p(z);
    Ok(TestResult {
        statistic: z,
        dof: None,
        p_value: p,
        method: TestMethod::Z,
        decision_at: decisions(p),
        independence_assumed: false,
    })
}

/// Preset z-test of f̂(x) = 0, i.e. [`linear_combination_test`] with
/// weights r(x) = (1, x, …, x^q). The workhorse cases are x = 1 (mistakes
/// share) and x = 1/2 (cancellation point).
pub fn effect_point_test(state: &InferenceState, theta: &[f64], x: f64) -> Result<TestResult> {
    linear_combination_test(state, theta, &power_basis(x, state.q))
}

/// Partisan-voting-mistakes estimand |f̂(1)| with its signed components.
#[derive(Debug, Clone, Serialize)]
pub struct MistakesEstimate {
    /// |f̂(1)|.
    pub point: f64,
    /// f̂(1).
    pub signed_value: f64,
    /// SE of f̂(1) (the signed quantity; the absolute value is not
    /// differentiable at zero).
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Two-sided p-value for f̂(1) = 0.
    pub p_value: f64,
}

/// Mistakes share from a fit: signed 95% interval f̂(1) ± 1.96·SE mapped
/// through |·|. When the signed interval straddles zero the lower end of
/// the mistakes interval is zero.
pub fn mistakes(fit: &DmlFit, state: &InferenceState) -> MistakesEstimate {
    let signed = fit.effect_at(1.0);
    let se = pointwise_se(state, 1.0);
    let (lo, hi) = (signed - 1.96 * se, signed + 1.96 * se);
    let (ci_low, ci_high) = if lo <= 0.0 && hi >= 0.0 {
        (0.0, lo.abs().max(hi.abs()))
    } else {
        (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()))
    };
    let p_value = match effect_point_test(state, &fit.theta, 1.0) {
        Ok(t) => t.p_value,
        // Degenerate zero-variance estimate: the point either is zero or
        // trivially differs from it.
        Err(_) => {
            if signed == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    MistakesEstimate {
        point: signed.abs(),
        signed_value: signed,
        se,
        ci_low,
        ci_high,
        p_value,
    }
}

/// z-test of f̂_a(x) − f̂_b(x) = 0 across two independent fits. The fits
/// share cross-fitting randomness in practice; that covariance is ignored
/// and the result is flagged accordingly.
pub fn compare_fits(
    fit_a: &DmlFit,
    state_a: &InferenceState,
    fit_b: &DmlFit,
    state_b: &InferenceState,
    x: f64,
) -> Result<TestResult> {
    if fit_a.spec.degree() != fit_b.spec.degree() {
        return Err(Error::SpecMismatch(
            fit_a.spec.degree(),
            fit_b.spec.degree(),
        ));
    }
    let diff = fit_a.effect_at(x) - fit_b.effect_at(x);
    let var = pointwise_se(state_a, x).powi(2) + pointwise_se(state_b, x).powi(2);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let z = diff / var.sqrt();
    let p = stats::normal_two_sided_p(z);
    Ok(TestResult {
        statistic: z,
        dof: None,
        p_value: p,
        method: TestMethod::Z,
        decision_at: decisions(p),
        independence_assumed: true,
    })
}
