//! Final-stage estimation: residual-on-residual least squares.
//!
//! With out-of-fold outcome residuals V̂ and treatment residuals
//! Û_c = T_c − T̄ (T̄ the cluster-level sample mean — treatment is
//! randomized, so its model is just the mean), the flip-effect
//! coefficients solve
//!
//!   min_θ ‖ V̂ − Σ_i θ_i (Xⁱ ∘ Û) ‖²
//!
//! giving f̂(x) = θ̂₀ + θ̂₁x + … + θ̂_q x^q. The i = 0 regressor is Û
//! itself; no separate intercept enters the final stage (level effects
//! live in the nuisance model).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::nuisance::{crossfit_outcome, make_folds, FoldDiagnostics, FoldPlan, LearnerSpec};
use crate::panel::{validate_design, PanelDataset};

/// Polynomial degree of the effect curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PolySpec {
    q: usize,
}

impl PolySpec {
    pub fn new(q: usize) -> Self {
        PolySpec { q }
    }

    /// Constant effect (average treatment effect).
    pub fn constant() -> Self {
        PolySpec { q: 0 }
    }

    pub fn linear() -> Self {
        PolySpec { q: 1 }
    }

    pub fn cubic() -> Self {
        PolySpec { q: 3 }
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    /// Number of coefficients, q + 1.
    pub fn n_coef(&self) -> usize {
        self.q + 1
    }
}

/// Power basis r(x) = (1, x, …, x^q).
pub fn power_basis(x: f64, q: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(q + 1);
    let mut p = 1.0;
    for _ in 0..=q {
        r.push(p);
        p *= x;
    }
    r
}

/// Horner evaluation of θ₀ + θ₁x + … .
pub fn poly_eval(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Relative smallest-singular-value tolerance for the final-stage design.
const RANK_TOL: f64 = 1e-10;

/// Fitted coefficients with the residual triplet and provenance.
#[derive(Debug, Clone)]
pub struct DmlFit {
    /// θ̂, length q + 1.
    pub theta: Vec<f64>,
    /// Out-of-fold outcome residuals V̂ (length N).
    pub v_hat: Vec<f64>,
    /// Treatment residuals Û expanded to rows (constant within cluster).
    pub u_hat: Vec<f64>,
    /// Final-stage residuals ε̂ = V̂ − Dθ̂ (length N).
    pub eps_hat: Vec<f64>,
    /// Cluster-level treated share T̄ = (1/C) Σ T_c.
    pub treated_mean: f64,
    pub spec: PolySpec,
    pub fold_plan: FoldPlan,
    pub learner_desc: String,
    pub seed: u64,
    pub fold_diagnostics: Vec<FoldDiagnostics>,
    pub warnings: Vec<String>,
}

impl DmlFit {
    /// f̂(x).
    pub fn effect_at(&self, x: f64) -> f64 {
        poly_eval(&self.theta, x)
    }
}

/// Free-function form of [`DmlFit::effect_at`].
pub fn effect_at(fit: &DmlFit, x: f64) -> f64 {
    fit.effect_at(x)
}

/// Treatment residuals: Û_c = T_c − T̄ replicated across the cluster's rows.
pub fn treatment_residuals(ds: &PanelDataset) -> Result<(f64, Vec<f64>)> {
    validate_design(ds)?;
    let treatments = ds.treatments();
    let treated_mean = treatments.iter().sum::<f64>() / treatments.len() as f64;
    let mut u_hat = vec![0.0; ds.n_rows()];
    for (c, &t) in treatments.iter().enumerate() {
        for r in ds.cluster_rows(c) {
            u_hat[r] = t - treated_mean;
        }
    }
    Ok((treated_mean, u_hat))
}

/// Final-stage design matrix D with columns Xⁱ ∘ Û for i = 0..q.
pub(crate) fn final_design(ds: &PanelDataset, q: usize, u_hat: &[f64]) -> Mat {
    let mut d = Mat::zeros(ds.n_rows(), q + 1);
    for (r, row) in ds.rows().iter().enumerate() {
        let u = u_hat[r];
        let mut p = 1.0;
        for i in 0..=q {
            d[(r, i)] = p * u;
            p *= row.modifier;
        }
    }
    d
}

/// Run the full estimation pipeline: cross-fit the outcome model, form
/// treatment residuals, and solve the final-stage least squares.
pub fn fit_dml(
    ds: &PanelDataset,
    spec: PolySpec,
    learner: &LearnerSpec,
    k_folds: usize,
    seed: u64,
) -> Result<DmlFit> {
    validate_design(ds)?;
    let plan = make_folds(ds, k_folds, seed)?;
    let residuals = crossfit_outcome(ds, learner, &plan)?;
    fit_final_stage(ds, spec, residuals.v_hat, plan, learner.describe(), seed, residuals.folds)
}

/// Final stage on precomputed outcome residuals.
pub(crate) fn fit_final_stage(
    ds: &PanelDataset,
    spec: PolySpec,
    v_hat: Vec<f64>,
    fold_plan: FoldPlan,
    learner_desc: String,
    seed: u64,
    fold_diagnostics: Vec<FoldDiagnostics>,
) -> Result<DmlFit> {
    let (treated_mean, u_hat) = treatment_residuals(ds)?;
    let mut warnings = Vec::new();
    if spec.n_coef() > ds.n_clusters() {
        warnings.push(format!(
            "final stage estimates {} coefficients from only {} clusters",
            spec.n_coef(),
            ds.n_clusters()
        ));
    }

    let design = final_design(ds, spec.degree(), &u_hat);
    let sv = linalg::singular_values(&design);
    if sv[0] <= 0.0 || sv[spec.degree()] < RANK_TOL * sv[0] {
        return Err(Error::RankDeficient);
    }
    let theta = linalg::least_squares_qr(&design, &v_hat);
    let fitted = design.matvec(&theta);
    let eps_hat: Vec<f64> = v_hat.iter().zip(&fitted).map(|(v, f)| v - f).collect();

    #[cfg(debug_assertions)]
    {
        // Normal equations: the final-stage residuals are orthogonal to
        // every regressor column.
        for i in 0..spec.n_coef() {
            let g: f64 = (0..ds.n_rows()).map(|r| eps_hat[r] * design[(r, i)]).sum();
            debug_assert!(
                g.abs() <= 1e-8 * ds.n_rows() as f64,
                "normal equations violated in column {i}: {g}"
            );
        }
    }

    Ok(DmlFit {
        theta,
        v_hat,
        u_hat,
        eps_hat,
        treated_mean,
        spec,
        fold_plan,
        learner_desc,
        seed,
        fold_diagnostics,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{PanelDataset, PrecinctRow, ValidationMode};
    use crate::testutil::dataset_from;
    use std::sync::Arc;

    #[test]
    fn treatment_residuals_two_clusters() {
        let ds = dataset_from(&[
            (true, vec![(0.5, 0.5)]),
            (false, vec![(0.5, 0.5)]),
        ]);
        let (mean, u) = treatment_residuals(&ds).unwrap();
        assert_eq!(mean, 0.5);
        assert_eq!(u, vec![0.5, -0.5]);
    }

    #[test]
    fn treatment_residuals_unbalanced() {
        let ds = dataset_from(&[
            (true, vec![(0.5, 0.5)]),
            (true, vec![(0.5, 0.5)]),
            (true, vec![(0.5, 0.5)]),
            (false, vec![(0.5, 0.5)]),
        ]);
        let (mean, u) = treatment_residuals(&ds).unwrap();
        assert!((mean - 0.75).abs() < 1e-15);
        assert_eq!(u, vec![0.25, 0.25, 0.25, -0.75]);
    }

    #[test]
    fn all_treated_is_degenerate() {
        let ds = dataset_from(&[(true, vec![(0.5, 0.5)]), (true, vec![(0.5, 0.5)])]);
        let err = treatment_residuals(&ds).unwrap_err();
        assert_eq!(err.kind(), "DegenerateTreatment");
    }

    #[test]
    fn hand_solved_constant_effect() {
        // Oracle nuisance g ≡ 0 so V̂ = Y. Treated cluster has Y = 1,
        // control has Y = 0: θ̂₀ = ΣV̂Û / ΣÛ² = 1.0 exactly.
        let ds = dataset_from(&[
            (true, vec![(1.0, 0.2), (1.0, 0.8)]),
            (false, vec![(0.0, 0.3), (0.0, 0.7)]),
        ]);
        let oracle = LearnerSpec::Oracle(Arc::new(|_: &[f64]| 0.0));
        let fit = fit_dml(&ds, PolySpec::constant(), &oracle, 2, 1).unwrap();
        assert!((fit.theta[0] - 1.0).abs() < 1e-12, "{:?}", fit.theta);

        // Independent direct solve of the same 1-D least squares.
        let (_, u) = treatment_residuals(&ds).unwrap();
        let v: Vec<f64> = ds.rows().iter().map(|r| r.outcome).collect();
        let num: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
        let den: f64 = u.iter().map(|b| b * b).sum();
        assert!((fit.theta[0] - num / den).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_gives_zero_theta() {
        let ds = dataset_from(&[
            (true, vec![(0.5, 0.2), (0.5, 0.8)]),
            (false, vec![(0.5, 0.3), (0.5, 0.7)]),
            (true, vec![(0.5, 0.4), (0.5, 0.6)]),
            (false, vec![(0.5, 0.1), (0.5, 0.9)]),
        ]);
        let fit = fit_dml(&ds, PolySpec::linear(), &LearnerSpec::Mean, 2, 3).unwrap();
        for t in &fit.theta {
            assert!(t.abs() < 1e-10);
        }
        for e in &fit.eps_hat {
            assert!(e.abs() < 1e-10);
        }
    }

    #[test]
    fn identical_modifier_is_rank_deficient_for_linear_spec() {
        let ds = dataset_from(&[
            (true, vec![(0.6, 0.5), (0.7, 0.5)]),
            (false, vec![(0.4, 0.5), (0.3, 0.5)]),
        ]);
        let oracle = LearnerSpec::Oracle(Arc::new(|_: &[f64]| 0.0));
        let err = fit_dml(&ds, PolySpec::linear(), &oracle, 2, 1).unwrap_err();
        assert_eq!(err.kind(), "RankDeficient");
    }

    #[test]
    fn effect_at_examples() {
        let ds = dataset_from(&[
            (true, vec![(0.5, 0.2), (0.5, 0.8)]),
            (false, vec![(0.5, 0.3), (0.5, 0.7)]),
        ]);
        let mut fit = fit_dml(&ds, PolySpec::linear(), &LearnerSpec::Mean, 2, 1).unwrap();

        fit.theta = vec![0.05, -0.1];
        assert!(fit.effect_at(0.5).abs() < 1e-15);
        fit.theta = vec![0.7, 0.0, 0.0];
        assert!((fit.effect_at(0.123) - 0.7).abs() < 1e-15);
        fit.theta = vec![0.03, -0.06, 0.0, 0.0];
        assert!((effect_at(&fit, 1.0) + 0.03).abs() < 1e-15);
    }

    #[test]
    fn outcome_scale_equivariance() {
        let ds = dataset_from(&[
            (true, vec![(0.61, 0.2), (0.72, 0.8), (0.55, 0.5)]),
            (false, vec![(0.40, 0.3), (0.35, 0.7), (0.52, 0.6)]),
            (true, vec![(0.58, 0.45), (0.66, 0.9)]),
            (false, vec![(0.41, 0.15), (0.44, 0.55)]),
        ]);
        let oracle = LearnerSpec::Oracle(Arc::new(|_: &[f64]| 0.0));
        let fit1 = fit_dml(&ds, PolySpec::linear(), &oracle, 2, 1).unwrap();

        let scaled_rows: Vec<PrecinctRow> = ds
            .rows()
            .iter()
            .map(|r| PrecinctRow {
                outcome: 3.0 * r.outcome,
                ..r.clone()
            })
            .collect();
        let ds3 = PanelDataset::from_parts(
            ds.contests().to_vec(),
            scaled_rows,
            vec![],
            vec![],
            ValidationMode::Synthetic,
        )
        .unwrap();
        let fit3 = fit_dml(&ds3, PolySpec::linear(), &oracle, 2, 1).unwrap();
        for (a, b) in fit1.theta.iter().zip(&fit3.theta) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }
}
