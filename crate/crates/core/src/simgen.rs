//! Synthetic election-panel generator with known ground truth, plus the
//! Monte Carlo study harness used to validate estimation and inference.
//!
//! The default truth mode encodes a linear mistakes mechanism: a fraction
//! `m` of each party's partisan voters follows party order, so a flip
//! costs the candidate m·x of their own base and gains m·(1−x) from the
//! other side — exactly f(x) = m(1 − 2x), with |f(1)| = m.
//!
//! Outcomes are deliberately *not* clamped to [0, 1]: clamping would break
//! the additive outcome model and contaminate coverage studies. Default
//! effect sizes and noise keep overflow rare; generated datasets are
//! tagged for the `synthetic` validation mode.

use rand::RngExt;
use rand_distr::{Beta, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::bootstrap::{
    multiplier_draws, sup_test_homogeneous_with_draws, sup_test_zero_with_draws,
    uniform_critical_value, GridSpec,
};
use crate::error::{Error, Result};
use crate::estimator::{fit_dml, poly_eval, PolySpec};
use crate::inference::{
    build_scores, mistakes, pointwise_se, sandwich_variance_opts, wald_test_preset, WaldPreset,
};
use crate::nuisance::{LearnerSpec, OracleFn};
use crate::panel::{Contest, PanelDataset, PrecinctRow, ValidationMode, ZValue};
use crate::rng;
use crate::stats;

/// Shape of the generating effect curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSpec {
    /// f(x) = m(1 − 2x); `m` is the true mistakes share.
    LinearMistakes { m: f64 },
    /// Arbitrary polynomial coefficients (ascending powers).
    CustomPoly { theta: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    /// Cluster count C.
    pub clusters: usize,
    /// Precincts per cluster, drawn uniformly from this inclusive range.
    pub n_range: (usize, usize),
    pub treated_prob: f64,
    pub truth: TruthSpec,
    pub g_kind: GKind,
    pub noise_sd: f64,
    /// Precinct covariate effects (length `n_w`).
    pub beta_w: Vec<f64>,
    /// Cluster covariate effects (length `n_z`).
    pub gamma_z: Vec<f64>,
    /// Beta(a, b) shape of the presidential vote share.
    pub x_dist: (f64, f64),
    pub n_w: usize,
    pub n_z: usize,
    pub seed: u64,
}

/// Default covariate effect pattern: alternating ±0.05.
pub fn default_effects(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i % 2 == 0 { 0.05 } else { -0.05 })
        .collect()
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            clusters: 40,
            n_range: (100, 100),
            treated_prob: 0.5,
            truth: TruthSpec::LinearMistakes { m: 0.05 },
            g_kind: GKind::Linear,
            noise_sd: 0.05,
            beta_w: default_effects(2),
            gamma_z: default_effects(2),
            x_dist: (2.0, 2.0),
            n_w: 2,
            n_z: 2,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.clusters < 2 {
            return bad(format!("need at least 2 clusters, got {}", self.clusters));
        }
        if self.n_range.0 < 1 || self.n_range.0 > self.n_range.1 {
            return bad(format!("invalid precinct range {:?}", self.n_range));
        }
        if !(self.treated_prob > 0.0 && self.treated_prob < 1.0) {
            return bad(format!(
                "treated_prob must be in (0, 1), got {}",
                self.treated_prob
            ));
        }
        if self.noise_sd < 0.0 {
            return bad(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if let TruthSpec::LinearMistakes { m } = self.truth {
            if !(0.0..1.0).contains(&m) {
                return bad(format!("mistake rate m must be in [0, 1), got {m}"));
            }
        }
        if self.x_dist.0 <= 0.0 || self.x_dist.1 <= 0.0 {
            return bad(format!("Beta shapes must be positive, got {:?}", self.x_dist));
        }
        if self.beta_w.len() != self.n_w {
            return bad(format!(
                "beta_w has length {}, expected n_w = {}",
                self.beta_w.len(),
                self.n_w
            ));
        }
        if self.gamma_z.len() != self.n_z {
            return bad(format!(
                "gamma_z has length {}, expected n_z = {}",
                self.gamma_z.len(),
                self.n_z
            ));
        }
        Ok(())
    }

    /// Coefficients of the generating effect polynomial.
    pub fn truth_coefficients(&self) -> Vec<f64> {
        match &self.truth {
            TruthSpec::LinearMistakes { m } => vec![*m, -2.0 * m],
            TruthSpec::CustomPoly { theta } => theta.clone(),
        }
    }
}

/// Ground truth attached to a generated panel.
#[derive(Clone)]
pub struct SimTruth {
    /// Generating effect polynomial (ascending powers).
    pub true_f: Vec<f64>,
    /// |f(1)| — the true mistakes share.
    pub true_mistakes: f64,
    /// Large-sample target of the pooled outcome regression as an oracle
    /// over the encoded feature row `[x, w…, z…]`: g(x, w, z) + T̄·f(x),
    /// with T̄ the realized treated share. The T̄·f term is what a pooled
    /// regression of Y on (X, W, Z) converges to, and the final stage is
    /// exact only once the nuisance absorbs it (there is no intercept in
    /// the residual-on-residual step).
    pub oracle: OracleFn,
}

impl std::fmt::Debug for SimTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimTruth")
            .field("true_f", &self.true_f)
            .field("true_mistakes", &self.true_mistakes)
            .finish_non_exhaustive()
    }
}

fn nuisance_value(g_kind: GKind, beta_w: &[f64], gamma_z: &[f64], x: f64, w: &[f64], z: &[f64]) -> f64 {
    let mut g = 0.2 + 0.6 * x;
    g += w.iter().zip(beta_w).map(|(a, b)| a * b).sum::<f64>();
    g += z.iter().zip(gamma_z).map(|(a, b)| a * b).sum::<f64>();
    if g_kind == GKind::Nonlinear {
        g += 0.1 * (2.0 * std::f64::consts::PI * x).sin();
        if let Some(w1) = w.first() {
            g += 0.05 * x * w1;
        }
    }
    g
}

/// Generate a synthetic panel. Deterministic in the config: one seeded
/// stream drawn in a fixed order (treatments; then per cluster n_c and z;
/// then per precinct x, w, noise). A degenerate treatment draw is redrawn
/// once; a second degenerate draw is an error.
pub fn generate(cfg: &SimConfig) -> Result<(PanelDataset, SimTruth)> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let true_f = cfg.truth_coefficients();

    let draw_treatments = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<bool> {
        (0..cfg.clusters)
            .map(|_| rng.random::<f64>() < cfg.treated_prob)
            .collect()
    };
    let degenerate = |t: &[bool]| t.iter().all(|&v| v) || t.iter().all(|&v| !v);
    let mut treatments = draw_treatments(&mut rng);
    if degenerate(&treatments) {
        treatments = draw_treatments(&mut rng);
        if degenerate(&treatments) {
            return Err(Error::DegenerateTreatment);
        }
    }

    let x_beta = Beta::new(cfg.x_dist.0, cfg.x_dist.1)
        .map_err(|e| Error::InvalidConfig(format!("invalid Beta shapes: {e}")))?;

    let mut contests = Vec::with_capacity(cfg.clusters);
    let mut rows = Vec::new();
    for (c, &treated) in treatments.iter().enumerate() {
        let n_c = rng.random_range(cfg.n_range.0..=cfg.n_range.1);
        let z: Vec<f64> = (0..cfg.n_z).map(|_| rng.sample(StandardNormal)).collect();
        let contest_id = format!("c{c:04}");
        contests.push(Contest {
            contest_id: contest_id.clone(),
            treatment: treated,
            covariates: z.iter().map(|&v| ZValue::Num(v)).collect(),
        });
        for p in 0..n_c {
            let x: f64 = rng.sample(x_beta);
            let w: Vec<f64> = (0..cfg.n_w).map(|_| rng.sample(StandardNormal)).collect();
            let noise: f64 = rng.sample(StandardNormal);
            let g = nuisance_value(cfg.g_kind, &cfg.beta_w, &cfg.gamma_z, x, &w, &z);
            let effect = if treated { poly_eval(&true_f, x) } else { 0.0 };
            rows.push(PrecinctRow {
                contest_id: contest_id.clone(),
                precinct_id: format!("c{c:04}-p{p:04}"),
                outcome: g + effect + cfg.noise_sd * noise,
                modifier: x,
                covariates: w,
            });
        }
    }

    let w_names = (1..=cfg.n_w).map(|i| i.to_string()).collect();
    let z_names = (1..=cfg.n_z).map(|i| i.to_string()).collect();
    let ds = PanelDataset::from_parts(contests, rows, w_names, z_names, ValidationMode::Synthetic)?;

    let treated_mean =
        treatments.iter().filter(|&&t| t).count() as f64 / treatments.len() as f64;
    let (g_kind, beta_w, gamma_z, n_w) =
        (cfg.g_kind, cfg.beta_w.clone(), cfg.gamma_z.clone(), cfg.n_w);
    let oracle_f = true_f.clone();
    let oracle: OracleFn = Arc::new(move |feats: &[f64]| {
        nuisance_value(
            g_kind,
            &beta_w,
            &gamma_z,
            feats[0],
            &feats[1..1 + n_w],
            &feats[1 + n_w..],
        ) + treated_mean * poly_eval(&oracle_f, feats[0])
    });
    let true_mistakes = poly_eval(&true_f, 1.0).abs();
    Ok((
        ds,
        SimTruth {
            true_f,
            true_mistakes,
            oracle,
        },
    ))
}

/// Estimation settings shared by every Monte Carlo repetition.
#[derive(Debug, Clone)]
pub struct EstConfig {
    pub spec: PolySpec,
    pub learner: LearnerSpec,
    pub k_folds: usize,
    pub grid: GridSpec,
    /// Bootstrap replications per repetition.
    pub m: usize,
    pub alpha: f64,
    pub df_correction: bool,
}

impl Default for EstConfig {
    fn default() -> Self {
        EstConfig {
            spec: PolySpec::cubic(),
            learner: LearnerSpec::boosted_default(),
            k_folds: 5,
            grid: GridSpec::default_grid(),
            m: 2000,
            alpha: 0.05,
            df_correction: false,
        }
    }
}

/// A rate with its Monte Carlo standard error √(p(1−p)/reps).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateWithSe {
    pub rate: f64,
    pub mc_se: f64,
}

fn rate(hits: usize, reps: usize) -> RateWithSe {
    let p = hits as f64 / reps as f64;
    RateWithSe {
        rate: p,
        mc_se: (p * (1.0 - p) / reps as f64).sqrt(),
    }
}

/// Aggregated Monte Carlo study results.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub reps: usize,
    pub alpha: f64,
    /// Generating coefficients padded/truncated to the fitted length.
    pub true_theta: Vec<f64>,
    pub true_f1: f64,
    pub true_mistakes: f64,
    pub theta_bias: Vec<f64>,
    pub theta_rmse: Vec<f64>,
    pub f1_bias: f64,
    pub f1_rmse: f64,
    pub mistakes_mean: f64,
    pub mistakes_median: f64,
    pub mistakes_mean_mc_se: f64,
    /// Coverage of the pointwise (1−α) CI for f(1).
    pub pointwise_coverage_f1: RateWithSe,
    /// Simultaneous coverage of the uniform band over the whole grid.
    pub uniform_coverage: RateWithSe,
    pub reject_wald_zero: RateWithSe,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject_wald_homogeneous: Option<RateWithSe>,
    pub reject_sup_zero: RateWithSe,
    pub reject_sup_homogeneous: RateWithSe,
    pub mean_critical_value: f64,
    pub min_critical_value: f64,
}

struct RepOutcome {
    theta: Vec<f64>,
    f1_hat: f64,
    mistakes_point: f64,
    covered_pointwise: bool,
    covered_uniform: bool,
    critical_value: f64,
    reject_wald_zero: bool,
    reject_wald_homogeneous: Option<bool>,
    reject_sup_zero: bool,
    reject_sup_homogeneous: bool,
}

fn run_rep(cfg: &SimConfig, est: &EstConfig, rep_base: u64) -> Result<RepOutcome> {
    let mut rep_cfg = cfg.clone();
    rep_cfg.seed = rng::derive_seed(rep_base, 0);
    let fit_seed = rng::derive_seed(rep_base, 1);
    let boot_seed = rng::derive_seed(rep_base, 2);

    let (ds, truth) = generate(&rep_cfg)?;
    let fit = fit_dml(&ds, est.spec, &est.learner, est.k_folds, fit_seed)?;
    let scores = build_scores(&fit, &ds);
    let state = sandwich_variance_opts(&fit, &ds, &scores, est.df_correction)?;
    let draws = multiplier_draws(&state, &est.grid, est.m, boot_seed)?;
    let critical_value = uniform_critical_value(&draws, est.alpha)?;

    let f1_true = poly_eval(&truth.true_f, 1.0);
    let f1_hat = fit.effect_at(1.0);
    let se1 = pointwise_se(&state, 1.0);
    let z = stats::normal_quantile(1.0 - est.alpha / 2.0);
    let covered_pointwise = (f1_hat - f1_true).abs() <= z * se1;

    let covered_uniform = draws
        .grid()
        .iter()
        .zip(draws.sigmas())
        .all(|(&x, &s)| (fit.effect_at(x) - poly_eval(&truth.true_f, x)).abs() <= critical_value * s);

    let wald_zero = wald_test_preset(&state, &fit.theta, WaldPreset::Zero)?;
    let wald_hom = if est.spec.degree() >= 1 {
        Some(wald_test_preset(&state, &fit.theta, WaldPreset::Homogeneous)?)
    } else {
        None
    };
    let sup_zero = sup_test_zero_with_draws(&fit, &draws);
    let sup_hom = sup_test_homogeneous_with_draws(&fit, &draws);
    let mist = mistakes(&fit, &state);

    Ok(RepOutcome {
        theta: fit.theta,
        f1_hat,
        mistakes_point: mist.point,
        covered_pointwise,
        covered_uniform,
        critical_value,
        reject_wald_zero: wald_zero.p_value < est.alpha,
        reject_wald_homogeneous: wald_hom.map(|t| t.p_value < est.alpha),
        reject_sup_zero: sup_zero.p_value < est.alpha,
        reject_sup_homogeneous: sup_hom.p_value < est.alpha,
    })
}

/// Run `reps` generate→fit→infer→band→test repetitions in parallel and
/// aggregate. Repetition r derives its seeds from (mc_seed, r); any rep
/// failure aborts the study with the failing index attached.
pub fn monte_carlo(
    cfg: &SimConfig,
    est: &EstConfig,
    reps: usize,
    mc_seed: u64,
) -> Result<McReport> {
    if reps < 1 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    cfg.validate()?;

    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            run_rep(cfg, est, rng::derive_seed(mc_seed, rep as u64)).map_err(|e| Error::McRep {
                rep,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let n_coef = est.spec.n_coef();
    let true_f = cfg.truth_coefficients();
    let true_theta: Vec<f64> = (0..n_coef)
        .map(|i| true_f.get(i).copied().unwrap_or(0.0))
        .collect();
    let true_f1 = poly_eval(&true_f, 1.0);
    let true_mistakes = true_f1.abs();

    let reps_f = reps as f64;
    let mut theta_bias = vec![0.0; n_coef];
    let mut theta_rmse = vec![0.0; n_coef];
    for out in &outcomes {
        for i in 0..n_coef {
            let d = out.theta[i] - true_theta[i];
            theta_bias[i] += d / reps_f;
            theta_rmse[i] += d * d / reps_f;
        }
    }
    for v in &mut theta_rmse {
        *v = v.sqrt();
    }

    let f1_devs: Vec<f64> = outcomes.iter().map(|o| o.f1_hat - true_f1).collect();
    let f1_bias = f1_devs.iter().sum::<f64>() / reps_f;
    let f1_rmse = (f1_devs.iter().map(|d| d * d).sum::<f64>() / reps_f).sqrt();

    let mut mist: Vec<f64> = outcomes.iter().map(|o| o.mistakes_point).collect();
    mist.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mistakes_mean = mist.iter().sum::<f64>() / reps_f;
    let mistakes_median = if reps % 2 == 1 {
        mist[reps / 2]
    } else {
        0.5 * (mist[reps / 2 - 1] + mist[reps / 2])
    };
    let mist_var =
        mist.iter().map(|v| (v - mistakes_mean).powi(2)).sum::<f64>() / (reps_f - 1.0).max(1.0);

    let count = |f: &dyn Fn(&RepOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let hom_applicable = est.spec.degree() >= 1;

    Ok(McReport {
        reps,
        alpha: est.alpha,
        true_theta,
        true_f1,
        true_mistakes,
        theta_bias,
        theta_rmse,
        f1_bias,
        f1_rmse,
        mistakes_mean,
        mistakes_median,
        mistakes_mean_mc_se: (mist_var / reps_f).sqrt(),
        pointwise_coverage_f1: rate(count(&|o| o.covered_pointwise), reps),
        uniform_coverage: rate(count(&|o| o.covered_uniform), reps),
        reject_wald_zero: rate(count(&|o| o.reject_wald_zero), reps),
        reject_wald_homogeneous: hom_applicable
            .then(|| rate(count(&|o| o.reject_wald_homogeneous == Some(true)), reps)),
        reject_sup_zero: rate(count(&|o| o.reject_sup_zero), reps),
        reject_sup_homogeneous: rate(count(&|o| o.reject_sup_homogeneous), reps),
        mean_critical_value: outcomes.iter().map(|o| o.critical_value).sum::<f64>() / reps_f,
        min_critical_value: outcomes
            .iter()
            .map(|o| o.critical_value)
            .fold(f64::INFINITY, f64::min),
    })
}
