//! Cross-fitted nuisance estimation of the outcome regression.
//!
//! The outcome model E[Y | X, W, Z] is fit by a pluggable learner with
//! cluster-level K-fold cross-fitting: each row's prediction comes from a
//! model that never saw any row of its own contest. Folds partition
//! clusters, not rows, because precincts within a contest are dependent.
//!
//! Feature layout handed to every learner (and to oracle closures):
//! `[x, w_1..w_k, z-encoded...]`, where categorical z columns are one-hot
//! encoded with the lexicographically first level dropped.

mod trees;

pub use trees::{BoostedTrees, TreeParams};

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::RngExt;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::panel::{PanelDataset, ZValue};
use crate::rng;

/// True-conditional-mean handle for oracle learners (test/simulation use).
/// Receives the encoded feature row.
pub type OracleFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Outcome-model learner specification.
#[derive(Clone)]
pub enum LearnerSpec {
    /// Training-set mean of Y.
    Mean,
    /// OLS on `[1 | features]`.
    Linear,
    /// Ridge on `[1 | features]`, intercept unpenalized. `lambda: None`
    /// selects the penalty by inner 5-fold cross-validation over a fixed
    /// 10-point log grid.
    Ridge { lambda: Option<f64> },
    /// Gradient-boosted regression trees.
    BoostedTrees {
        depth: usize,
        rounds: usize,
        learning_rate: f64,
        min_leaf: usize,
    },
    /// Externally supplied true conditional mean; constructible only
    /// through the programmatic API.
    Oracle(OracleFn),
}

impl LearnerSpec {
    /// Default flexible learner: depth-3 trees, 200 rounds, η = 0.1.
    pub fn boosted_default() -> Self {
        LearnerSpec::BoostedTrees {
            depth: 3,
            rounds: 200,
            learning_rate: 0.1,
            min_leaf: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearnerSpec::Ridge { lambda: Some(l) } if *l < 0.0 => Err(Error::InvalidConfig(
                format!("ridge penalty must be nonnegative, got {l}"),
            )),
            LearnerSpec::BoostedTrees {
                depth,
                rounds,
                learning_rate,
                min_leaf,
            } => {
                if *depth < 1 {
                    return Err(Error::InvalidConfig("tree depth must be >= 1".into()));
                }
                if *rounds < 1 {
                    return Err(Error::InvalidConfig("boosting rounds must be >= 1".into()));
                }
                if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "learning rate must be in (0, 1], got {learning_rate}"
                    )));
                }
                if *min_leaf < 1 {
                    return Err(Error::InvalidConfig("min_leaf must be >= 1".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LearnerSpec::Mean => "mean".to_string(),
            LearnerSpec::Linear => "linear".to_string(),
            LearnerSpec::Ridge { lambda: None } => "ridge(lambda=cv)".to_string(),
            LearnerSpec::Ridge { lambda: Some(l) } => format!("ridge(lambda={l})"),
            LearnerSpec::BoostedTrees {
                depth,
                rounds,
                learning_rate,
                min_leaf,
            } => format!(
                "boosted_trees(depth={depth},rounds={rounds},learning_rate={learning_rate},min_leaf={min_leaf})"
            ),
            LearnerSpec::Oracle(_) => "oracle".to_string(),
        }
    }
}

impl std::fmt::Debug for LearnerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Cluster-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    k: usize,
    /// `assignment[c]` is the fold of cluster `c`.
    assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn fold_of_cluster(&self, c: usize) -> usize {
        self.assignment[c]
    }

    /// Check the plan partitions this dataset's clusters into nonempty folds.
    pub fn validate(&self, ds: &PanelDataset) -> Result<()> {
        if self.assignment.len() != ds.n_clusters() {
            return Err(Error::InvalidConfig(format!(
                "fold plan covers {} clusters but dataset has {}",
                self.assignment.len(),
                ds.n_clusters()
            )));
        }
        let mut counts = vec![0usize; self.k];
        for &f in &self.assignment {
            if f >= self.k {
                return Err(Error::InvalidConfig(format!(
                    "fold index {f} out of range for K={}",
                    self.k
                )));
            }
            counts[f] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::InvalidConfig("a fold is empty".into()));
        }
        Ok(())
    }
}

/// Shuffle clusters with a seeded stream and deal them round-robin into
/// K folds. Deterministic in (cluster order, K, seed).
pub fn make_folds(ds: &PanelDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let c = ds.n_clusters();
    if k < 2 {
        return Err(Error::InvalidConfig(format!("K must be >= 2, got {k}")));
    }
    if k > c {
        return Err(Error::TooFewClusters { k, clusters: c });
    }
    let mut order: Vec<usize> = (0..c).collect();
    let mut rng = rng::seeded(seed);
    for i in (1..c).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut assignment = vec![0usize; c];
    for (deal, &cluster) in order.iter().enumerate() {
        assignment[cluster] = deal % k;
    }
    Ok(FoldPlan { k, assignment })
}

/// Encoded feature matrix shared by all learners.
#[derive(Debug, Clone)]
pub struct Features {
    data: Vec<f64>,
    n_features: usize,
    names: Vec<String>,
}

impl Features {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n_features..(r + 1) * self.n_features]
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Denormalize contest covariates onto rows and encode categoricals.
pub fn build_features(ds: &PanelDataset) -> Result<Features> {
    // Encoded z layout, one entry per z column: either a passthrough
    // numeric column or the kept (sorted, first dropped) categorical levels.
    enum ZEnc {
        Num,
        Cat(Vec<String>),
    }
    let mut encodings = Vec::new();
    for (zi, name) in ds.z_names().iter().enumerate() {
        let numeric = ds
            .contests()
            .iter()
            .all(|c| matches!(c.covariates[zi], ZValue::Num(_)));
        if numeric {
            encodings.push((ZEnc::Num, name.clone()));
        } else {
            if ds
                .contests()
                .iter()
                .any(|c| matches!(c.covariates[zi], ZValue::Num(_)))
            {
                return Err(Error::InvalidConfig(format!(
                    "cluster covariate `z_{name}` mixes numeric and categorical values"
                )));
            }
            let levels: BTreeSet<String> = ds
                .contests()
                .iter()
                .map(|c| match &c.covariates[zi] {
                    ZValue::Cat(s) => s.clone(),
                    ZValue::Num(_) => unreachable!(),
                })
                .collect();
            let kept: Vec<String> = levels.into_iter().skip(1).collect();
            encodings.push((ZEnc::Cat(kept), name.clone()));
        }
    }

    let mut names = vec!["x".to_string()];
    names.extend(ds.w_names().iter().map(|w| format!("w_{w}")));
    for (enc, name) in &encodings {
        match enc {
            ZEnc::Num => names.push(format!("z_{name}")),
            ZEnc::Cat(kept) => {
                names.extend(kept.iter().map(|lvl| format!("z_{name}={lvl}")));
            }
        }
    }

    let n_features = names.len();
    let mut data = Vec::with_capacity(ds.n_rows() * n_features);
    for (r, row) in ds.rows().iter().enumerate() {
        let contest = &ds.contests()[ds.cluster_of_row(r)];
        data.push(row.modifier);
        data.extend_from_slice(&row.covariates);
        for (zi, (enc, _)) in encodings.iter().enumerate() {
            match (enc, &contest.covariates[zi]) {
                (ZEnc::Num, ZValue::Num(v)) => data.push(*v),
                (ZEnc::Cat(kept), ZValue::Cat(s)) => {
                    for lvl in kept {
                        data.push(if lvl == s { 1.0 } else { 0.0 });
                    }
                }
                _ => unreachable!("encoding consistency checked above"),
            }
        }
    }
    Ok(Features {
        data,
        n_features,
        names,
    })
}

/// Per-fold fit diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Out-of-fold residuals V̂ = Y − ĝ(X, W, Z).
#[derive(Debug, Clone)]
pub struct OutcomeResiduals {
    pub v_hat: Vec<f64>,
    pub folds: Vec<FoldDiagnostics>,
}

/// Cross-fit the outcome model: for each fold, train on the complement
/// and predict the fold's rows. Every row gets exactly one out-of-fold
/// residual. Folds run in parallel; assembly is keyed by row index, so
/// results do not depend on worker count.
pub fn crossfit_outcome(
    ds: &PanelDataset,
    spec: &LearnerSpec,
    plan: &FoldPlan,
) -> Result<OutcomeResiduals> {
    spec.validate()?;
    plan.validate(ds)?;
    let feats = build_features(ds)?;
    let y: Vec<f64> = ds.rows().iter().map(|r| r.outcome).collect();

    let per_fold: Vec<(Vec<usize>, Vec<usize>)> = (0..plan.k())
        .map(|fold| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for r in 0..ds.n_rows() {
                if plan.fold_of_cluster(ds.cluster_of_row(r)) == fold {
                    test.push(r);
                } else {
                    train.push(r);
                }
            }
            (train, test)
        })
        .collect();

    let fitted: Vec<(Vec<f64>, Vec<f64>)> = per_fold
        .par_iter()
        .map(|(train, test)| fit_predict(spec, ds, &feats, &y, train, test))
        .collect::<Result<_>>()?;

    let mut v_hat = vec![0.0; ds.n_rows()];
    let mut folds = Vec::with_capacity(plan.k());
    for (fold, ((train, test), (test_pred, train_pred))) in
        per_fold.iter().zip(&fitted).enumerate()
    {
        for (&r, &pred) in test.iter().zip(test_pred) {
            v_hat[r] = y[r] - pred;
        }
        let mse = |rows: &[usize], preds: &[f64]| {
            rows.iter()
                .zip(preds)
                .map(|(&r, &p)| (y[r] - p) * (y[r] - p))
                .sum::<f64>()
                / rows.len().max(1) as f64
        };
        folds.push(FoldDiagnostics {
            fold,
            train_rows: train.len(),
            test_rows: test.len(),
            train_mse: mse(train, train_pred),
            test_mse: mse(test, test_pred),
        });
    }
    Ok(OutcomeResiduals { v_hat, folds })
}

/// Fixed penalty grid for cross-validated ridge: 10 log-spaced points.
#[allow(clippy::excessive_precision)]
const RIDGE_GRID: [f64; 10] = [
    1e-4,
    4.641_588_833_612_779e-4,
    2.154_434_690_031_884e-3,
    1e-2,
    4.641_588_833_612_778e-2,
    2.154_434_690_031_883e-1,
    1.0,
    4.641_588_833_612_779,
    2.154_434_690_031_882_3e1,
    1e2,
];

/// Train `spec` on `train` rows and return (test predictions, train predictions).
fn fit_predict(
    spec: &LearnerSpec,
    ds: &PanelDataset,
    feats: &Features,
    y: &[f64],
    train: &[usize],
    test: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    match spec {
        LearnerSpec::Mean => {
            let mean = train.iter().map(|&r| y[r]).sum::<f64>() / train.len() as f64;
            Ok((vec![mean; test.len()], vec![mean; train.len()]))
        }
        LearnerSpec::Linear => {
            let beta = solve_penalized(feats, y, train, 0.0)?;
            Ok((
                predict_affine(feats, test, &beta),
                predict_affine(feats, train, &beta),
            ))
        }
        LearnerSpec::Ridge { lambda } => {
            let lambda = match lambda {
                Some(l) => *l,
                None => select_ridge_lambda(ds, feats, y, train)?,
            };
            let beta = solve_penalized(feats, y, train, lambda)?;
            Ok((
                predict_affine(feats, test, &beta),
                predict_affine(feats, train, &beta),
            ))
        }
        LearnerSpec::BoostedTrees {
            depth,
            rounds,
            learning_rate,
            min_leaf,
        } => {
            let model = trees::train(
                &feats.data,
                feats.n_features,
                train,
                y,
                TreeParams {
                    depth: *depth,
                    rounds: *rounds,
                    learning_rate: *learning_rate,
                    min_leaf: *min_leaf,
                },
            );
            let predict =
                |rows: &[usize]| rows.iter().map(|&r| model.predict(feats.row(r))).collect();
            Ok((predict(test), predict(train)))
        }
        LearnerSpec::Oracle(g) => {
            let apply = |rows: &[usize]| rows.iter().map(|&r| g(feats.row(r))).collect();
            Ok((apply(test), apply(train)))
        }
    }
}

/// Least squares / ridge on `[1 | features]`; the intercept is never
/// penalized. `lambda = 0` is plain OLS and fails on rank deficiency.
fn solve_penalized(feats: &Features, y: &[f64], train: &[usize], lambda: f64) -> Result<Vec<f64>> {
    let k = feats.n_features() + 1;
    let mut rows: Vec<Vec<f64>> = train
        .iter()
        .map(|&r| {
            let mut row = Vec::with_capacity(k);
            row.push(1.0);
            row.extend_from_slice(feats.row(r));
            row
        })
        .collect();
    let mut rhs: Vec<f64> = train.iter().map(|&r| y[r]).collect();
    if lambda > 0.0 {
        let s = lambda.sqrt();
        for j in 1..k {
            let mut row = vec![0.0; k];
            row[j] = s;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    let design = Mat::from_rows(&rows);
    let sv = linalg::singular_values(&design);
    if sv[0] <= 0.0 || sv[k - 1] < 1e-10 * sv[0] {
        return Err(Error::SingularDesign);
    }
    Ok(linalg::least_squares_qr(&design, &rhs))
}

fn predict_affine(feats: &Features, rows: &[usize], beta: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|&r| beta[0] + linalg::dot(feats.row(r), &beta[1..]))
        .collect()
}

/// Inner cross-validation for the ridge penalty: the training clusters are
/// dealt round-robin (in dataset order) into up to 5 inner folds — no RNG,
/// so the choice is deterministic. Ties prefer the smaller penalty.
fn select_ridge_lambda(
    ds: &PanelDataset,
    feats: &Features,
    y: &[f64],
    train: &[usize],
) -> Result<f64> {
    let mut clusters: Vec<usize> = train.iter().map(|&r| ds.cluster_of_row(r)).collect();
    clusters.dedup();
    clusters.sort_unstable();
    clusters.dedup();
    let inner_k = clusters.len().min(5);
    if inner_k < 2 {
        // Not enough clusters to cross-validate; fall back to the
        // lightest penalty on the grid.
        return Ok(RIDGE_GRID[0]);
    }
    let fold_of: std::collections::HashMap<usize, usize> = clusters
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i % inner_k))
        .collect();

    let mut cv_err = [0.0f64; RIDGE_GRID.len()];
    for fold in 0..inner_k {
        let (inner_train, held_out): (Vec<usize>, Vec<usize>) = train
            .iter()
            .partition(|&&r| fold_of[&ds.cluster_of_row(r)] != fold);
        if inner_train.is_empty() || held_out.is_empty() {
            continue;
        }
        for (gi, &lambda) in RIDGE_GRID.iter().enumerate() {
            let beta = solve_penalized(feats, y, &inner_train, lambda)?;
            let preds = predict_affine(feats, &held_out, &beta);
            cv_err[gi] += held_out
                .iter()
                .zip(&preds)
                .map(|(&r, &p)| (y[r] - p) * (y[r] - p))
                .sum::<f64>();
        }
    }
    let mut best = 0;
    for gi in 1..RIDGE_GRID.len() {
        if cv_err[gi] < cv_err[best] {
            best = gi;
        }
    }
    Ok(RIDGE_GRID[best])
}
