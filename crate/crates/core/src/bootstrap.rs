//! Clustered Gaussian multiplier bootstrap.
//!
//! Each replication draws i.i.d. standard normal weights ζ_c per cluster
//! and evaluates, over a grid of x values,
//!
//!   t_m(x) = (1 / (N σ̂(f̂(x)))) · r(x) J⁻¹ Ψᵀ ζ_m,
//!
//! where Ψ stacks the cluster score sums. By construction the process has
//! unit variance at every x, so quantiles of sup_x |t_m(x)| give uniform
//! critical values, and recentered sup statistics give bootstrap p-values
//! for the zero-effect and homogeneous-effect hypotheses.

use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{power_basis, DmlFit};
use crate::inference::{pointwise_se, InferenceState};
use crate::linalg;
use crate::rng;

/// Evaluation grid on [0, 1]: strictly increasing, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    points: Vec<f64>,
}

impl GridSpec {
    /// `n` equally spaced points from 0 to 1 inclusive.
    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points, got {n}"
            )));
        }
        let points = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Ok(GridSpec { points })
    }

    /// The default 1001-point grid (0, 0.001, …, 1).
    pub fn default_grid() -> Self {
        Self::uniform(1001).expect("1001 >= 2")
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2
            || points.first() != Some(&0.0)
            || points.last() != Some(&1.0)
            || points.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidConfig(
                "grid must be strictly increasing with endpoints 0 and 1".into(),
            ));
        }
        Ok(GridSpec { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::default_grid()
    }
}

/// The linear map ζ ↦ t(·): row g holds a(x_g) with t(x_g) = a(x_g)ᵀζ.
#[derive(Debug, Clone)]
pub struct MultiplierProcess {
    /// |grid| × C coefficient matrix.
    a: linalg::Mat,
    grid: Vec<f64>,
    sigmas: Vec<f64>,
}

impl MultiplierProcess {
    pub fn new(state: &InferenceState, grid: &GridSpec) -> Result<Self> {
        let sigmas: Vec<f64> = grid.points().iter().map(|&x| pointwise_se(state, x)).collect();
        if let Some(g) = sigmas.iter().position(|&s| s <= 0.0) {
            return Err(Error::ZeroSe(grid.points()[g]));
        }
        let l = linalg::cholesky(&state.j).ok_or(Error::SingularJ)?;
        let n = state.n as f64;
        let mut a = linalg::Mat::zeros(grid.len(), state.c);
        for (g, &x) in grid.points().iter().enumerate() {
            let w = linalg::cholesky_solve(&l, &power_basis(x, state.q));
            let scale = 1.0 / (n * sigmas[g]);
            for c in 0..state.c {
                a[(g, c)] = scale * linalg::dot(state.cluster_score_sums.row(c), &w);
            }
        }
        Ok(MultiplierProcess {
            a,
            grid: grid.points().to_vec(),
            sigmas,
        })
    }

    /// t(x) over the grid for one weight vector ζ.
    pub fn statistic(&self, zeta: &[f64]) -> Vec<f64> {
        self.a.matvec(zeta)
    }

    pub fn n_clusters(&self) -> usize {
        self.a.ncols()
    }
}

/// M bootstrap replications of t_m(·) over a grid.
#[derive(Debug, Clone)]
pub struct MultiplierDraws {
    /// Row-major M × |grid|.
    data: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    grid: Vec<f64>,
    sigmas: Vec<f64>,
}

impl MultiplierDraws {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.grid.len()..(m + 1) * self.grid.len()]
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// sup_x |t_m(x)| for every replication.
    pub fn sups(&self) -> Vec<f64> {
        (0..self.m)
            .map(|m| self.row(m).iter().fold(0.0f64, |acc, t| acc.max(t.abs())))
            .collect()
    }
}

/// Draw M replications. Replication m uses RNG substream (seed, m), so the
/// matrix is identical for any worker count or evaluation order.
pub fn multiplier_draws(
    state: &InferenceState,
    grid: &GridSpec,
    m: usize,
    seed: u64,
) -> Result<MultiplierDraws> {
    if m < 1 {
        return Err(Error::InvalidConfig("M must be >= 1".into()));
    }
    let process = MultiplierProcess::new(state, grid)?;
    let c = process.n_clusters();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng::substream(seed, rep as u64);
            let zeta: Vec<f64> = (0..c).map(|_| rng.sample(StandardNormal)).collect();
            process.statistic(&zeta)
        })
        .collect();
    Ok(MultiplierDraws {
        data: rows.concat(),
        m,
        seed,
        grid: process.grid,
        sigmas: process.sigmas,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Empirical (1−α)-quantile of the per-replication sups, using the
/// 1-based order statistic at ceil((1−α)·M). Products within 1e-9 of an
/// integer snap to it so the convention matches exact arithmetic.
pub fn uniform_critical_value(draws: &MultiplierDraws, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if draws.m < 2 {
        return Err(Error::InvalidConfig(
            "critical values need at least M = 2 replications".into(),
        ));
    }
    let mut sups = draws.sups();
    sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t = (1.0 - alpha) * draws.m as f64;
    let k = if (t - t.round()).abs() < 1e-9 {
        t.round()
    } else {
        t.ceil()
    } as usize;
    let k = k.clamp(1, draws.m);
    Ok(sups[k - 1])
}

/// Effect curve with pointwise and uniform bands.
#[derive(Debug, Clone, Serialize)]
pub struct BandResult {
    pub grid: Vec<f64>,
    pub f_hat: Vec<f64>,
    pub se: Vec<f64>,
    /// z_{1−α/2} · σ̂(x).
    pub pointwise_halfwidth: Vec<f64>,
    /// q*_{1−α} · σ̂(x).
    pub uniform_halfwidth: Vec<f64>,
    pub critical_value: f64,
    pub m: usize,
    pub seed: u64,
    pub alpha: f64,
}

/// Band from an existing draw matrix (shares randomness with sup tests).
pub fn uniform_band_with_draws(
    fit: &DmlFit,
    draws: &MultiplierDraws,
    alpha: f64,
) -> Result<BandResult> {
    let critical_value = uniform_critical_value(draws, alpha)?;
    let z = crate::stats::normal_quantile(1.0 - alpha / 2.0);
    let f_hat: Vec<f64> = draws.grid.iter().map(|&x| fit.effect_at(x)).collect();
    let pointwise_halfwidth = draws.sigmas.iter().map(|s| z * s).collect();
    let uniform_halfwidth = draws.sigmas.iter().map(|s| critical_value * s).collect();
    Ok(BandResult {
        grid: draws.grid.clone(),
        f_hat,
        se: draws.sigmas.clone(),
        pointwise_halfwidth,
        uniform_halfwidth,
        critical_value,
        m: draws.m,
        seed: draws.seed,
        alpha,
    })
}

/// Uniform confidence band f̂(x) ± q*_{1−α} σ̂(x).
pub fn uniform_band(
    fit: &DmlFit,
    state: &InferenceState,
    grid: &GridSpec,
    m: usize,
    alpha: f64,
    seed: u64,
) -> Result<BandResult> {
    let draws = multiplier_draws(state, grid, m, seed)?;
    uniform_band_with_draws(fit, &draws, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupTestKind {
    ZeroSup,
    HomogeneousSup,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupTestResult {
    pub statistic: f64,
    /// Bootstrap p-value with resolution 1/M; 0 means "below 1/M".
    pub p_value: f64,
    pub m: usize,
    pub kind: SupTestKind,
}

/// Sup test of zero effect from shared draws: T_n = sup_x |f̂/σ̂| against
/// the sups of the multiplier process.
pub fn sup_test_zero_with_draws(fit: &DmlFit, draws: &MultiplierDraws) -> SupTestResult {
    let t_n = draws
        .grid
        .iter()
        .zip(&draws.sigmas)
        .fold(0.0f64, |acc, (&x, &s)| acc.max((fit.effect_at(x) / s).abs()));
    let exceed = draws.sups().iter().filter(|&&s| s >= t_n).count();
    SupTestResult {
        statistic: t_n,
        p_value: exceed as f64 / draws.m as f64,
        m: draws.m,
        kind: SupTestKind::ZeroSup,
    }
}

pub fn sup_test_zero(
    fit: &DmlFit,
    state: &InferenceState,
    grid: &GridSpec,
    m: usize,
    seed: u64,
) -> Result<SupTestResult> {
    let draws = multiplier_draws(state, grid, m, seed)?;
    Ok(sup_test_zero_with_draws(fit, &draws))
}

/// Minimize φ(c) = max_g |v_g − c| / σ_g over c by ternary search.
///
/// φ is convex (a max of V-shaped functions); the search runs on the
/// bracket [min v − 3 max σ, max v + 3 max σ] to absolute tolerance 1e-8
/// in c.
pub fn chebyshev_sup_min(values: &[f64], sigmas: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), sigmas.len());
    let phi = |c: f64| -> f64 {
        values
            .iter()
            .zip(sigmas)
            .fold(0.0f64, |acc, (&v, &s)| acc.max((v - c).abs() / s))
    };
    let max_sigma = sigmas.iter().cloned().fold(0.0f64, f64::max);
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if vmax == vmin {
        // exactly constant: the infimum is 0 at c = v
        return 0.0;
    }
    let mut lo = vmin - 3.0 * max_sigma;
    let mut hi = vmax + 3.0 * max_sigma;
    while hi - lo > 1e-8 {
        let third = (hi - lo) / 3.0;
        let m1 = lo + third;
        let m2 = hi - third;
        let p1 = phi(m1);
        let p2 = phi(m2);
        if p1 < p2 {
            hi = m2;
        } else if p1 > p2 {
            lo = m1;
        } else {
            lo = m1;
            hi = m2;
        }
    }
    phi(0.5 * (lo + hi))
}

/// Sup test of a homogeneous (constant) effect from shared draws:
/// H_n = inf_c sup_x |(f̂(x) − c)/σ̂(x)|, with the bootstrap analogue
/// recentered the same way: H_m = inf_δ sup_x |t_m(x) − δ/σ̂(x)|.
pub fn sup_test_homogeneous_with_draws(fit: &DmlFit, draws: &MultiplierDraws) -> SupTestResult {
    let f_vals: Vec<f64> = draws.grid.iter().map(|&x| fit.effect_at(x)).collect();
    let h_n = chebyshev_sup_min(&f_vals, &draws.sigmas);

    let h_m: Vec<f64> = (0..draws.m)
        .into_par_iter()
        .map(|m| {
            // |t_m(x) − δ/σ̂(x)| = |t_m(x)·σ̂(x) − δ| / σ̂(x)
            let scaled: Vec<f64> = draws
                .row(m)
                .iter()
                .zip(&draws.sigmas)
                .map(|(&t, &s)| t * s)
                .collect();
            chebyshev_sup_min(&scaled, &draws.sigmas)
        })
        .collect();
    let exceed = h_m.iter().filter(|&&h| h >= h_n).count();
    SupTestResult {
        statistic: h_n,
        p_value: exceed as f64 / draws.m as f64,
        m: draws.m,
        kind: SupTestKind::HomogeneousSup,
    }
}

pub fn sup_test_homogeneous(
    fit: &DmlFit,
    state: &InferenceState,
    grid: &GridSpec,
    m: usize,
    seed: u64,
) -> Result<SupTestResult> {
    let draws = multiplier_draws(state, grid, m, seed)?;
    Ok(sup_test_homogeneous_with_draws(fit, &draws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{fit_dml, PolySpec};
    use crate::inference::{build_scores, sandwich_variance};
    use crate::nuisance::LearnerSpec;
    use crate::testutil::dataset_from;
    use std::sync::Arc;

    fn toy_state(q: usize) -> (DmlFit, InferenceState) {
        let ds = dataset_from(&[
            (true, vec![(0.61, 0.2), (0.72, 0.8), (0.55, 0.5)]),
            (false, vec![(0.40, 0.3), (0.35, 0.7)]),
            (true, vec![(0.58, 0.45), (0.66, 0.9)]),
            (false, vec![(0.41, 0.15), (0.44, 0.55), (0.39, 0.62)]),
            (true, vec![(0.63, 0.33), (0.59, 0.71)]),
            (false, vec![(0.37, 0.42), (0.43, 0.88)]),
        ]);
        let oracle = LearnerSpec::Oracle(Arc::new(|_: &[f64]| 0.0));
        let fit = fit_dml(&ds, PolySpec::new(q), &oracle, 2, 11).unwrap();
        let scores = build_scores(&fit, &ds);
        let state = sandwich_variance(&fit, &ds, &scores).unwrap();
        (fit, state)
    }

    #[test]
    fn grid_invariants() {
        let g = GridSpec::default_grid();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(*g.points().last().unwrap(), 1.0);
        assert!((g.points()[1] - 0.001).abs() < 1e-15);
        assert!(GridSpec::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(GridSpec::from_points(vec![0.1, 0.5, 1.0]).is_err());
        assert!(GridSpec::uniform(1).is_err());
    }

    #[test]
    fn constant_spec_draws_are_flat_in_x() {
        let (_, state) = toy_state(0);
        let grid = GridSpec::uniform(11).unwrap();
        let draws = multiplier_draws(&state, &grid, 16, 3).unwrap();
        for m in 0..16 {
            let row = draws.row(m);
            for t in row {
                assert!((t - row[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_cluster_toy_matches_direct_matrix_arithmetic() {
        // C = 2, q = 0, fixed ζ = (1, −1): compare against an explicit
        // evaluation of (1/(Nσ̂)) r(x) J⁻¹ Ψᵀ ζ.
        let ds = dataset_from(&[
            (true, vec![(0.8, 0.25), (0.7, 0.75)]),
            (false, vec![(0.2, 0.4), (0.3, 0.6)]),
        ]);
        let oracle = LearnerSpec::Oracle(Arc::new(|_: &[f64]| 0.0));
        let fit = fit_dml(&ds, PolySpec::constant(), &oracle, 2, 1).unwrap();
        let scores = build_scores(&fit, &ds);
        let state = sandwich_variance(&fit, &ds, &scores).unwrap();
        let grid = GridSpec::uniform(3).unwrap();
        let process = MultiplierProcess::new(&state, &grid).unwrap();
        let zeta = vec![1.0, -1.0];
        let got = process.statistic(&zeta);

        // independent arithmetic: J and score sums are scalars here
        let n = ds.n_rows() as f64;
        let j: f64 = fit.u_hat.iter().map(|u| u * u).sum::<f64>() / n;
        let mut psi = [0.0f64; 2];
        for r in 0..ds.n_rows() {
            psi[ds.cluster_of_row(r)] += fit.u_hat[r] * fit.eps_hat[r];
        }
        let sigma = crate::inference::pointwise_se(&state, 0.5);
        let expect = (psi[0] * zeta[0] + psi[1] * zeta[1]) / (n * sigma * j);
        for t in got {
            assert!((t - expect).abs() < 1e-12, "{t} vs {expect}");
        }
    }

    #[test]
    fn quantile_order_statistic_convention() {
        let (_, state) = toy_state(0);
        let grid = GridSpec::uniform(2).unwrap();
        let mut draws = multiplier_draws(&state, &grid, 4, 1).unwrap();
        // overwrite with known sups {1, 2, 3, 4}
        draws.data = vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
        let q = uniform_critical_value(&draws, 0.25).unwrap();
        assert_eq!(q, 3.0);
        // degenerate draws
        draws.data = vec![0.0; 8];
        assert_eq!(uniform_critical_value(&draws, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn critical_value_monotone_in_alpha() {
        let (_, state) = toy_state(1);
        let grid = GridSpec::uniform(21).unwrap();
        let draws = multiplier_draws(&state, &grid, 500, 7).unwrap();
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.05, 0.1, 0.25, 0.5] {
            let q = uniform_critical_value(&draws, alpha).unwrap();
            assert!(q <= last, "q*({alpha}) = {q} > {last}");
            last = q;
        }
    }

    #[test]
    fn q0_critical_value_matches_brute_force_replication() {
        // q = 0: t_m is a single weighted normal; replicate the stream
        // independently and recompute the same order statistic.
        let (_, state) = toy_state(0);
        let grid = GridSpec::uniform(5).unwrap();
        let m = 800;
        let seed = 99;
        let draws = multiplier_draws(&state, &grid, m, seed).unwrap();
        let crit = uniform_critical_value(&draws, 0.05).unwrap();

        let process = MultiplierProcess::new(&state, &grid).unwrap();
        let mut sups: Vec<f64> = (0..m)
            .map(|rep| {
                let mut rng = crate::rng::substream(seed, rep as u64);
                let zeta: Vec<f64> = (0..state.c)
                    .map(|_| rand::RngExt::sample(&mut rng, StandardNormal))
                    .collect();
                process
                    .statistic(&zeta)
                    .iter()
                    .fold(0.0f64, |a, t| a.max(t.abs()))
            })
            .collect();
        sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let brute = sups[((0.95f64 * m as f64).ceil() as usize).clamp(1, m) - 1];
        assert_eq!(crit, brute);
        // unit-variance process: the 5% critical value sits near 1.96
        assert!((crit - 1.96).abs() < 0.25, "crit = {crit}");
    }

    #[test]
    fn band_consistency_with_zero_sup_test() {
        let (fit, state) = toy_state(1);
        let grid = GridSpec::uniform(51).unwrap();
        let draws = multiplier_draws(&state, &grid, 400, 5).unwrap();
        let band = uniform_band_with_draws(&fit, &draws, 0.05).unwrap();
        let test = sup_test_zero_with_draws(&fit, &draws);
        let zero_outside_band = band
            .f_hat
            .iter()
            .zip(&band.uniform_halfwidth)
            .any(|(&f, &h)| f.abs() > h);
        assert_eq!(test.statistic > band.critical_value, zero_outside_band);
    }

    #[test]
    fn zero_fit_gives_p_one() {
        let (mut fit, state) = toy_state(1);
        fit.theta = vec![0.0, 0.0];
        let grid = GridSpec::uniform(21).unwrap();
        let t = sup_test_zero(&fit, &state, &grid, 200, 3).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn extreme_statistic_gives_p_zero() {
        let (mut fit, state) = toy_state(1);
        fit.theta = vec![1e6, 0.0];
        let grid = GridSpec::uniform(21).unwrap();
        let t = sup_test_zero(&fit, &state, &grid, 100, 3).unwrap();
        assert_eq!(t.p_value, 0.0);
    }

    #[test]
    fn homogeneous_sup_constant_fit() {
        let (mut fit, state) = toy_state(0);
        fit.theta = vec![0.37];
        let grid = GridSpec::uniform(21).unwrap();
        let t = sup_test_homogeneous(&fit, &state, &grid, 100, 3).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn homogeneous_sup_of_line_is_half_slope_over_sigma() {
        // constant σ̂ and linear f̂: H_n = |s|/(2σ̂) at c = f̂(1/2).
        let sigmas = vec![0.2; 101];
        let values: Vec<f64> = (0..101).map(|i| 0.1 * (i as f64 / 100.0)).collect();
        let h = chebyshev_sup_min(&values, &sigmas);
        assert!((h - 0.05 / 0.2).abs() < 1e-6, "{h}");
    }

    #[test]
    fn chebyshev_min_matches_exhaustive_grid() {
        // 5-point toy against brute-force minimization over a fine c-grid.
        let values = vec![0.12, -0.05, 0.33, 0.02, -0.21];
        let sigmas = vec![0.8, 1.1, 0.6, 0.9, 1.4];
        let h = chebyshev_sup_min(&values, &sigmas);
        let phi = |c: f64| -> f64 {
            values
                .iter()
                .zip(&sigmas)
                .fold(0.0f64, |acc, (&v, &s)| acc.max((v - c).abs() / s))
        };
        let (lo, hi) = (-0.21, 0.33);
        let brute = (0..=200_000)
            .map(|i| phi(lo + (hi - lo) * i as f64 / 200_000.0))
            .fold(f64::INFINITY, f64::min);
        assert!((h - brute).abs() < 1e-6, "{h} vs {brute}");
    }

    #[test]
    fn perfect_fit_state_reports_zero_se() {
        // ε̂ ≡ 0 makes every score zero, so σ̂ vanishes on the whole grid
        let ds = dataset_from(&[
            (true, vec![(0.5, 0.2), (0.5, 0.8)]),
            (false, vec![(-0.5, 0.3), (-0.5, 0.7)]),
        ]);
        let oracle = LearnerSpec::Oracle(Arc::new(|_: &[f64]| 0.0));
        let fit = fit_dml(&ds, PolySpec::constant(), &oracle, 2, 1).unwrap();
        let scores = build_scores(&fit, &ds);
        let state = sandwich_variance(&fit, &ds, &scores).unwrap();
        let grid = GridSpec::uniform(5).unwrap();
        let err = multiplier_draws(&state, &grid, 10, 1).unwrap_err();
        assert_eq!(err.kind(), "ZeroSe");
    }

    #[test]
    fn constant_spec_uniform_band_collapses_to_pointwise() {
        // q = 0: sup_x |t_m(x)| = |t_m|, a unit normal, so q*₀.₉₅ sits at
        // the pointwise 1.96 up to quantile jitter and the two bands agree.
        let (fit, state) = toy_state(0);
        let grid = GridSpec::uniform(21).unwrap();
        let band = uniform_band(&fit, &state, &grid, 2000, 0.05, 8).unwrap();
        assert!(
            (band.critical_value - 1.96).abs() < 0.15,
            "q* = {}",
            band.critical_value
        );
        for (u, p) in band.uniform_halfwidth.iter().zip(&band.pointwise_halfwidth) {
            assert!((u / p - 1.0).abs() < 0.08, "uniform {u} vs pointwise {p}");
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let (_, state) = toy_state(1);
        let grid = GridSpec::uniform(11).unwrap();
        let a = multiplier_draws(&state, &grid, 50, 21).unwrap();
        let b = multiplier_draws(&state, &grid, 50, 21).unwrap();
        assert_eq!(a.data, b.data);
        let c = multiplier_draws(&state, &grid, 50, 22).unwrap();
        assert_ne!(a.data, c.data);
    }
}
