//! Command-line driver: fit / test / band on panel CSVs, synthetic data
//! generation, and Monte Carlo studies.
//!
//! Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
//! Errors print machine-readable JSON on stderr.

mod config;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use flipdml::bootstrap::{
    multiplier_draws, sup_test_homogeneous_with_draws, sup_test_zero_with_draws,
    uniform_band_with_draws, GridSpec,
};
use flipdml::estimator::{fit_dml, DmlFit, PolySpec};
use flipdml::inference::{
    build_scores, mistakes, sandwich_variance_opts, wald_test_preset, InferenceState, WaldPreset,
};
use flipdml::nuisance::LearnerSpec;
use flipdml::panel::{ingest_csv, validate_design, DesignSummary, PanelDataset, ValidationMode};
use flipdml::simgen::{
    default_effects, generate, monte_carlo, EstConfig, McReport, SimConfig, TruthSpec,
};
use flipdml::{Error, ErrorClass, Result};

use config::{
    parse_g_kind, parse_learner, parse_spec, parse_theta_list, parse_validation, resolve,
    resolve_opt, resolve_switch, FileConfig,
};
use report::{
    coefficient_table, emit, tool_id, to_sorted_json, write_curve_csv, BandReport, FitReport,
    Provenance, SupBlock, TestReport, WaldBlock,
};

#[derive(Parser)]
#[command(name = "flipdml", version, about = "Flip-effect estimation on clustered election panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: coefficients, tests, mistakes share, and bands.
    Fit(AnalyzeArgs),
    /// Hypothesis tests only (--method wald|sup).
    Test(TestArgs),
    /// Effect curve with pointwise and uniform bands.
    Band(AnalyzeArgs),
    /// Generate a synthetic panel CSV with a known-truth sidecar.
    Simulate(SimulateArgs),
    /// Monte Carlo study: repeated generate→fit→infer→band→test.
    Mc(McArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Cap worker threads (results are thread-count invariant).
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstArgs {
    /// Effect polynomial: constant|linear|cubic|q=N.
    #[arg(long)]
    spec: Option<String>,
    /// Outcome learner: mean|linear|ridge[=λ]|boosted.
    #[arg(long)]
    learner: Option<String>,
    /// Cross-fitting folds K.
    #[arg(long)]
    folds: Option<usize>,
    /// Evaluation grid density over [0, 1].
    #[arg(long)]
    grid: Option<usize>,
    /// Bootstrap replications M.
    #[arg(long)]
    reps: Option<usize>,
    /// Significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Apply the C/(C−1) small-cluster sandwich correction.
    #[arg(long)]
    df_correction: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    est: EstArgs,
    /// Panel CSV path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Ingest range checking: strict|synthetic.
    #[arg(long)]
    validation: Option<String>,
    /// Seed for fold assignment and the bootstrap.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the effect curve as CSV.
    #[arg(long)]
    csv_curve: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    analyze: AnalyzeArgs,
    /// wald|sup.
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args)]
struct SimArgs {
    /// True mistake rate m (effect f(x) = m(1 − 2x)).
    #[arg(long)]
    m: Option<f64>,
    /// Custom effect polynomial "θ0,θ1,…" (overrides --m).
    #[arg(long)]
    custom_theta: Option<String>,
    /// Cluster count C.
    #[arg(long)]
    clusters: Option<usize>,
    /// Minimum precincts per cluster.
    #[arg(long)]
    n_min: Option<usize>,
    /// Maximum precincts per cluster.
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    treated_prob: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Nuisance shape: linear|nonlinear.
    #[arg(long)]
    g_kind: Option<String>,
    /// Precinct covariate count.
    #[arg(long)]
    n_w: Option<usize>,
    /// Cluster covariate count.
    #[arg(long)]
    n_z: Option<usize>,
    /// Beta shape a for the presidential vote share.
    #[arg(long)]
    x_alpha: Option<f64>,
    /// Beta shape b for the presidential vote share.
    #[arg(long)]
    x_beta: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the panel CSV (required).
    #[arg(long)]
    emit_data: Option<PathBuf>,
    /// Truth sidecar path (default: <emit-data>.truth.json).
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    est: EstArgs,
    /// Monte Carlo repetitions.
    #[arg(long)]
    mc_reps: Option<usize>,
    /// Base seed; repetition r derives its seeds from (mc-seed, r).
    #[arg(long)]
    mc_seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let json = serde_json::json!({
            "error": { "kind": e.kind(), "message": e.to_string() }
        });
        eprintln!("{json}");
        std::process::exit(match e.class() {
            ErrorClass::Input => 2,
            ErrorClass::Numeric => 3,
        });
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Test(args) => cmd_test(args),
        Command::Band(args) => cmd_band(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mc(args) => cmd_mc(args),
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(t) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
}

fn load_file_config(common: &CommonArgs) -> Result<FileConfig> {
    match &common.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
}

/// Fully resolved analysis settings (flags over file over defaults).
struct AnalysisConfig {
    data: PathBuf,
    validation: ValidationMode,
    spec: PolySpec,
    learner: LearnerSpec,
    learner_name: String,
    folds: usize,
    grid: GridSpec,
    grid_points: usize,
    m: usize,
    alpha: f64,
    seed: u64,
    df_correction: bool,
    csv_curve: Option<PathBuf>,
}

struct ResolvedEst {
    spec: PolySpec,
    learner: LearnerSpec,
    learner_name: String,
    folds: usize,
    grid: GridSpec,
    grid_points: usize,
    m: usize,
    alpha: f64,
    df_correction: bool,
}

fn resolve_est(est: &EstArgs, file: &FileConfig) -> Result<ResolvedEst> {
    let spec_name: String = resolve(est.spec.clone(), file, "spec", "cubic".to_string())?;
    let spec = parse_spec(&spec_name)?;
    let learner_name: String = resolve(est.learner.clone(), file, "learner", "boosted".to_string())?;
    let learner = parse_learner(&learner_name)?;
    let grid_points = resolve(est.grid, file, "grid", 1001)?;
    let alpha = resolve(est.alpha, file, "alpha", 0.05)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    Ok(ResolvedEst {
        spec,
        learner,
        learner_name,
        folds: resolve(est.folds, file, "folds", 5)?,
        grid: GridSpec::uniform(grid_points)?,
        grid_points,
        m: resolve(est.reps, file, "reps", 2000)?,
        alpha,
        df_correction: resolve_switch(est.df_correction, file, "df-correction")?,
    })
}

fn resolve_analysis(args: &AnalyzeArgs, file: &FileConfig) -> Result<AnalysisConfig> {
    let est = resolve_est(&args.est, file)?;
    let data: Option<PathBuf> = resolve_opt(args.data.clone(), file, "data")?;
    let data = data.ok_or_else(|| Error::InvalidConfig("--data is required".into()))?;
    let validation_name: String =
        resolve(args.validation.clone(), file, "validation", "strict".to_string())?;
    Ok(AnalysisConfig {
        data,
        validation: parse_validation(&validation_name)?,
        spec: est.spec,
        learner: est.learner,
        learner_name: est.learner_name,
        folds: est.folds,
        grid: est.grid,
        grid_points: est.grid_points,
        m: est.m,
        alpha: est.alpha,
        seed: resolve(args.seed, file, "seed", 1)?,
        df_correction: est.df_correction,
        csv_curve: resolve_opt(args.csv_curve.clone(), file, "csv-curve")?,
    })
}

struct Pipeline {
    summary: DesignSummary,
    fit: DmlFit,
    state: InferenceState,
    provenance: Provenance,
    warnings: Vec<String>,
}

fn run_pipeline(cfg: &AnalysisConfig) -> Result<(PanelDataset, Pipeline)> {
    let ds = ingest_csv(&cfg.data, cfg.validation)?;
    let summary = validate_design(&ds)?;
    let fit = fit_dml(&ds, cfg.spec, &cfg.learner, cfg.folds, cfg.seed)?;
    let scores = build_scores(&fit, &ds);
    let state = sandwich_variance_opts(&fit, &ds, &scores, cfg.df_correction)?;
    let mut warnings = fit.warnings.clone();
    if summary.small_design_warning {
        warnings.push(format!(
            "small design: {} treated / {} control clusters",
            summary.treated, summary.control
        ));
    }
    let provenance = Provenance {
        tool: tool_id(),
        dataset_path: cfg.data.display().to_string(),
        dataset_digest: format!("{:016x}", ds.digest()),
        validation: match cfg.validation {
            ValidationMode::Strict => "strict".to_string(),
            ValidationMode::Synthetic => "synthetic".to_string(),
        },
        spec_q: cfg.spec.degree(),
        learner: cfg.learner_name.clone(),
        k_folds: cfg.folds,
        seed: cfg.seed,
        bootstrap_m: cfg.m,
        grid_points: cfg.grid_points,
        alpha: cfg.alpha,
        df_correction: cfg.df_correction,
    };
    Ok((
        ds,
        Pipeline {
            summary,
            fit,
            state,
            provenance,
            warnings,
        },
    ))
}

fn wald_block(fit: &DmlFit, state: &InferenceState) -> Result<WaldBlock> {
    let q = fit.spec.degree();
    let zero = wald_test_preset(state, &fit.theta, WaldPreset::Zero)?;
    let homogeneous = if q >= 1 {
        Some(wald_test_preset(state, &fit.theta, WaldPreset::Homogeneous)?)
    } else {
        None
    };
    let linearity = if q >= 2 {
        Some(wald_test_preset(state, &fit.theta, WaldPreset::Linearity)?)
    } else {
        None
    };
    Ok(WaldBlock {
        zero,
        homogeneous,
        linearity,
    })
}

fn low_m_warning(m: usize, warnings: &mut Vec<String>) {
    if m < 100 {
        warnings.push(format!(
            "low bootstrap replication count: p-value resolution is 1/M = {}",
            1.0 / m as f64
        ));
    }
}

fn cmd_fit(args: AnalyzeArgs) -> Result<()> {
    init_threads(args.common.threads);
    let file = load_file_config(&args.common)?;
    let cfg = resolve_analysis(&args, &file)?;
    let (_ds, mut pipe) = run_pipeline(&cfg)?;

    let tests = wald_block(&pipe.fit, &pipe.state)?;
    let mist = mistakes(&pipe.fit, &pipe.state);
    let draws = multiplier_draws(&pipe.state, &cfg.grid, cfg.m, cfg.seed)?;
    let curve = uniform_band_with_draws(&pipe.fit, &draws, cfg.alpha)?;
    low_m_warning(cfg.m, &mut pipe.warnings);

    if let Some(path) = &cfg.csv_curve {
        write_curve_csv(&curve, path)?;
    }
    let report = FitReport {
        provenance: pipe.provenance,
        design: pipe.summary,
        coefficients: coefficient_table(&pipe.fit.theta, &pipe.state, cfg.alpha),
        tests,
        mistakes: mist,
        curve,
        warnings: pipe.warnings,
    };
    emit(&to_sorted_json(&report)?, args.common.out.as_deref())
}

fn cmd_test(args: TestArgs) -> Result<()> {
    init_threads(args.analyze.common.threads);
    let file = load_file_config(&args.analyze.common)?;
    let cfg = resolve_analysis(&args.analyze, &file)?;
    let method: String = resolve(args.method.clone(), &file, "method", "wald".to_string())?;
    let (_ds, mut pipe) = run_pipeline(&cfg)?;

    let (wald, sup) = match method.as_str() {
        "wald" => (Some(wald_block(&pipe.fit, &pipe.state)?), None),
        "sup" => {
            let draws = multiplier_draws(&pipe.state, &cfg.grid, cfg.m, cfg.seed)?;
            low_m_warning(cfg.m, &mut pipe.warnings);
            (
                None,
                Some(SupBlock {
                    zero_sup: sup_test_zero_with_draws(&pipe.fit, &draws),
                    homogeneous_sup: sup_test_homogeneous_with_draws(&pipe.fit, &draws),
                }),
            )
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown test method `{other}` (expected wald|sup)"
            )))
        }
    };
    let report = TestReport {
        provenance: pipe.provenance,
        design: pipe.summary,
        method,
        wald,
        sup,
        warnings: pipe.warnings,
    };
    emit(&to_sorted_json(&report)?, args.analyze.common.out.as_deref())
}

fn cmd_band(args: AnalyzeArgs) -> Result<()> {
    init_threads(args.common.threads);
    let file = load_file_config(&args.common)?;
    let cfg = resolve_analysis(&args, &file)?;
    let (_ds, mut pipe) = run_pipeline(&cfg)?;

    let draws = multiplier_draws(&pipe.state, &cfg.grid, cfg.m, cfg.seed)?;
    let curve = uniform_band_with_draws(&pipe.fit, &draws, cfg.alpha)?;
    low_m_warning(cfg.m, &mut pipe.warnings);
    if let Some(path) = &cfg.csv_curve {
        write_curve_csv(&curve, path)?;
    }
    let report = BandReport {
        provenance: pipe.provenance,
        design: pipe.summary,
        curve,
        warnings: pipe.warnings,
    };
    emit(&to_sorted_json(&report)?, args.common.out.as_deref())
}

fn resolve_sim(sim: &SimArgs, seed: u64, file: &FileConfig) -> Result<SimConfig> {
    let n_w = resolve(sim.n_w, file, "n-w", 2)?;
    let n_z = resolve(sim.n_z, file, "n-z", 2)?;
    let custom: Option<String> = resolve_opt(sim.custom_theta.clone(), file, "custom-theta")?;
    let truth = match custom {
        Some(list) => TruthSpec::CustomPoly {
            theta: parse_theta_list(&list)?,
        },
        None => TruthSpec::LinearMistakes {
            m: resolve(sim.m, file, "m", 0.05)?,
        },
    };
    let cfg = SimConfig {
        clusters: resolve(sim.clusters, file, "clusters", 40)?,
        n_range: (
            resolve(sim.n_min, file, "n-min", 100)?,
            resolve(sim.n_max, file, "n-max", 100)?,
        ),
        treated_prob: resolve(sim.treated_prob, file, "treated-prob", 0.5)?,
        truth,
        g_kind: parse_g_kind(&resolve(
            sim.g_kind.clone(),
            file,
            "g-kind",
            "linear".to_string(),
        )?)?,
        noise_sd: resolve(sim.noise_sd, file, "noise-sd", 0.05)?,
        beta_w: default_effects(n_w),
        gamma_z: default_effects(n_z),
        x_dist: (
            resolve(sim.x_alpha, file, "x-alpha", 2.0)?,
            resolve(sim.x_beta, file, "x-beta", 2.0)?,
        ),
        n_w,
        n_z,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct TruthSidecar {
    true_f: Vec<f64>,
    true_mistakes: f64,
    seed: u64,
    sim_config: SimConfig,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    init_threads(args.common.threads);
    let file = load_file_config(&args.common)?;
    let seed = resolve(args.seed, &file, "seed", 1)?;
    let cfg = resolve_sim(&args.sim, seed, &file)?;
    let emit_data: Option<PathBuf> = resolve_opt(args.emit_data.clone(), &file, "emit-data")?;
    let emit_data =
        emit_data.ok_or_else(|| Error::InvalidConfig("--emit-data is required".into()))?;
    let truth_out: Option<PathBuf> = resolve_opt(args.truth_out.clone(), &file, "truth-out")?;
    let truth_out = truth_out.unwrap_or_else(|| {
        let mut p = emit_data.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });

    let (ds, truth) = generate(&cfg)?;
    flipdml::panel::write_csv(&ds, &emit_data)?;
    let sidecar = TruthSidecar {
        true_f: truth.true_f.clone(),
        true_mistakes: truth.true_mistakes,
        seed,
        sim_config: cfg,
    };
    std::fs::write(&truth_out, to_sorted_json(&sidecar)?).map_err(|e| Error::Io {
        path: truth_out.display().to_string(),
        source: e,
    })?;
    emit(
        &to_sorted_json(&serde_json::json!({
            "written": {
                "data": emit_data.display().to_string(),
                "truth": truth_out.display().to_string(),
            },
            "clusters": ds.n_clusters(),
            "rows": ds.n_rows(),
            "digest": format!("{:016x}", ds.digest()),
        }))?,
        args.common.out.as_deref(),
    )
}

#[derive(Serialize)]
struct McOutput {
    tool: String,
    sim_config: SimConfig,
    est: McEstEcho,
    mc_reps: usize,
    mc_seed: u64,
    report: McReport,
}

#[derive(Serialize)]
struct McEstEcho {
    spec_q: usize,
    learner: String,
    k_folds: usize,
    grid_points: usize,
    bootstrap_m: usize,
    alpha: f64,
    df_correction: bool,
}

fn cmd_mc(args: McArgs) -> Result<()> {
    init_threads(args.common.threads);
    let file = load_file_config(&args.common)?;
    let resolved = resolve_est(&args.est, &file)?;
    let mc_reps = resolve(args.mc_reps, &file, "mc-reps", 200)?;
    let mc_seed = resolve(args.mc_seed, &file, "mc-seed", 1)?;
    // per-repetition seeds derive from mc-seed; the sim seed is replaced
    let sim = resolve_sim(&args.sim, 0, &file)?;

    let echo = McEstEcho {
        spec_q: resolved.spec.degree(),
        learner: resolved.learner_name.clone(),
        k_folds: resolved.folds,
        grid_points: resolved.grid_points,
        bootstrap_m: resolved.m,
        alpha: resolved.alpha,
        df_correction: resolved.df_correction,
    };
    let est = EstConfig {
        spec: resolved.spec,
        learner: resolved.learner,
        k_folds: resolved.folds,
        grid: resolved.grid,
        m: resolved.m,
        alpha: resolved.alpha,
        df_correction: resolved.df_correction,
    };
    let report = monte_carlo(&sim, &est, mc_reps, mc_seed)?;
    let output = McOutput {
        tool: tool_id(),
        sim_config: sim,
        est: echo,
        mc_reps,
        mc_seed,
        report,
    };
    emit(&to_sorted_json(&output)?, args.common.out.as_deref())
}
