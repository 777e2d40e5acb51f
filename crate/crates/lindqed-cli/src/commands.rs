//! The three commands behind the CLI: rate-matrix emission, population
//! dynamics against the Markov semigroup, and the validation suite.
//! Commands return process exit codes: 0 success, 1 threshold violation,
//! 2 configuration rejection, 3 numerical/operational failure.

use std::path::Path;

use serde::{Deserialize, Serialize};

use lindqed::fock::{TruncatedFockSystem, build_fock_system_from_modes, build_mode_set};
use lindqed::harness::{
    CutoffComparison, PopulationRow, ResidualOptions, ResidualReport, cutoff_comparison,
    population_comparison, residual_experiment,
};
use lindqed::lindblad::{
    ObservableMatrix, RateMatrix, eval_phi, markov_semigroup, transition_rate_matrix,
};
use lindqed::model::{CutoffKind, MatterModel};

use crate::config::{ConfigError, ObservableKind, OpKind, OutFormat, RunConfig};
use crate::output::{CsvRow, fmt_f64, to_csv, to_json, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_THRESHOLD: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.0,
        }
    }
}

impl From<lindqed::Error> for Failure {
    fn from(e: lindqed::Error) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: format!("numerical failure: {e}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: format!("i/o failure: {e}"),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: format!("serialization failure: {e}"),
        }
    }
}

fn threshold_failure(names: &[String]) -> Failure {
    Failure {
        code: EXIT_THRESHOLD,
        message: format!("validation failed: {}", names.join(", ")),
    }
}

/// Runs a command body and maps the outcome to (exit code, stderr text).
fn run(body: impl FnOnce() -> Result<String, Failure>) -> i32 {
    match body() {
        Ok(stdout_text) => {
            print!("{stdout_text}");
            EXIT_OK
        }
        Err(f) => {
            eprintln!("{}", f.message);
            f.code
        }
    }
}

// ---------------------------------------------------------------- rates

#[derive(Debug, Serialize, Deserialize)]
struct RateArtifact {
    energies: Vec<f64>,
    /// Row-major rates; entry (m, j) is the transition rate m → j, with
    /// the diagonal carrying the negative row sum.
    matrix: Vec<Vec<f64>>,
    quad_order: usize,
    cutoff: String,
    conservation_defect: f64,
}

struct RateRow {
    from: usize,
    to: usize,
    rate: f64,
}

impl CsvRow for RateRow {
    fn header() -> &'static str {
        "from,to,rate"
    }
    fn row(&self, out: &mut String) {
        out.push_str(&format!("{},{},{}", self.from, self.to, fmt_f64(self.rate)));
    }
}

fn rate_rows(rate: &RateMatrix) -> Vec<RateRow> {
    let n = rate.n();
    let mut rows = Vec::with_capacity(n * n);
    for m in 0..n {
        for j in 0..n {
            rows.push(RateRow {
                from: m,
                to: j,
                rate: rate.matrix[(m, j)],
            });
        }
    }
    rows
}

fn structural_summary(model: &MatterModel, rate: &RateMatrix) -> String {
    let n = rate.n();
    let defect = rate.conservation_defect();
    let mut negative = 0usize;
    let mut upward = 0usize;
    let mut degenerate = 0usize;
    for m in 0..n {
        for j in 0..n {
            if m == j {
                continue;
            }
            let v = rate.matrix[(m, j)];
            if v < 0.0 {
                negative += 1;
            }
            let gap = model.eigenvalues[m] - model.eigenvalues[j];
            if gap < -1e-9 && v != 0.0 {
                upward += 1;
            }
            if gap.abs() <= 1e-9 && v != 0.0 {
                degenerate += 1;
            }
        }
    }
    let ok = |violations: usize, label: &str| {
        if violations == 0 {
            format!("OK — {label}")
        } else {
            format!("VIOLATED ({violations} entries) — {label}")
        }
    };
    format!(
        "rate matrix {n}×{n} ({} cutoff)\n\
         conservation: max |row sum| = {}\n\
         sign pattern: {}\n\
         triangularity: {}\n\
         degeneracies: {}\n",
        rate.cutoff_id,
        fmt_f64(defect),
        ok(negative, "all transition rates nonnegative"),
        ok(upward, "no transitions into higher levels"),
        ok(degenerate, "no transitions within degenerate levels"),
    )
}

pub fn cmd_rates(config_path: &Path) -> i32 {
    run(|| {
        let cfg = RunConfig::load(config_path)?;
        let model = cfg.build_model()?;
        let rate = transition_rate_matrix(&model, cfg.quadrature.rate_sphere_order)?;
        let dir = Path::new(&cfg.output.directory);
        if cfg.wants(OutFormat::Csv) {
            write_atomic(dir, "rate_matrix.csv", &to_csv(&rate_rows(&rate)))?;
        }
        if cfg.wants(OutFormat::Json) {
            let n = rate.n();
            let artifact = RateArtifact {
                energies: rate.energies.clone(),
                matrix: (0..n)
                    .map(|m| (0..n).map(|j| rate.matrix[(m, j)]).collect())
                    .collect(),
                quad_order: rate.quad_order,
                cutoff: rate.cutoff_id.clone(),
                conservation_defect: rate.conservation_defect(),
            };
            write_atomic(dir, "rate_matrix.json", &to_json(&artifact)?)?;
        }
        Ok(structural_summary(&model, &rate))
    })
}

// --------------------------------------------------------------- evolve

impl CsvRow for PopulationRow {
    fn header() -> &'static str {
        "t,m,j,P_exact,P_markov,gap"
    }
    fn row(&self, out: &mut String) {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            fmt_f64(self.t),
            self.m,
            self.j,
            fmt_f64(self.p_exact),
            fmt_f64(self.p_markov),
            fmt_f64(self.gap)
        ));
    }
}

fn build_system(cfg: &RunConfig, model: &MatterModel) -> Result<TruncatedFockSystem, Failure> {
    let modes = build_mode_set(&model.cutoff, &cfg.mode_spec())?;
    Ok(build_fock_system_from_modes(
        model,
        modes,
        cfg.fock.n_max,
        cfg.fock.dim_cap,
    )?)
}

/// The coupling strength a single-g command runs at: the leading entry
/// of the experiment g grid.
fn leading_g(cfg: &RunConfig) -> f64 {
    cfg.experiment.g_grid[0]
}

pub fn cmd_evolve(config_path: &Path) -> i32 {
    run(|| {
        let cfg = RunConfig::load(config_path)?;
        let model = cfg.build_model()?;
        let rate = transition_rate_matrix(&model, cfg.quadrature.rate_sphere_order)?;
        let sys = build_system(&cfg, &model)?;
        let g = leading_g(&cfg);
        let rows = population_comparison(
            &model,
            &rate,
            g,
            &cfg.experiment.t_grid,
            &sys,
            cfg.fock.prop_tol,
        )?;
        // the semigroup must conserve probability to near machine accuracy
        let worst = markov_normalization_defect(&rate, g, &cfg.experiment.t_grid)?;
        if worst > 1e-10 {
            return Err(Failure {
                code: EXIT_NUMERICAL,
                message: format!("Markov semigroup lost normalization: defect {worst:.3e}"),
            });
        }
        let dir = Path::new(&cfg.output.directory);
        if cfg.wants(OutFormat::Csv) {
            write_atomic(dir, "populations.csv", &to_csv(&rows))?;
        }
        if cfg.wants(OutFormat::Json) {
            write_atomic(dir, "populations.json", &to_json(&rows)?)?;
        }
        let max_gap = rows.iter().map(|r| r.gap).fold(0.0f64, f64::max);
        Ok(format!(
            "population table: {} rows over {} times, g = {}, dim = {}\n\
             max |P_exact − P_markov| = {}\n\
             markov normalization defect = {}\n",
            rows.len(),
            cfg.experiment.t_grid.len(),
            fmt_f64(g),
            sys.dim,
            fmt_f64(max_gap),
            fmt_f64(worst),
        ))
    })
}

fn markov_normalization_defect(
    rate: &RateMatrix,
    g: f64,
    t_grid: &[f64],
) -> Result<f64, Failure> {
    let n = rate.n();
    let mut worst = 0.0f64;
    for &t in t_grid {
        let p = markov_semigroup(rate, g, t)?;
        for m in 0..n {
            let s: f64 = (0..n).map(|j| p[(j, m)]).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    Ok(worst)
}

// ------------------------------------------------------------- validate

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub requirement: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KernelDecayReport {
    /// Weight power p in sup_s (1+s^p)‖Φ(s,X)‖.
    pub power: u32,
    pub s_grid: Vec<f64>,
    pub weighted_norms: Vec<f64>,
    pub sup: f64,
    pub sup_refined: f64,
    pub relative_change: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<CutoffComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelDecayReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<PopulationRow>>,
}

fn observable(cfg: &RunConfig, model: &MatterModel) -> ObservableMatrix {
    let n = model.n();
    match cfg.experiment.observable {
        ObservableKind::GroundProjector => ObservableMatrix::projector(n, 0),
        ObservableKind::LevelImbalance => {
            let diag: Vec<f64> = (0..n).map(|j| if j == 0 { -1.0 } else { 1.0 }).collect();
            ObservableMatrix::from_diagonal(&diag)
        }
    }
}

const G0_RESIDUAL_MAX: f64 = 1e-6;
const REMAINDER_EXPONENT_MIN: f64 = 2.5;
const GAUSS_EXPONENT_MAX: f64 = -0.9;
const VANISHING_EXPONENT_MAX: f64 = -1.9;
const SLOPE_SEPARATION_MIN: f64 = 0.7;
const KERNEL_STABILITY_MAX: f64 = 0.01;
const MARKOV_NORMALIZATION_MAX: f64 = 1e-10;

fn residual_checks(report: &ResidualReport, cfg: &RunConfig, checks: &mut Vec<CheckResult>) {
    checks.push(CheckResult {
        name: "fd-derivative-stability".into(),
        passed: report.fd.max_shift_over_residual <= 0.05,
        observed: report.fd.max_shift_over_residual,
        requirement: "halving fd_step moves the derivative by ≤ 5% of the residual".into(),
    });
    if cfg.experiment.g_grid.contains(&0.0) {
        let worst = report
            .records
            .iter()
            .filter(|r| r.g == 0.0)
            .map(|r| r.total_residual)
            .fold(0.0f64, f64::max);
        checks.push(CheckResult {
            name: "free-limit-residual".into(),
            passed: worst <= G0_RESIDUAL_MAX,
            observed: worst,
            requirement: format!("residual at g = 0 ≤ {G0_RESIDUAL_MAX:e}"),
        });
    }
    if let Some((t, fit)) = report.g_exponent_remainder.first() {
        checks.push(CheckResult {
            name: "residual-remainder-g-exponent".into(),
            passed: fit.exponent >= REMAINDER_EXPONENT_MIN,
            observed: fit.exponent,
            requirement: format!(
                "g-exponent of the tail-subtracted residual at t = {t} ≥ {REMAINDER_EXPONENT_MIN}"
            ),
        });
    }
}

fn cutoff_checks(report: &CutoffComparison, checks: &mut Vec<CheckResult>) {
    checks.push(CheckResult {
        name: "gauss-convergence-exponent".into(),
        passed: report.gauss.fit.ci_high <= GAUSS_EXPONENT_MAX,
        observed: report.gauss.fit.ci_high,
        requirement: format!("95% CI upper bound ≤ {GAUSS_EXPONENT_MAX}"),
    });
    checks.push(CheckResult {
        name: "vanishing-convergence-exponent".into(),
        passed: report.vanishing.fit.ci_high <= VANISHING_EXPONENT_MAX,
        observed: report.vanishing.fit.ci_high,
        requirement: format!("95% CI upper bound ≤ {VANISHING_EXPONENT_MAX}"),
    });
    checks.push(CheckResult {
        name: "cutoff-slope-separation".into(),
        passed: report.slope_separation >= SLOPE_SEPARATION_MIN,
        observed: report.slope_separation,
        requirement: format!("vanishing cutoff steeper by ≥ {SLOPE_SEPARATION_MIN}"),
    });
    checks.push(CheckResult {
        name: "shared-spectrum".into(),
        passed: report.spectra_match,
        observed: if report.spectra_match { 0.0 } else { 1.0 },
        requirement: "identical matter spectrum under both cutoffs".into(),
    });
}

fn kernel_decay(
    cfg: &RunConfig,
    model: &MatterModel,
    x: &ObservableMatrix,
) -> Result<KernelDecayReport, Failure> {
    let power: u32 = match model.cutoff.kind {
        CutoffKind::Gauss => 2,
        CutoffKind::GaussVanishing => 3,
    };
    let quad = cfg.lquad();
    let mut refined = quad;
    refined.radial_refine *= 2;
    let weighted = |q: &lindqed::lindblad::LQuad| -> Result<Vec<f64>, Failure> {
        cfg.experiment
            .kernel_s_grid
            .iter()
            .map(|&s| {
                let phi = eval_phi(model, x, s, q)?;
                Ok((1.0 + s.powi(power as i32)) * phi.norm())
            })
            .collect()
    };
    let weighted_norms = weighted(&quad)?;
    let refined_norms = weighted(&refined)?;
    let sup = weighted_norms.iter().cloned().fold(0.0f64, f64::max);
    let sup_refined = refined_norms.iter().cloned().fold(0.0f64, f64::max);
    let relative_change = (sup - sup_refined).abs() / sup.max(1e-300);
    Ok(KernelDecayReport {
        power,
        s_grid: cfg.experiment.kernel_s_grid.clone(),
        weighted_norms,
        sup,
        sup_refined,
        relative_change,
    })
}

fn population_checks(
    model: &MatterModel,
    rows: &[PopulationRow],
    checks: &mut Vec<CheckResult>,
) {
    let zero_gap = rows
        .iter()
        .filter(|r| r.t == 0.0)
        .map(|r| r.gap)
        .fold(0.0f64, f64::max);
    checks.push(CheckResult {
        name: "initial-population-gap".into(),
        passed: zero_gap <= 1e-12,
        observed: zero_gap,
        requirement: "exact and Markov populations coincide at t = 0".into(),
    });
    let upward = rows
        .iter()
        .filter(|r| model.eigenvalues[r.j] > model.eigenvalues[r.m] + 1e-9)
        .map(|r| r.p_markov.abs())
        .fold(0.0f64, f64::max);
    checks.push(CheckResult {
        name: "no-upward-markov-transitions".into(),
        passed: upward <= 1e-14,
        observed: upward,
        requirement: "Markov semigroup never populates higher levels".into(),
    });
}

pub fn cmd_validate(config_path: &Path, dry_run: bool) -> i32 {
    run(|| {
        let cfg = RunConfig::load(config_path)?;
        if dry_run {
            // echo the accepted configuration; no computation, no files
            return Ok(to_json(&cfg)?);
        }
        let model = cfg.build_model()?;
        let x = observable(&cfg, &model);
        let mut checks = Vec::new();
        let mut residual = None;
        let mut cutoffs = None;
        let mut kernel = None;
        let mut populations = None;

        for op in &cfg.experiment.ops {
            match op {
                OpKind::Residual => {
                    let sys = build_system(&cfg, &model)?;
                    let opts = ResidualOptions {
                        fd_step: cfg.experiment.fd_step,
                        prop_tol: cfg.fock.prop_tol,
                        quad: cfg.lquad(),
                        bootstrap_seed: cfg.experiment.bootstrap_seed,
                        ..ResidualOptions::default()
                    };
                    let report = residual_experiment(
                        &model,
                        &sys,
                        &x,
                        &cfg.experiment.g_grid,
                        &cfg.experiment.t_grid,
                        &opts,
                    )?;
                    residual_checks(&report, &cfg, &mut checks);
                    residual = Some(report);
                }
                OpKind::CutoffComparison => {
                    let g = cfg
                        .experiment
                        .g_grid
                        .iter()
                        .cloned()
                        .fold(0.0f64, f64::max)
                        .max(0.1);
                    let report = cutoff_comparison(
                        &model,
                        &x,
                        g,
                        &cfg.experiment.convergence_t_grid,
                        &cfg.lquad(),
                        cfg.experiment.bootstrap_seed,
                    )?;
                    cutoff_checks(&report, &mut checks);
                    cutoffs = Some(report);
                }
                OpKind::KernelDecay => {
                    let report = kernel_decay(&cfg, &model, &x)?;
                    checks.push(CheckResult {
                        name: "kernel-decay-stability".into(),
                        passed: report.relative_change < KERNEL_STABILITY_MAX
                            && report.sup.is_finite(),
                        observed: report.relative_change,
                        requirement: format!(
                            "weighted kernel sup changes < {KERNEL_STABILITY_MAX:e} under \
                             quadrature doubling"
                        ),
                    });
                    kernel = Some(report);
                }
                OpKind::Populations => {
                    let rate =
                        transition_rate_matrix(&model, cfg.quadrature.rate_sphere_order)?;
                    let sys = build_system(&cfg, &model)?;
                    let g = leading_g(&cfg);
                    let mut grid = cfg.experiment.t_grid.clone();
                    if grid.first() != Some(&0.0) {
                        grid.insert(0, 0.0);
                    }
                    let rows =
                        population_comparison(&model, &rate, g, &grid, &sys, cfg.fock.prop_tol)?;
                    let defect = markov_normalization_defect(&rate, g, &grid)?;
                    checks.push(CheckResult {
                        name: "markov-column-stochastic".into(),
                        passed: defect <= MARKOV_NORMALIZATION_MAX,
                        observed: defect,
                        requirement: format!(
                            "semigroup columns sum to 1 ± {MARKOV_NORMALIZATION_MAX:e}"
                        ),
                    });
                    population_checks(&model, &rows, &mut checks);
                    populations = Some(rows);
                }
            }
        }

        let all_passed = checks.iter().all(|c| c.passed);
        let report = ValidationReport {
            schema_version: 1,
            config: cfg.clone(),
            all_passed,
            checks,
            residual,
            cutoffs,
            kernel,
            populations,
        };
        let dir = Path::new(&cfg.output.directory);
        write_atomic(dir, "validation_report.json", &to_json(&report)?)?;
        if !all_passed {
            let failing: Vec<String> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.clone())
                .collect();
            return Err(threshold_failure(&failing));
        }
        let mut lines = String::new();
        for c in &report.checks {
            lines.push_str(&format!("{}: PASS ({})\n", c.name, fmt_f64(c.observed)));
        }
        lines.push_str("validation passed\n");
        Ok(lines)
    })
}
