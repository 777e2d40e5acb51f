//! Experiments comparing the exact (truncated-Fock) reduced dynamics with
//! its Markovian description: master-equation residuals and their scaling
//! in the coupling constant, convergence of the finite-time generator,
//! cutoff-dependent decay-rate comparisons, and level-population dynamics
//! against the rate-matrix semigroup.
//!
//! Every experiment is a pure function of its inputs: time derivatives
//! are central finite differences validated by step halving, exponent
//! fits are log-log least squares with percentile bootstrap confidence
//! intervals drawn from a fixed-seed generator, and all grids are walked
//! in a deterministic order, so identical configurations reproduce
//! identical output bytes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fock::{TruncatedFockSystem, propagate_grid, reduced_observable_with_tol};
use crate::lindblad::{
    LQuad, ObservableMatrix, RateMatrix, assemble_l_finite_t_from_modes,
    assemble_l_finite_t_with, convergence_l_with,
    markov_semigroup,
};
use crate::model::{CutoffFn, CutoffKind, MatterModel};
use crate::{CMatrix, Error, Result};

const BOOTSTRAP_RESAMPLES: usize = 2000;

/// Least-squares power-law exponent with a 95% bootstrap confidence
/// interval (pairs bootstrap, percentile method).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitWithCi {
    pub exponent: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

fn ols_slope(lx: &[f64], ly: &[f64]) -> f64 {
    let n = lx.len() as f64;
    let xm = lx.iter().sum::<f64>() / n;
    let ym = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(ly).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - xm) * (x - xm)).sum();
    sxy / sxx
}

/// Fits y = C·x^p on positive data and reports p with a 95% CI.
pub fn fit_power_law(pairs: &[(f64, f64)], seed: u64) -> Result<FitWithCi> {
    let clean: Vec<(f64, f64)> = pairs
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    if clean.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs ≥ 3 positive points, got {}",
            clean.len()
        )));
    }
    let lx: Vec<f64> = clean.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = clean.iter().map(|p| p.1.ln()).collect();
    let exponent = ols_slope(&lx, &ly);
    if !exponent.is_finite() {
        return Err(Error::InvalidParameter(
            "power-law fit produced a non-finite exponent".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let n = clean.len();
    while slopes.len() < BOOTSTRAP_RESAMPLES {
        let mut bx = Vec::with_capacity(n);
        let mut by = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            bx.push(lx[i]);
            by.push(ly[i]);
        }
        // a resample concentrated on one x has no slope; redraw
        let spread = bx.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - bx.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread < 1e-12 {
            continue;
        }
        slopes.push(ols_slope(&bx, &by));
    }
    slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = slopes[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize];
    let hi = slopes[(0.975 * BOOTSTRAP_RESAMPLES as f64) as usize - 1];
    Ok(FitWithCi {
        exponent,
        ci_low: lo,
        ci_high: hi,
        points: n,
    })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn hash_f64s(tag: &str, vals: impl IntoIterator<Item = f64>) -> String {
    let mut s = String::from(tag);
    for v in vals {
        s.push(':');
        s.push_str(&format!("{:016x}", v.to_bits()));
    }
    s
}

/// One master-equation residual cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// Hash of the experiment inputs, shared by all cells of one run.
    pub config_hash: u64,
    pub g: f64,
    pub t: f64,
    /// ‖σ₀S(t,g)(L(t,g)X − L(T_ref,g)X)‖ — the isolated finite-time tail.
    pub residual_r0_like: f64,
    /// ‖d/dt σ₀S(t,g)X − σ₀S(t,g)(L(T_ref,g)X)‖ against the limit proxy.
    pub total_residual: f64,
    /// Residual after removing the tail term exactly: the higher-order
    /// remainder ‖d/dt σ₀S(t,g)X − σ₀S(t,g)(L(t,g)X)‖.
    pub remainder_residual: f64,
    pub lindblad_prediction_norm: f64,
    pub reduced_dynamics_norm: f64,
}

/// Outcome of the central-difference step validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FdValidation {
    pub fd_step: f64,
    /// Largest ‖D_h − D_{h/2}‖ over all cells.
    pub max_derivative_shift: f64,
    /// Largest shift/residual ratio over coupled (g > 0) cells.
    pub max_shift_over_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub records: Vec<ExperimentRecord>,
    /// Per fixed t: exponent of total_residual against g.
    pub g_exponent_raw: Vec<(f64, FitWithCi)>,
    /// Per fixed t: exponent of remainder_residual against g.
    pub g_exponent_remainder: Vec<(f64, FitWithCi)>,
    /// Per g: ‖L_cont(T_ref,g)X − L_modes(T_ref,g)X‖, the distance between
    /// the continuum-quadrature generator and the one carried by the
    /// system's own mode grid. This is the discretization artifact that
    /// would otherwise masquerade as an O(g²) floor under the remainder.
    pub continuum_defect: Vec<(f64, f64)>,
    pub fd: FdValidation,
}

#[derive(Debug, Clone, Copy)]
pub struct ResidualOptions {
    pub fd_step: f64,
    /// L_proxy time = t_ref_factor · max(t_grid).
    pub t_ref_factor: f64,
    pub prop_tol: f64,
    /// Quadrature of the continuum generator in the defect diagnostic.
    pub quad: LQuad,
    pub bootstrap_seed: u64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-4,
            t_ref_factor: 10.0,
            prop_tol: 1e-11,
            quad: LQuad::default(),
            bootstrap_seed: 0x5eed_0001,
        }
    }
}

/// Measures residual(t,g) = ‖FD_t[σ₀S(t,g)X] − σ₀S(t,g)(L(T_ref,g)X)‖ on
/// the grid, with the finite-time tail term isolated exactly through the
/// generator defect, and fits the g-scaling at each fixed t.
///
/// The generator is assembled over the same mode set the system's
/// Hamiltonian uses, so both sides of the identity share one spectral
/// measure and the remainder reflects the g-scaling rather than the gap
/// between two quadratures. The gap itself is reported per g as
/// `continuum_defect` against the continuum assembly at `opts.quad`.
///
/// The central difference runs at fd_step and fd_step/2; the halving must
/// move the derivative by < 5% of the reported residual on every coupled
/// cell, otherwise the run aborts with diagnostics (uncoupled g = 0 cells
/// measure the finite-difference error itself, so the gate does not apply
/// to them).
pub fn residual_experiment(
    model: &MatterModel,
    sys: &TruncatedFockSystem,
    x: &ObservableMatrix,
    g_grid: &[f64],
    t_grid: &[f64],
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    if g_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty experiment grid".into()));
    }
    if !(opts.fd_step > 0.0) {
        return Err(Error::InvalidParameter("fd_step must be positive".into()));
    }
    let h = opts.fd_step;
    if t_grid.iter().any(|&t| t < h) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "time grid must be ascending with t ≥ fd_step".into(),
        ));
    }
    if g_grid.iter().any(|&g| g < 0.0) {
        return Err(Error::InvalidParameter("negative coupling in grid".into()));
    }
    if sys.matter_dim != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            got: sys.matter_dim,
        });
    }
    let t_max = *t_grid.last().unwrap();
    let t_ref = opts.t_ref_factor * t_max;

    let mut hash_src = hash_f64s("residual", model.eigenvalues.iter().copied());
    hash_src.push_str(&model.cutoff.id());
    hash_src.push_str(&hash_f64s("g", g_grid.iter().copied()));
    hash_src.push_str(&hash_f64s("t", t_grid.iter().copied()));
    hash_src.push_str(&hash_f64s("p", [h, opts.t_ref_factor, opts.prop_tol]));
    let config_hash = fnv1a(hash_src.as_bytes());

    let mut records = Vec::with_capacity(g_grid.len() * t_grid.len());
    let mut continuum_defect = Vec::with_capacity(g_grid.len());
    let mut max_shift = 0.0f64;
    let mut max_ratio = 0.0f64;
    for &g in g_grid {
        let l_ref = assemble_l_finite_t_from_modes(model, x, t_ref, g, &sys.mode_set)?;
        let l_cont = assemble_l_finite_t_with(model, x, t_ref, g, &opts.quad)?;
        continuum_defect.push((g, (&l_cont - &l_ref).norm()));
        for &t in t_grid {
            let l_t = assemble_l_finite_t_from_modes(model, x, t, g, &sys.mode_set)?;
            let delta = &l_t - &l_ref;
            let sigma = |xm: &CMatrix, at: f64| -> Result<CMatrix> {
                reduced_observable_with_tol(sys, xm, at, g, opts.prop_tol)
            };
            let d_full = (sigma(&x.x, t + h)? - sigma(&x.x, t - h)?) / crate::C64::new(2.0 * h, 0.0);
            let d_half = (sigma(&x.x, t + 0.5 * h)? - sigma(&x.x, t - 0.5 * h)?)
                / crate::C64::new(h, 0.0);
            let shift = (&d_full - &d_half).norm();
            let pred_ref = sigma(&l_ref, t)?;
            let tail_push = sigma(&delta, t)?;
            let total = (&d_half - &pred_ref).norm();
            let remainder = (&d_half - &pred_ref - &tail_push).norm();
            max_shift = max_shift.max(shift);
            if g > 0.0 {
                let ratio = shift / total.max(1e-300);
                max_ratio = max_ratio.max(ratio);
                if ratio > 0.05 {
                    return Err(Error::FdValidation(format!(
                        "fd_step {h} unvalidated at (g={g}, t={t}): halving moved the \
                         derivative by {shift:.3e} against residual {total:.3e}"
                    )));
                }
            }
            records.push(ExperimentRecord {
                config_hash,
                g,
                t,
                residual_r0_like: tail_push.norm(),
                total_residual: total,
                remainder_residual: remainder,
                lindblad_prediction_norm: pred_ref.norm(),
                reduced_dynamics_norm: sigma(&x.x, t)?.norm(),
            });
        }
    }

    let coupled: Vec<f64> = g_grid.iter().copied().filter(|&g| g > 0.0).collect();
    let mut g_exponent_raw = Vec::new();
    let mut g_exponent_remainder = Vec::new();
    if coupled.len() >= 3 {
        for (ti, &t) in t_grid.iter().enumerate() {
            let pick = |f: fn(&ExperimentRecord) -> f64| -> Vec<(f64, f64)> {
                records
                    .iter()
                    .filter(|r| r.g > 0.0 && r.t == t)
                    .map(|r| (r.g, f(r)))
                    .collect()
            };
            let seed = opts.bootstrap_seed.wrapping_add(ti as u64);
            if let Ok(fit) = fit_power_law(&pick(|r| r.total_residual), seed) {
                g_exponent_raw.push((t, fit));
            }
            if let Ok(fit) =
                fit_power_law(&pick(|r| r.remainder_residual), seed.wrapping_add(7919))
            {
                g_exponent_remainder.push((t, fit));
            }
        }
    }
    Ok(ResidualReport {
        records,
        g_exponent_raw,
        g_exponent_remainder,
        continuum_defect,
        fd: FdValidation {
            fd_step: h,
            max_derivative_shift: max_shift,
            max_shift_over_residual: max_ratio,
        },
    })
}

/// Generator-convergence defects with the fitted decay exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceFit {
    pub pairs: Vec<(f64, f64)>,
    pub fit: FitWithCi,
}

/// Runs convergence_l on the grid and fits ‖L(t,g)X − L(T_ref,g)X‖ ~ t^p.
pub fn convergence_experiment(
    model: &MatterModel,
    x: &ObservableMatrix,
    g: f64,
    t_grid: &[f64],
    quad: &LQuad,
    seed: u64,
) -> Result<ConvergenceFit> {
    let pairs = convergence_l_with(model, x, g, t_grid, quad)?;
    let fit = fit_power_law(&pairs, seed)?;
    Ok(ConvergenceFit { pairs, fit })
}

/// Paired decay-rate report under the two cutoff kinds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffComparison {
    pub gauss: ConvergenceFit,
    pub vanishing: ConvergenceFit,
    /// slope(gauss) − slope(vanishing); positive when the vanishing
    /// cutoff converges faster (more negative exponent).
    pub slope_separation: f64,
    /// Eigenvalue agreement between the two runs (must be exact).
    pub spectra_match: bool,
}

/// Swaps the cutoff kind at equal scale; the matter spectrum and basis
/// are untouched because the cutoff only enters the coupling.
pub fn with_cutoff_kind(model: &MatterModel, kind: CutoffKind) -> Result<MatterModel> {
    let mut out = model.clone();
    out.cutoff = CutoffFn::new(kind, model.cutoff.scale)?;
    Ok(out)
}

/// Convergence of L(t,g) under the Gaussian cutoff versus the cutoff
/// vanishing at the origin, at equal scale.
pub fn cutoff_comparison(
    model: &MatterModel,
    x: &ObservableMatrix,
    g: f64,
    t_grid: &[f64],
    quad: &LQuad,
    seed: u64,
) -> Result<CutoffComparison> {
    let gauss_model = with_cutoff_kind(model, CutoffKind::Gauss)?;
    let vanishing_model = with_cutoff_kind(model, CutoffKind::GaussVanishing)?;
    let spectra_match = gauss_model.eigenvalues == vanishing_model.eigenvalues;
    let gauss = convergence_experiment(&gauss_model, x, g, t_grid, quad, seed)?;
    let vanishing =
        convergence_experiment(&vanishing_model, x, g, t_grid, quad, seed.wrapping_add(1))?;
    let slope_separation = gauss.fit.exponent - vanishing.fit.exponent;
    Ok(CutoffComparison {
        gauss,
        vanishing,
        slope_separation,
        spectra_match,
    })
}

/// One row of the population-dynamics table: exact reduced dynamics
/// against the Markov semigroup for the transition m → j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationRow {
    pub t: f64,
    /// Initial state index.
    pub m: usize,
    /// Final state index.
    pub j: usize,
    pub p_exact: f64,
    pub p_markov: f64,
    pub gap: f64,
}

/// Transition probabilities P_mj(t) of the exact truncated-Fock dynamics
/// (diagonal of σ₀S(t,g)π_j from initial state m) against the rate-matrix
/// semigroup entry (j, m); columns of the semigroup index the initial
/// state. Rows are ordered by (t, m, j).
pub fn population_comparison(
    model: &MatterModel,
    rate: &RateMatrix,
    g: f64,
    t_grid: &[f64],
    sys: &TruncatedFockSystem,
    prop_tol: f64,
) -> Result<Vec<PopulationRow>> {
    let n = model.n();
    if rate.n() != n || sys.matter_dim != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: rate.n().min(sys.matter_dim),
        });
    }
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter(
            "population time grid must be nonnegative and ascending".into(),
        ));
    }
    let markov: Vec<_> = t_grid
        .iter()
        .map(|&t| markov_semigroup(rate, g, t))
        .collect::<Result<Vec<_>>>()?;
    // exact dynamics: one cumulative walk per initial state
    let mut exact = vec![vec![0.0; n * n]; t_grid.len()];
    for m in 0..n {
        let psi0 = sys.vacuum_matter_state(m)?;
        let states = propagate_grid(sys, &psi0, t_grid, g, prop_tol)?;
        for (ti, psi) in states.iter().enumerate() {
            for j in 0..n {
                // population of matter level j across all photon sectors
                let p: f64 = (0..sys.occupations.len())
                    .map(|io| psi[io * n + j].norm_sqr())
                    .sum();
                exact[ti][m * n + j] = p;
            }
        }
    }
    let mut rows = Vec::with_capacity(t_grid.len() * n * n);
    for (ti, &t) in t_grid.iter().enumerate() {
        for m in 0..n {
            for j in 0..n {
                let p_exact = exact[ti][m * n + j];
                let p_markov = markov[ti][(j, m)];
                rows.push(PopulationRow {
                    t,
                    m,
                    j,
                    p_exact,
                    p_markov,
                    gap: (p_exact - p_markov).abs(),
                });
            }
        }
    }
    Ok(rows)
}

/// Largest gap over the table for a fixed transition m → j.
pub fn max_population_gap(rows: &[PopulationRow], m: usize, j: usize) -> f64 {
    rows.iter()
        .filter(|r| r.m == m && r.j == j)
        .map(|r| r.gap)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{DEFAULT_DIM_CAP, ModeSpec, build_fock_system_from_modes, build_mode_set};
    use crate::lindblad::transition_rate_matrix;
    use crate::model::build_spin_model;

    fn spin_model() -> MatterModel {
        build_spin_model(1.0, [0.0; 3], CutoffFn::gauss(1.0).unwrap()).unwrap()
    }

    fn spin_system(model: &MatterModel) -> TruncatedFockSystem {
        let modes = build_mode_set(
            &model.cutoff,
            &ModeSpec {
                radial_panels: 10,
                sphere_order: 2,
                r_max_factor: 6.0,
            },
        )
        .unwrap();
        build_fock_system_from_modes(model, modes, 1, DEFAULT_DIM_CAP).unwrap()
    }

    #[test]
    fn power_law_fit_recovers_exact_slope() {
        let pairs: Vec<(f64, f64)> = (1..=8)
            .map(|i| {
                let x = 1.5f64.powi(i);
                (x, 3.0 * x.powf(-1.7))
            })
            .collect();
        let fit = fit_power_law(&pairs, 11).unwrap();
        assert!((fit.exponent + 1.7).abs() < 1e-12);
        assert!(fit.ci_low <= -1.7 + 1e-9 && fit.ci_high >= -1.7 - 1e-9);
        assert!(fit.ci_high - fit.ci_low < 1e-9, "noise-free fit has tight CI");
        // deterministic across calls with the same seed
        let again = fit_power_law(&pairs, 11).unwrap();
        assert_eq!(fit.ci_low, again.ci_low);
        assert!(fit_power_law(&pairs[..2], 1).is_err());
    }

    #[test]
    fn power_law_fit_brackets_noisy_slope() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<(f64, f64)> = (1..=12)
            .map(|i| {
                let x = 2.0f64.powi(i);
                let noise = 1.0 + 0.05 * (rng.gen::<f64>() - 0.5);
                (x, 0.7 * x.powf(-2.0) * noise)
            })
            .collect();
        let fit = fit_power_law(&pairs, 5).unwrap();
        assert!(fit.ci_low <= -2.0 && -2.0 <= fit.ci_high, "{fit:?}");
        assert!(fit.ci_high < fit.ci_low + 0.2, "CI unexpectedly wide: {fit:?}");
    }

    #[test]
    fn residuals_vanish_at_zero_coupling() {
        let model = spin_model();
        let sys = spin_system(&model);
        let x = ObservableMatrix::from_diagonal(&[-1.0, 1.0]);
        let report = residual_experiment(
            &model,
            &sys,
            &x,
            &[0.0],
            &[1.0, 2.0, 4.0],
            &ResidualOptions::default(),
        )
        .unwrap();
        for rec in &report.records {
            assert!(
                rec.total_residual <= 1e-6,
                "g = 0 residual {} at t = {}",
                rec.total_residual,
                rec.t
            );
            assert!(rec.residual_r0_like <= 1e-12, "tail must vanish at g = 0");
        }
        assert!(report.fd.max_derivative_shift < 1e-6);
    }

    #[test]
    fn residual_scales_down_with_coupling() {
        let model = spin_model();
        let sys = spin_system(&model);
        let x = ObservableMatrix::from_diagonal(&[-1.0, 1.0]);
        let report = residual_experiment(
            &model,
            &sys,
            &x,
            &[0.2, 0.1],
            &[2.0],
            &ResidualOptions::default(),
        )
        .unwrap();
        let r: Vec<f64> = report.records.iter().map(|r| r.total_residual).collect();
        assert!(
            r[1] < 0.5 * r[0],
            "halving g should cut the ~g² residual well below half: {r:?}"
        );
    }

    #[test]
    fn absurd_fd_step_fails_validation() {
        let model = spin_model();
        let sys = spin_system(&model);
        let x = ObservableMatrix::from_diagonal(&[-1.0, 1.0]);
        let err = residual_experiment(
            &model,
            &sys,
            &x,
            &[0.2],
            &[2.0],
            &ResidualOptions {
                fd_step: 1.0,
                ..ResidualOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::FdValidation(_)), "got {err:?}");
    }

    #[test]
    fn cutoff_comparison_separates_decay_rates() {
        let model = spin_model();
        let x = ObservableMatrix::from_diagonal(&[-1.0, 1.0]);
        let report = cutoff_comparison(
            &model,
            &x,
            0.2,
            &[5.0, 10.0, 20.0, 40.0, 80.0],
            &LQuad::default(),
            91,
        )
        .unwrap();
        assert!(report.spectra_match);
        assert!(
            report.slope_separation >= 0.7,
            "separation {} (gauss {}, vanishing {})",
            report.slope_separation,
            report.gauss.fit.exponent,
            report.vanishing.fit.exponent
        );
        assert!(report.gauss.fit.exponent < -0.9);
        assert!(report.vanishing.fit.exponent < -1.9);
    }

    #[test]
    fn population_table_limits() {
        let model = spin_model();
        let sys = spin_system(&model);
        let rate = transition_rate_matrix(&model, 8).unwrap();
        let g = 0.2;
        let rows =
            population_comparison(&model, &rate, g, &[0.0, 5.0, 20.0], &sys, 1e-10).unwrap();
        assert_eq!(rows.len(), 3 * 4);
        for r in &rows {
            assert!((0.0..=1.0 + 1e-9).contains(&r.p_exact), "{r:?}");
            assert!((-1e-12..=1.0 + 1e-12).contains(&r.p_markov), "{r:?}");
            if r.t == 0.0 {
                let want = if r.m == r.j { 1.0 } else { 0.0 };
                assert!((r.p_exact - want).abs() < 1e-12);
                assert!((r.p_markov - want).abs() < 1e-12);
                assert!(r.gap < 1e-12);
            }
            // no upward Markov transitions: down (index 0) never reaches up
            if r.m == 0 && r.j == 1 {
                assert!(r.p_markov.abs() < 1e-14, "{r:?}");
            }
        }
        // exact populations from one initial state sum to 1
        for &t in &[0.0, 5.0, 20.0] {
            for m in 0..2 {
                let s: f64 = rows
                    .iter()
                    .filter(|r| r.t == t && r.m == m)
                    .map(|r| r.p_exact)
                    .sum();
                assert!((s - 1.0).abs() < 1e-9, "Σ_j P_{m}j(t={t}) = {s}");
            }
        }
        let gap = max_population_gap(&rows, 1, 1);
        assert!(gap.is_finite() && gap < 0.5);
    }

    #[test]
    fn cutoff_swap_preserves_model() {
        let model = spin_model();
        let swapped = with_cutoff_kind(&model, CutoffKind::GaussVanishing).unwrap();
        assert_eq!(model.eigenvalues, swapped.eigenvalues);
        assert_eq!(swapped.cutoff.kind, CutoffKind::GaussVanishing);
        assert_eq!(model.cutoff.scale, swapped.cutoff.scale);
    }
}
