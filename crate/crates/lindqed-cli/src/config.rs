//! Run configuration: a strictly validated JSON document. Unknown keys
//! are rejected everywhere, physical parameters are checked for
//! positivity after parsing, and every accepted configuration maps
//! deterministically onto library objects.

use serde::{Deserialize, Serialize};

use lindqed::lindblad::LQuad;
use lindqed::model::{
    CutoffFn, CutoffKind, MatterModel, build_harmonic_model, build_quartic_model,
    build_spin_model,
};

/// Error produced while reading or validating a configuration. Parse
/// errors keep serde_json's line/column diagnostics.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    pub fock: FockBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Spin,
    Harmonic,
    Quartic,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    /// Spatial dimension for the oscillator models (1 or 3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Excitation cap defining the matter level count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Magnetic field strength B > 0 (spin model only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_strength: Option<f64>,
    /// Spin position x₀ (spin model only, defaults to the origin).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    pub cutoff: CutoffBlock,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CutoffBlock {
    pub kind: CutoffKind,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureBlock {
    /// Polar order of the product sphere rule in the generator assembly.
    pub sphere_order: usize,
    /// Nodes of the angular-collapse rule for 1D models.
    pub collapse_nodes: usize,
    /// Radial panel floor for the generator's momentum integral.
    pub min_radial_panels: usize,
    /// Multiplies the automatically chosen radial panel count.
    pub radial_refine: usize,
    /// Polar order of the sphere rule in the rate-matrix integrals.
    pub rate_sphere_order: usize,
    /// Photon-momentum support is cut at r_max_factor · cutoff scale.
    pub r_max_factor: f64,
}

impl Default for QuadratureBlock {
    fn default() -> Self {
        let q = LQuad::default();
        Self {
            sphere_order: q.sphere_order,
            collapse_nodes: q.collapse_nodes,
            min_radial_panels: q.min_radial_panels,
            radial_refine: q.radial_refine,
            rate_sphere_order: 12,
            r_max_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FockBlock {
    /// Photon-number truncation (0, 1 or 2).
    pub n_max: usize,
    /// Radial panels of the mode grid (8 Gauss nodes per panel).
    pub radial_panels: usize,
    /// Polar order of the mode grid's sphere rule.
    pub sphere_order: usize,
    /// Hard cap on the Hilbert-space dimension.
    #[serde(default = "default_dim_cap")]
    pub dim_cap: usize,
    /// Relative propagation accuracy per run.
    #[serde(default = "default_prop_tol")]
    pub prop_tol: f64,
}

fn default_dim_cap() -> usize {
    lindqed::fock::DEFAULT_DIM_CAP
}

fn default_prop_tol() -> f64 {
    1e-11
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    /// Master-equation residuals over (g, t) with g-exponent fits.
    Residual,
    /// Generator convergence under both cutoff kinds, paired exponents.
    CutoffComparison,
    /// Weighted sup of the interaction kernel over the s grid.
    KernelDecay,
    /// Markov-semigroup structure checks on the population table.
    Populations,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    pub ops: Vec<OpKind>,
    pub g_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Time grid of the generator-convergence fits.
    pub convergence_t_grid: Vec<f64>,
    /// s grid of the kernel-decay sup.
    pub kernel_s_grid: Vec<f64>,
    pub fd_step: f64,
    pub bootstrap_seed: u64,
    pub observable: ObservableKind,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// Projector onto the lowest matter level.
    GroundProjector,
    /// Diagonal ±1 split between lowest and remaining levels.
    LevelImbalance,
}

pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64))
        .collect()
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            ops: vec![OpKind::Residual, OpKind::CutoffComparison, OpKind::KernelDecay],
            g_grid: vec![0.0, 0.025, 0.05, 0.1, 0.2],
            t_grid: log_grid(1.0, 50.0, 8),
            convergence_t_grid: log_grid(10.0, 1e3, 13),
            kernel_s_grid: log_grid(1.0, 200.0, 25),
            fd_step: 1e-4,
            bootstrap_seed: 0x5eed_0001,
            observable: ObservableKind::GroundProjector,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutFormat>,
}

fn default_formats() -> Vec<OutFormat> {
    vec![OutFormat::Csv, OutFormat::Json]
}

impl RunConfig {
    /// Parses and validates a configuration file. Parse errors carry
    /// serde_json's line/column position; semantic errors name the field.
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("config schema violation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks beyond the serde schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        let fail = |msg: String| Err(ConfigError(msg));
        if !(m.cutoff.scale > 0.0 && m.cutoff.scale.is_finite()) {
            return fail(format!("model.cutoff.scale must be positive, got {}", m.cutoff.scale));
        }
        match m.kind {
            ModelKind::Spin => {
                match m.field_strength {
                    Some(b) if b > 0.0 && b.is_finite() => {}
                    Some(b) => {
                        return fail(format!("model.field_strength must be positive, got {b}"));
                    }
                    None => return fail("spin model requires model.field_strength".into()),
                }
                if m.dimension.is_some() || m.n_max.is_some() {
                    return fail("model.dimension/n_max do not apply to the spin model".into());
                }
            }
            ModelKind::Harmonic => {
                if !matches!(m.dimension, Some(1) | Some(3)) {
                    return fail("harmonic model requires model.dimension of 1 or 3".into());
                }
                if m.n_max.is_none() {
                    return fail("harmonic model requires model.n_max".into());
                }
                if m.field_strength.is_some() || m.position.is_some() {
                    return fail(
                        "model.field_strength/position do not apply to oscillator models".into(),
                    );
                }
            }
            ModelKind::Quartic => {
                if !matches!(m.dimension, None | Some(1)) {
                    return fail("quartic model is one-dimensional".into());
                }
                if m.n_max.is_none() {
                    return fail("quartic model requires model.n_max".into());
                }
                if m.field_strength.is_some() || m.position.is_some() {
                    return fail(
                        "model.field_strength/position do not apply to oscillator models".into(),
                    );
                }
            }
        }
        let q = &self.quadrature;
        for (name, v) in [
            ("quadrature.sphere_order", q.sphere_order),
            ("quadrature.collapse_nodes", q.collapse_nodes),
            ("quadrature.min_radial_panels", q.min_radial_panels),
            ("quadrature.radial_refine", q.radial_refine),
            ("quadrature.rate_sphere_order", q.rate_sphere_order),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(q.r_max_factor > 0.0 && q.r_max_factor <= 8.0) {
            return fail(format!(
                "quadrature.r_max_factor must lie in (0, 8], got {}",
                q.r_max_factor
            ));
        }
        let f = &self.fock;
        if f.n_max > 2 {
            return fail(format!("fock.n_max must be ≤ 2, got {}", f.n_max));
        }
        if f.radial_panels == 0 || f.sphere_order < 2 {
            return fail("fock mode grid needs radial_panels ≥ 1 and sphere_order ≥ 2".into());
        }
        if f.dim_cap == 0 {
            return fail("fock.dim_cap must be positive".into());
        }
        if !(f.prop_tol > 0.0 && f.prop_tol < 1.0) {
            return fail(format!("fock.prop_tol must lie in (0, 1), got {}", f.prop_tol));
        }
        let e = &self.experiment;
        if e.g_grid.is_empty() || e.g_grid.iter().any(|&g| g < 0.0 || !g.is_finite()) {
            return fail("experiment.g_grid must be nonempty and nonnegative".into());
        }
        if e.t_grid.is_empty()
            || e.t_grid.iter().any(|&t| !t.is_finite() || t < 0.0)
            || e.t_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return fail("experiment.t_grid must be ascending and nonnegative".into());
        }
        for (name, grid) in [
            ("experiment.convergence_t_grid", &e.convergence_t_grid),
            ("experiment.kernel_s_grid", &e.kernel_s_grid),
        ] {
            if grid.is_empty()
                || grid.iter().any(|&t| !(t > 0.0) || !t.is_finite())
                || grid.windows(2).any(|w| w[1] <= w[0])
            {
                return fail(format!("{name} must be ascending and positive"));
            }
        }
        if !(e.fd_step > 0.0 && e.fd_step.is_finite()) {
            return fail(format!("experiment.fd_step must be positive, got {}", e.fd_step));
        }
        if e.ops.is_empty() {
            return fail("experiment.ops must name at least one operation".into());
        }
        if self.output.directory.is_empty() {
            return fail("output.directory must be set".into());
        }
        if self.output.formats.is_empty() {
            return fail("output.formats must name at least one format".into());
        }
        Ok(())
    }

    /// Builds the matter model this configuration describes.
    pub fn build_model(&self) -> lindqed::Result<MatterModel> {
        let cutoff = CutoffFn::new(self.model.cutoff.kind, self.model.cutoff.scale)?;
        match self.model.kind {
            ModelKind::Spin => build_spin_model(
                self.model.field_strength.expect("validated"),
                self.model.position.unwrap_or([0.0; 3]),
                cutoff,
            ),
            ModelKind::Harmonic => build_harmonic_model(
                self.model.dimension.expect("validated"),
                self.model.n_max.expect("validated"),
                cutoff,
            ),
            ModelKind::Quartic => {
                build_quartic_model(1, self.model.n_max.expect("validated"), cutoff)
            }
        }
    }

    /// Generator-assembly quadrature settings.
    pub fn lquad(&self) -> LQuad {
        LQuad {
            sphere_order: self.quadrature.sphere_order,
            collapse_nodes: self.quadrature.collapse_nodes,
            min_radial_panels: self.quadrature.min_radial_panels,
            radial_refine: self.quadrature.radial_refine,
        }
    }

    /// Photon-mode grid settings.
    pub fn mode_spec(&self) -> lindqed::fock::ModeSpec {
        lindqed::fock::ModeSpec {
            radial_panels: self.fock.radial_panels,
            sphere_order: self.fock.sphere_order,
            r_max_factor: self.quadrature.r_max_factor,
        }
    }

    pub fn wants(&self, fmt: OutFormat) -> bool {
        self.output.formats.contains(&fmt)
    }
}
