//! Matter-side definitions: confining potentials, ultraviolet cutoffs,
//! eigenbases of the matter Hamiltonian and Sobolev diagnostic norms.
//!
//! Three concrete models are provided:
//!
//! * a harmonic oscillator `-Δ + |x|²` in dimension 1 or 3, with exact
//!   Hermite-product eigenfunctions and eigenvalues;
//! * a 1D quartic oscillator `-d²/dx² + x⁴`, diagonalized by Rayleigh-Ritz
//!   in a Hermite basis with a mandatory basis-doubling convergence check;
//! * a spin-1/2 in a constant magnetic field `(0,0,B)` with Hamiltonian
//!   `B σ₃` and no spatial degrees of freedom.
//!
//! One-dimensional electron models are embedded in three-dimensional
//! photon space by letting the coupling phase depend on the position
//! `(x, 0, 0)` only; derivatives along the other two axes vanish on the
//! basis. The photon momentum integral stays three-dimensional.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::quadrature::gauss_hermite_cached;
use crate::{C64, Error, Result};

/// Hard cap on matter basis sizes; everything downstream is dense N×N.
pub const MAX_BASIS: usize = 64;

/// Relative tolerance for Rayleigh-Ritz eigenvalue convergence under
/// basis doubling.
pub const EIGEN_DOUBLING_TOL: f64 = 1e-8;

/// Relative tolerance for Gauss-Hermite overlap convergence under node
/// doubling.
pub const OVERLAP_DOUBLING_TOL: f64 = 1e-9;

/// Ultraviolet cutoff family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// φ(r) = exp(-r²/(2 scale²)); nonzero at the origin.
    Gauss,
    /// φ(r) = (r/scale) exp(-r²/(2 scale²)); vanishes at the origin,
    /// which improves the decay rates of the finite-time generator.
    GaussVanishing,
}

/// Smooth radial ultraviolet cutoff φ.
#[derive(Debug, Clone, Copy)]
pub struct CutoffFn {
    pub kind: CutoffKind,
    pub scale: f64,
}

impl CutoffFn {
    pub fn new(kind: CutoffKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff scale must be positive, got {scale}"
            )));
        }
        Ok(Self { kind, scale })
    }

    pub fn gauss(scale: f64) -> Result<Self> {
        Self::new(CutoffKind::Gauss, scale)
    }

    pub fn gauss_vanishing(scale: f64) -> Result<Self> {
        Self::new(CutoffKind::GaussVanishing, scale)
    }

    /// φ(r).
    pub fn eval(&self, r: f64) -> f64 {
        let u = r / self.scale;
        let gauss = (-0.5 * u * u).exp();
        match self.kind {
            CutoffKind::Gauss => gauss,
            CutoffKind::GaussVanishing => u * gauss,
        }
    }

    /// Radius beyond which the k-integrands are negligible: φ(r)² there
    /// is below e^{-64} ≈ 1.6e-28 of its peak.
    pub fn support_radius(&self) -> f64 {
        8.0 * self.scale
    }

    /// ∫_{R³} φ(|k|)² dk in closed form; reference value for mode-set
    /// weight checks.
    pub fn integral_phi_sq_dk(&self) -> f64 {
        let s3 = self.scale.powi(3);
        let pi = std::f64::consts::PI;
        match self.kind {
            // 4π ∫ r² e^{-r²/s²} dr = π^{3/2} s³
            CutoffKind::Gauss => pi.powf(1.5) * s3,
            // 4π ∫ (r/s)² r² e^{-r²/s²} dr = (3/2) π^{3/2} s³
            CutoffKind::GaussVanishing => 1.5 * pi.powf(1.5) * s3,
        }
    }

    /// Stable identifier used in serialized rate-matrix metadata.
    pub fn id(&self) -> String {
        let kind = match self.kind {
            CutoffKind::Gauss => "gauss",
            CutoffKind::GaussVanishing => "gauss_vanishing",
        };
        format!("{kind}(scale={})", self.scale)
    }
}

/// Confining-potential family for the electron models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Harmonic,
    Quartic,
}

/// Polynomial confining potential V with the growth data it certifies:
/// V(x) ≥ γ |x|^M.
#[derive(Debug, Clone)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Growth exponent M in V(x) ≥ γ |x|^M.
    pub growth_exponent: f64,
    /// Ellipticity constant γ.
    pub ellipticity: f64,
    /// V(x) = Σ_p coeffs[p] |x|^p.
    pub coeffs: Vec<f64>,
}

impl Potential {
    pub fn harmonic() -> Self {
        Self {
            kind: PotentialKind::Harmonic,
            growth_exponent: 2.0,
            ellipticity: 1.0,
            coeffs: vec![0.0, 0.0, 1.0],
        }
    }

    pub fn quartic() -> Self {
        Self {
            kind: PotentialKind::Quartic,
            growth_exponent: 4.0,
            ellipticity: 1.0,
            coeffs: vec![0.0, 0.0, 0.0, 0.0, 1.0],
        }
    }

    /// V at radius |x| = r.
    pub fn eval(&self, r: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * r + c;
        }
        acc
    }

    /// Checks V(x) ≥ γ|x|^M and V(x) ≥ 0 on sampled radii.
    pub fn growth_holds_on(&self, radii: impl IntoIterator<Item = f64>) -> bool {
        radii.into_iter().all(|r| {
            let v = self.eval(r);
            v >= 0.0 && v + 1e-12 >= self.ellipticity * r.abs().powf(self.growth_exponent)
        })
    }
}

/// Spin parameters: field strength B in H_sp = B σ₃ and the fixed
/// position x₀ at which the magnetic coupling field is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct SpinParams {
    pub field_strength: f64,
    pub x0: [f64; 3],
}

/// Eigenbasis representation.
#[derive(Debug, Clone)]
pub enum BasisRep {
    /// Products of 1D Hermite functions; entry j holds the per-axis
    /// levels of eigenfunction j (axes beyond the model dimension are 0).
    HermiteProduct { indices: Vec<[usize; 3]> },
    /// 1D eigenfunctions expanded over Hermite functions: u_j = Σ_n
    /// coeffs[(n, j)] h_n. Used by the quartic model.
    HermiteExpansion { coeffs: DMatrix<f64> },
    /// Two-level spin basis: state 0 = σ₃ eigenvector with eigenvalue -1
    /// (energy -B), state 1 = eigenvalue +1 (energy +B).
    SpinHalf,
}

/// Immutable matter model: eigenvalues, eigenbasis, cutoff and the
/// diagnostic Sobolev shift. All operations are pure; the struct is safe
/// to share across threads.
#[derive(Debug, Clone)]
pub struct MatterModel {
    /// Spatial dimension of the electron problem (1 or 3); 0 for the
    /// spin-only model.
    pub dimension: usize,
    /// Nondecreasing eigenvalues of H_el (+ H_sp for the spin model).
    pub eigenvalues: Vec<f64>,
    pub basis: BasisRep,
    pub spin: Option<SpinParams>,
    pub cutoff: CutoffFn,
    /// Shift C with C + μ₀ > 0 in the spectral Sobolev weights (C+μ)^m.
    pub sobolev_shift: f64,
    pub potential: Option<Potential>,
    /// Gauss-Hermite node count frozen at build time by node doubling;
    /// coupling-matrix quadrature reuses it without re-validating.
    pub hermite_nodes: usize,
}

impl MatterModel {
    /// Basis size N.
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Bohr frequency μ_a - μ_b.
    pub fn bohr(&self, a: usize, b: usize) -> f64 {
        self.eigenvalues[a] - self.eigenvalues[b]
    }

    /// Largest 1D Hermite level appearing in the basis representation
    /// (0 for the spin model).
    pub fn max_hermite_level(&self) -> usize {
        match &self.basis {
            BasisRep::HermiteProduct { indices } => indices
                .iter()
                .flat_map(|idx| idx.iter().copied())
                .max()
                .unwrap_or(0),
            BasisRep::HermiteExpansion { coeffs } => coeffs.nrows().saturating_sub(1),
            BasisRep::SpinHalf => 0,
        }
    }

    /// Pauli matrix σ_j (j = 1,2,3) expressed in the stored spin basis
    /// (state 0 = down, state 1 = up).
    pub fn pauli_in_basis(j: usize) -> DMatrix<C64> {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match j {
            1 => DMatrix::from_row_slice(2, 2, &[o, one, one, o]),
            2 => DMatrix::from_row_slice(2, 2, &[o, i, -i, o]),
            3 => DMatrix::from_row_slice(2, 2, &[-one, o, o, one]),
            _ => panic!("pauli index must be 1, 2 or 3"),
        }
    }
}

/// Evaluates the normalized Hermite functions h_0..h_max at x
/// (h_n is the n-th eigenfunction of -d²/dx² + x², eigenvalue 2n+1).
pub fn hermite_functions(max_level: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(max_level + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    h.push(h0);
    if max_level >= 1 {
        h.push(std::f64::consts::SQRT_2 * x * h0);
    }
    for n in 1..max_level {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Same recurrence without the Gaussian factor: h_n(x) e^{x²/2}.
/// This is the natural integrand basis for Gauss-Hermite quadrature,
/// whose weight already carries e^{-x²}.
pub fn hermite_polynomials_normalized(max_level: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(max_level + 1);
    h.push(std::f64::consts::PI.powf(-0.25));
    if max_level >= 1 {
        h.push(std::f64::consts::SQRT_2 * x * h[0]);
    }
    for n in 1..max_level {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Builds the harmonic model -Δ + |x|² in dimension `d` with all
/// Hermite-product states of total degree ≤ `n_max`.
///
/// Eigenvalues are the exact analytic values (2Σnᵢ + d), sorted
/// nondecreasing with ties kept in lexicographic enumeration order so
/// that degenerate multiplets appear contiguously and reproducibly.
pub fn build_harmonic_model(d: usize, n_max: usize, cutoff: CutoffFn) -> Result<MatterModel> {
    if d != 1 && d != 3 {
        return Err(Error::InvalidParameter(format!(
            "harmonic model dimension must be 1 or 3, got {d}"
        )));
    }
    let mut states: Vec<[usize; 3]> = Vec::new();
    if d == 1 {
        for n in 0..=n_max {
            states.push([n, 0, 0]);
        }
    } else {
        for n1 in 0..=n_max {
            for n2 in 0..=(n_max - n1) {
                for n3 in 0..=(n_max - n1 - n2) {
                    states.push([n1, n2, n3]);
                }
            }
        }
    }
    if states.len() > MAX_BASIS {
        return Err(Error::ResourceGuard {
            what: "harmonic basis size",
            got: states.len(),
            cap: MAX_BASIS,
        });
    }
    let energy = |idx: &[usize; 3]| (2 * (idx[0] + idx[1] + idx[2]) + d) as f64;
    states.sort_by(|a, b| {
        energy(a)
            .total_cmp(&energy(b))
            .then_with(|| a.cmp(b))
    });
    let eigenvalues: Vec<f64> = states.iter().map(energy).collect();
    let max_level = states
        .iter()
        .flat_map(|s| s.iter().copied())
        .max()
        .unwrap_or(0);
    let hermite_nodes = validated_hermite_nodes(max_level, cutoff.support_radius())?;
    Ok(MatterModel {
        dimension: d,
        eigenvalues,
        basis: BasisRep::HermiteProduct { indices: states },
        spin: None,
        cutoff,
        sobolev_shift: 1.0,
        potential: Some(Potential::harmonic()),
        hermite_nodes,
    })
}

/// Builds the 1D quartic model -d²/dx² + x⁴ by Rayleigh-Ritz in a
/// Hermite basis, returning the lowest `n_basis` eigenpairs.
///
/// The Ritz basis starts at max(4·n_basis, 32) Hermite levels and is
/// doubled until the requested eigenvalues are stable to relative
/// 1e-8; non-convergence is an explicit error, never silently accepted.
pub fn build_quartic_model(d: usize, n_basis: usize, cutoff: CutoffFn) -> Result<MatterModel> {
    if d != 1 {
        return Err(Error::InvalidParameter(format!(
            "quartic model is 1D only, got d = {d}"
        )));
    }
    if n_basis == 0 {
        return Err(Error::InvalidParameter("quartic model: n_basis = 0".into()));
    }
    if n_basis > MAX_BASIS {
        return Err(Error::ResourceGuard {
            what: "quartic basis size",
            got: n_basis,
            cap: MAX_BASIS,
        });
    }
    const K_CAP: usize = 1024;
    let mut k = (4 * n_basis).max(32);
    let (mut vals, mut vecs) = quartic_ritz(k, n_basis);
    let mut converged = false;
    while !converged {
        let k2 = 2 * k;
        if k2 > K_CAP {
            return Err(Error::EigenNotConverged {
                achieved: f64::NAN,
                required: EIGEN_DOUBLING_TOL,
                context: format!("quartic Rayleigh-Ritz basis cap {K_CAP} reached"),
            });
        }
        let (vals2, vecs2) = quartic_ritz(k2, n_basis);
        let worst = vals
            .iter()
            .zip(&vals2)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0f64, f64::max);
        converged = worst <= EIGEN_DOUBLING_TOL;
        k = k2;
        vals = vals2;
        vecs = vecs2;
    }
    let max_level = vecs.nrows() - 1;
    let hermite_nodes = validated_hermite_nodes(max_level, cutoff.support_radius())?;
    Ok(MatterModel {
        dimension: 1,
        eigenvalues: vals,
        basis: BasisRep::HermiteExpansion { coeffs: vecs },
        spin: None,
        cutoff,
        sobolev_shift: 1.0,
        potential: Some(Potential::quartic()),
        hermite_nodes,
    })
}

/// Rayleigh-Ritz for -d²/dx² + x⁴ in `k` Hermite levels; returns the
/// lowest `n_basis` (eigenvalues, coefficient matrix k×n_basis).
fn quartic_ritz(k: usize, n_basis: usize) -> (Vec<f64>, DMatrix<f64>) {
    // Build x and p in a padded basis so the truncated products x⁴ and
    // p² are exact on the leading k×k block.
    let pad = k + 8;
    let mut x = DMatrix::<f64>::zeros(pad, pad);
    for n in 0..pad - 1 {
        // x = (a + a†)/√2: ⟨n|x|n+1⟩ = √((n+1)/2)
        let v = ((n as f64 + 1.0) / 2.0).sqrt();
        x[(n, n + 1)] = v;
        x[(n + 1, n)] = v;
    }
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    // p² = -d²/dx²: in ladder form (2a†a + 1 - a² - a†²)/2, equal to
    // 2·diag(n + 1/2) - x² by the oscillator identity p² = (2n+1) - x².
    let mut h = DMatrix::<f64>::zeros(pad, pad);
    for n in 0..pad {
        h[(n, n)] = 2.0 * n as f64 + 1.0;
    }
    h -= &x2;
    h += &x4;
    let hk = h.view((0, 0), (k, k)).into_owned();
    let hk = (&hk + hk.transpose()) * 0.5;
    let eig = SymmetricEigen::new(hk);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = order[..n_basis]
        .iter()
        .map(|&i| eig.eigenvalues[i])
        .collect();
    let mut vecs = DMatrix::<f64>::zeros(k, n_basis);
    for (col, &i) in order[..n_basis].iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        // deterministic sign: largest-magnitude component positive
        let lead = v
            .iter()
            .cloned()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for r in 0..k {
            vecs[(r, col)] = sign * v[r];
        }
    }
    (vals, vecs)
}

/// Builds the two-level spin model with H_sp = B σ₃.
///
/// State ordering follows the nondecreasing spectrum: state 0 is spin
/// down (energy -B), state 1 is spin up (energy +B). The only downward
/// transition sphere has radius μ₁ - μ₀ = 2B.
pub fn build_spin_model(b: f64, x0: [f64; 3], cutoff: CutoffFn) -> Result<MatterModel> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "spin field strength must be positive (transition sphere |k| = 2B would be empty), got {b}"
        )));
    }
    Ok(MatterModel {
        dimension: 0,
        eigenvalues: vec![-b, b],
        basis: BasisRep::SpinHalf,
        spin: Some(SpinParams {
            field_strength: b,
            x0,
        }),
        cutoff,
        sobolev_shift: 1.0,
        potential: None,
        hermite_nodes: 0,
    })
}

/// Spectral Sobolev norm ‖(C+H)^{m/2} u‖ of a coefficient vector in the
/// eigenbasis: (Σ_j (C+μ_j)^m |c_j|²)^{1/2}.
pub fn sobolev_norm(model: &MatterModel, coeffs: &[C64], m: u32) -> Result<f64> {
    if coeffs.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            got: coeffs.len(),
        });
    }
    let c = model.sobolev_shift;
    let sum: f64 = coeffs
        .iter()
        .zip(&model.eigenvalues)
        .map(|(a, &mu)| (c + mu).powi(m as i32) * a.norm_sqr())
        .sum();
    Ok(sum.sqrt())
}

/// Determines a Gauss-Hermite node count for overlap integrals
/// ∫ h_a(x) e^{-iκx} h_b(x) dx with levels ≤ `max_level` and |κ| ≤
/// `kappa_max`, by doubling until the worst matrix entry is stable to
/// relative 1e-9.
pub fn validated_hermite_nodes(max_level: usize, kappa_max: f64) -> Result<usize> {
    let mut n = 32usize.max(2 * (max_level + 2));
    // Reference at the worst case: largest |κ| oscillates fastest.
    let mut prev = raw_overlap_matrix(max_level + 1, kappa_max, n)?;
    loop {
        let next_n = 2 * n;
        if next_n > 4096 {
            return Err(Error::QuadratureNotConverged {
                achieved: f64::NAN,
                required: OVERLAP_DOUBLING_TOL,
                context: "Gauss-Hermite overlap node cap reached".into(),
            });
        }
        let cur = raw_overlap_matrix(max_level + 1, kappa_max, next_n)?;
        // the entries are inner products of unit vectors, so |G_ab| ≤ 1
        // and an absolute criterion is a relative one at the natural scale
        let diff = (&cur - &prev)
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        if diff <= OVERLAP_DOUBLING_TOL {
            return Ok(next_n);
        }
        n = next_n;
        prev = cur;
    }
}

/// G(κ)_{ab} = ∫ h_a(x) e^{-iκx} h_b(x) dx for levels 0..=max_level,
/// by Gauss-Hermite quadrature with `nodes` nodes.
pub fn raw_overlap_matrix(max_level: usize, kappa: f64, nodes: usize) -> Result<DMatrix<C64>> {
    let rule = gauss_hermite_cached(nodes)?;
    let l = max_level + 1;
    let mut g = DMatrix::<C64>::zeros(l, l);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let h = hermite_polynomials_normalized(max_level, x);
        let phase = C64::from_polar(w, -kappa * x);
        for a in 0..l {
            for b in 0..=a {
                let v = phase * (h[a] * h[b]);
                g[(a, b)] += v;
            }
        }
    }
    // fill the upper triangle: the integrand is symmetric in (a,b)
    for a in 0..l {
        for b in (a + 1)..l {
            g[(a, b)] = g[(b, a)];
        }
    }
    Ok(g)
}
