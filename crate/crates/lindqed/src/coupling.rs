//! Matter-photon coupling fields and their matrix blocks in the matter
//! eigenbasis.
//!
//! The interaction is linear in photon creation/annihilation with a
//! ℂ³-valued coupling operator E(k) acting on the matter space:
//!
//! * electron part: E(k)f = Σ_j A_{j,x}(k) D_j f with D_j = -i ∂_j and
//!   A_{j,x}(k) = φ(|k|) |k|^{-1/2} e^{-ik·x} (e_j - (e_j·k̂)k̂).
//!   The multiplication by e^{-ik·x} acts after the derivative.
//! * spin part: Σ_j B_{j,x₀}(k) σ_j with
//!   B_{j,x}(k) = i φ(|k|) |k|^{1/2} (2π)^{-3/2} e^{-ik·x} (k̂ × e_j).
//!
//! Both fields are transverse: k·A = k·B = 0 pointwise, hence
//! Σ_α k_α E_α(k) = 0 for every block produced here.
//!
//! A [`CouplingBlock`] stores the three component matrices
//! `e_mat[α][(a,b)] = ⟨u_a, E_{α+1}(k) u_b⟩` (α = 0,1,2 for the x,y,z
//! components, rows are bras). The block of the adjoint field E*(k) is
//! the component-wise conjugate transpose; no further symmetry holds
//! entry-wise.


use crate::model::{BasisRep, CutoffFn, MatterModel, raw_overlap_matrix};
use crate::quadrature::gauss_legendre;
use crate::{C64, CMatrix, Error, Result};

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn unit_basis(j: usize) -> Result<[f64; 3]> {
    match j {
        1 => Ok([1.0, 0.0, 0.0]),
        2 => Ok([0.0, 1.0, 0.0]),
        3 => Ok([0.0, 0.0, 1.0]),
        _ => Err(Error::InvalidParameter(format!(
            "coupling direction index must be 1, 2 or 3, got {j}"
        ))),
    }
}

fn require_nonzero_k(k: [f64; 3]) -> Result<f64> {
    let r = norm3(k);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::InvalidParameter(
            "coupling fields are undefined at k = 0 (the |k|^{±1/2} factor is singular there)"
                .into(),
        ));
    }
    Ok(r)
}

/// Electron coupling field A_{j,x}(k): component α of
/// φ(|k|) |k|^{-1/2} e^{-ik·x} (e_j - (e_j·k̂)k̂). Carries no (2π) factor.
pub fn eval_a(cutoff: &CutoffFn, k: [f64; 3], j: usize, x: [f64; 3]) -> Result<[C64; 3]> {
    let r = require_nonzero_k(k)?;
    let e_j = unit_basis(j)?;
    let khat = [k[0] / r, k[1] / r, k[2] / r];
    let proj = dot(e_j, khat);
    let scalar = C64::from_polar(cutoff.eval(r) / r.sqrt(), -dot(k, x));
    Ok([
        scalar * (e_j[0] - proj * khat[0]),
        scalar * (e_j[1] - proj * khat[1]),
        scalar * (e_j[2] - proj * khat[2]),
    ])
}

/// Spin coupling field B_{j,x}(k): component α of
/// i φ(|k|) |k|^{1/2} (2π)^{-3/2} e^{-ik·x} (k̂ × e_j).
pub fn eval_b(cutoff: &CutoffFn, k: [f64; 3], j: usize, x: [f64; 3]) -> Result<[C64; 3]> {
    let r = require_nonzero_k(k)?;
    let e_j = unit_basis(j)?;
    let khat = [k[0] / r, k[1] / r, k[2] / r];
    let cr = cross(khat, e_j);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mag = cutoff.eval(r) * r.sqrt() * two_pi.powf(-1.5);
    // i e^{-ik·x} in polar form: magnitude 1, phase -k·x + π/2
    let scalar = C64::from_polar(mag, -dot(k, x) + std::f64::consts::FRAC_PI_2);
    Ok([scalar * cr[0], scalar * cr[1], scalar * cr[2]])
}

/// The three component matrices of E(k) in the matter eigenbasis.
#[derive(Debug, Clone)]
pub struct CouplingBlock {
    pub k: [f64; 3],
    /// `e_mat[α][(a,b)] = ⟨u_a, E_{α+1}(k) u_b⟩`.
    pub e_mat: [CMatrix; 3],
}

impl CouplingBlock {
    /// Matter basis size.
    pub fn n(&self) -> usize {
        self.e_mat[0].nrows()
    }

    /// Component α of the adjoint field E*(k): conjugate transpose of
    /// the corresponding component of E(k).
    pub fn adjoint_mat(&self, alpha: usize) -> CMatrix {
        self.e_mat[alpha].adjoint()
    }

    /// √(Σ_α ‖E_α‖_F²), the Hilbert-Schmidt size of the block.
    pub fn frobenius(&self) -> f64 {
        self.e_mat
            .iter()
            .map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// 1D overlap pair at phase frequency κ: G(κ)_{nm} = ⟨h_n, e^{-iκξ} h_m⟩
/// and T(κ)_{nm} = ⟨h_n, e^{-iκξ} (-i d/dξ) h_m⟩ on Hermite levels
/// 0..=max_level. T is obtained from G one level higher through the
/// ladder identity h_m' = (√m h_{m-1} - √(m+1) h_{m+1})/√2.
fn overlap_pair(max_level: usize, kappa: f64, nodes: usize) -> Result<(CMatrix, CMatrix)> {
    let g_ext = raw_overlap_matrix(max_level + 1, kappa, nodes)?;
    let l = max_level + 1;
    let g = g_ext.view((0, 0), (l, l)).into_owned();
    let mut t = CMatrix::zeros(l, l);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for a in 0..l {
        for b in 0..l {
            let down = if b > 0 {
                (b as f64).sqrt() * g_ext[(a, b - 1)]
            } else {
                C64::new(0.0, 0.0)
            };
            let up = ((b + 1) as f64).sqrt() * g_ext[(a, b + 1)];
            t[(a, b)] = C64::new(0.0, -inv_sqrt2) * (down - up);
        }
    }
    Ok((g, t))
}

/// ⟨u_a, e^{-iκξ}(-i d/dξ) u_b⟩ in the eigenbasis of a 1D electron
/// model. This is the full coupling kernel of the 1D-in-3D embedding up
/// to the scalar transverse factor; exposed so the finite-time generator
/// can integrate over the collapsed sphere coordinate directly.
pub fn derivative_overlap_1d(model: &MatterModel, kappa: f64) -> Result<CMatrix> {
    match &model.basis {
        BasisRep::HermiteProduct { indices } if model.dimension == 1 => {
            let max_level = model.max_hermite_level();
            let (_, t_lev) = overlap_pair(max_level, kappa, model.hermite_nodes)?;
            let n = indices.len();
            let mut t = CMatrix::zeros(n, n);
            for (a, ia) in indices.iter().enumerate() {
                for (b, ib) in indices.iter().enumerate() {
                    t[(a, b)] = t_lev[(ia[0], ib[0])];
                }
            }
            Ok(t)
        }
        BasisRep::HermiteExpansion { coeffs } => {
            let max_level = coeffs.nrows() - 1;
            let (_, t_lev) = overlap_pair(max_level, kappa, model.hermite_nodes)?;
            let c = coeffs.map(|x| C64::new(x, 0.0));
            Ok(c.transpose() * t_lev * c)
        }
        _ => Err(Error::InvalidParameter(
            "derivative_overlap_1d requires a 1D electron model".into(),
        )),
    }
}

/// Builds the coupling block ⟨u_a, E_α(k) u_b⟩ for the model's basis.
///
/// * spin model: E_α = Σ_j [B_{j,x₀}(k)]_α σ_j;
/// * 1D electron model: only the first derivative acts, and the phase
///   reduces to e^{-ik₁ξ}, so E_α = (δ_{α1} - k̂_α k̂_1) φ(r)/√r · T(k₁);
/// * 3D harmonic model: per-axis factorization of ⟨u_a, e^{-ik·x} D_j u_b⟩
///   into 1D Hermite overlaps.
pub fn coupling_block(model: &MatterModel, k: [f64; 3]) -> Result<CouplingBlock> {
    let r = require_nonzero_k(k)?;
    let khat = [k[0] / r, k[1] / r, k[2] / r];
    let n = model.n();

    match &model.basis {
        BasisRep::SpinHalf => {
            let spin = model.spin.as_ref().ok_or_else(|| {
                Error::Internal("spin basis without spin parameters".into())
            })?;
            let mut e_mat = [
                CMatrix::zeros(n, n),
                CMatrix::zeros(n, n),
                CMatrix::zeros(n, n),
            ];
            for j in 1..=3 {
                let b_field = eval_b(&model.cutoff, k, j, spin.x0)?;
                let sigma = MatterModel::pauli_in_basis(j);
                for (alpha, e_m) in e_mat.iter_mut().enumerate() {
                    *e_m += sigma.map(|z| z * b_field[alpha]);
                }
            }
            Ok(CouplingBlock { k, e_mat })
        }
        BasisRep::HermiteProduct { indices } if model.dimension == 3 => {
            let max_level = model.max_hermite_level();
            // per-axis overlap pairs at the axis frequencies κ_i = k_i
            let pairs: Vec<(CMatrix, CMatrix)> = (0..3)
                .map(|i| overlap_pair(max_level, k[i], model.hermite_nodes))
                .collect::<Result<_>>()?;
            let scal = model.cutoff.eval(r) / r.sqrt();
            let mut e_mat = [
                CMatrix::zeros(n, n),
                CMatrix::zeros(n, n),
                CMatrix::zeros(n, n),
            ];
            for j in 0..3 {
                // M_j[(a,b)] = ⟨u_a, e^{-ik·x} D_{j+1} u_b⟩, factorized over axes
                let mut mj = CMatrix::zeros(n, n);
                for (a, ia) in indices.iter().enumerate() {
                    for (b, ib) in indices.iter().enumerate() {
                        let mut v = C64::new(scal, 0.0);
                        for (i, pair) in pairs.iter().enumerate() {
                            let f = if i == j { &pair.1 } else { &pair.0 };
                            v *= f[(ia[i], ib[i])];
                        }
                        mj[(a, b)] = v;
                    }
                }
                for (alpha, e_m) in e_mat.iter_mut().enumerate() {
                    let p = (if alpha == j { 1.0 } else { 0.0 }) - khat[alpha] * khat[j];
                    if p != 0.0 {
                        *e_m += mj.map(|z| z * p);
                    }
                }
            }
            Ok(CouplingBlock { k, e_mat })
        }
        BasisRep::HermiteProduct { .. } | BasisRep::HermiteExpansion { .. } => {
            // 1D electron embedded along the first axis
            let t = derivative_overlap_1d(model, k[0])?;
            let scal = model.cutoff.eval(r) / r.sqrt();
            let mut e_mat = [
                CMatrix::zeros(n, n),
                CMatrix::zeros(n, n),
                CMatrix::zeros(n, n),
            ];
            for (alpha, e_m) in e_mat.iter_mut().enumerate() {
                let p = (if alpha == 0 { 1.0 } else { 0.0 }) - khat[alpha] * khat[0];
                if p != 0.0 {
                    *e_m = t.map(|z| z * (scal * p));
                }
            }
            Ok(CouplingBlock { k, e_mat })
        }
    }
}

/// Interaction-picture block E^{free}(k,t): entries of E(k) dressed with
/// the free matter phases, [E^{free}]_{ab} = e^{it(μ_a-μ_b)} [E]_{ab}.
/// Unit phases, so every component keeps its Frobenius norm, and
/// evolving by t then s equals evolving by t+s.
pub fn free_evolved_block(model: &MatterModel, block: &CouplingBlock, t: f64) -> CouplingBlock {
    let n = block.n();
    let phases: Vec<C64> = model
        .eigenvalues
        .iter()
        .map(|&mu| C64::from_polar(1.0, t * mu))
        .collect();
    let mut e_mat = block.e_mat.clone();
    for e_m in e_mat.iter_mut() {
        for a in 0..n {
            for b in 0..n {
                e_m[(a, b)] *= phases[a] * phases[b].conj();
            }
        }
    }
    CouplingBlock { k: block.k, e_mat }
}

/// Product quadrature on the sphere |k| = radius: Gauss-Legendre in
/// cos θ (`order` nodes) times the trapezoid rule in azimuth (2·`order`
/// nodes, exact for harmonics e^{imφ} with |m| < 2·order). Weights carry
/// the radius² surface factor and sum to 4π·radius².
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub radius: f64,
    /// Unit direction of each node.
    pub directions: Vec<[f64; 3]>,
    /// Surface-measure weights on the sphere of the given radius.
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Nodes as momentum points k = radius·ω with their weights.
    pub fn points(&self) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(move |(d, &w)| {
                (
                    [self.radius * d[0], self.radius * d[1], self.radius * d[2]],
                    w,
                )
            })
    }
}

pub fn build_sphere_quadrature(radius: f64, order: usize) -> Result<SphereQuadrature> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    if order == 0 {
        return Err(Error::InvalidParameter("sphere quadrature order 0".into()));
    }
    let polar = gauss_legendre(order)?;
    let n_az = 2 * order;
    let two_pi = 2.0 * std::f64::consts::PI;
    let az_w = two_pi / n_az as f64;
    let surf = radius * radius;
    let mut directions = Vec::with_capacity(order * n_az);
    let mut weights = Vec::with_capacity(order * n_az);
    for (&c, &wc) in polar.nodes.iter().zip(&polar.weights) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for m in 0..n_az {
            let phi = az_w * m as f64;
            directions.push([s * phi.cos(), s * phi.sin(), c]);
            weights.push(wc * az_w * surf);
        }
    }
    Ok(SphereQuadrature {
        radius,
        directions,
        weights,
    })
}
