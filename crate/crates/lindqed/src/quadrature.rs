//! One-dimensional quadrature rules shared by the coupling, lindblad and
//! fock modules.
//!
//! Gauss nodes are generated by the Golub-Welsch algorithm: eigenvalues
//! of the symmetric tridiagonal Jacobi matrix of the orthogonal-polynomial
//! recurrence. Weights are the Christoffel numbers 1/Σ_k p̃_k(x_i)²
//! evaluated through the stable three-term recurrence rather than from
//! eigenvector components, whose absolute noise floor (~machine-eps²)
//! would otherwise swamp the exponentially small edge weights of the
//! Hermite rule; weights beyond the f64 exponent range underflow to an
//! exact zero instead of to noise. This keeps the library free of
//! tabulated constants and accurate for the orders used here (n ≤ 4096).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Nodes and weights of a one-dimensional quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    /// Applies the rule to `f`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodes of a symmetric-recurrence Gauss rule (zero diagonal) from the
/// eigenvalues of the tridiagonal Jacobi matrix, paired with Christoffel
/// weights w_i = μ₀ / Σ_{k<n} p̃_k(x_i)², where the orthonormal
/// polynomials p̃_k are evaluated by the recurrence
/// b_{k+1} p̃_{k+1} = x p̃_k − b_k p̃_{k−1}. Nodes come out sorted.
fn golub_welsch(offdiag: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = offdiag.len() + 1;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for (j, &b) in offdiag.iter().enumerate() {
        jac[(j, j + 1)] = b;
        jac[(j + 1, j)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = (0..n).map(|i| eig.eigenvalues[i]).collect();
    nodes.sort_by(f64::total_cmp);
    let weights = nodes.iter().map(|&x| christoffel(x, offdiag, mu0)).collect();
    (nodes, weights)
}

/// Christoffel number at node x: exact Gauss weight for the measure with
/// zeroth moment μ₀. Once the partial sum leaves the f64 range the true
/// weight is far below the subnormal floor, so it is returned as 0.
fn christoffel(x: f64, offdiag: &[f64], mu0: f64) -> f64 {
    // p_k·√μ₀ by the recurrence b_{k+1} p_{k+1} = x p_k − b_k p_{k−1}
    let mut pm1 = 0.0f64;
    let mut pk = 1.0f64;
    let mut b_prev = 0.0f64;
    let mut sum = 1.0f64;
    for &b in offdiag {
        let next = (x * pk - b_prev * pm1) / b;
        pm1 = pk;
        pk = next;
        b_prev = b;
        sum += pk * pk;
        if !sum.is_finite() {
            return 0.0;
        }
    }
    mu0 / sum
}

/// Gauss-Legendre rule with `n` nodes on [-1, 1]. Exact for polynomials
/// of degree ≤ 2n-1.
pub fn gauss_legendre(n: usize) -> Result<Rule1d> {
    if n == 0 {
        return Err(Error::InvalidParameter("gauss_legendre: n = 0".into()));
    }
    if n == 1 {
        return Ok(Rule1d {
            nodes: vec![0.0],
            weights: vec![2.0],
        });
    }
    let offdiag: Vec<f64> = (1..n)
        .map(|j| {
            let j = j as f64;
            j / (4.0 * j * j - 1.0).sqrt()
        })
        .collect();
    let (nodes, weights) = golub_welsch(&offdiag, 2.0);
    Ok(Rule1d { nodes, weights })
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Result<Rule1d> {
    let base = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok(Rule1d {
        nodes: base.nodes.iter().map(|&x| mid + half * x).collect(),
        weights: base.weights.iter().map(|&w| half * w).collect(),
    })
}

/// Gauss-Hermite rule with `n` nodes: ∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i).
/// Exact for polynomial f of degree ≤ 2n-1.
pub fn gauss_hermite(n: usize) -> Result<Rule1d> {
    if n == 0 {
        return Err(Error::InvalidParameter("gauss_hermite: n = 0".into()));
    }
    if n == 1 {
        return Ok(Rule1d {
            nodes: vec![0.0],
            weights: vec![std::f64::consts::PI.sqrt()],
        });
    }
    let offdiag: Vec<f64> = (1..n).map(|j| (j as f64 / 2.0).sqrt()).collect();
    let (nodes, weights) = golub_welsch(&offdiag, std::f64::consts::PI.sqrt());
    Ok(Rule1d { nodes, weights })
}

/// Composite Gauss-Legendre rule: `panels` equal panels on [a, b] with
/// `nodes_per_panel` Gauss nodes each. Suited to oscillatory integrands
/// when the panel width resolves the local period.
pub fn composite_gauss_legendre(
    a: f64,
    b: f64,
    panels: usize,
    nodes_per_panel: usize,
) -> Result<Rule1d> {
    if !(b > a) {
        return Err(Error::InvalidParameter(format!(
            "composite rule: empty interval [{a}, {b}]"
        )));
    }
    if panels == 0 {
        return Err(Error::InvalidParameter("composite rule: 0 panels".into()));
    }
    let base = gauss_legendre(nodes_per_panel)?;
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * nodes_per_panel);
    let mut weights = Vec::with_capacity(panels * nodes_per_panel);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (&x, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + 0.5 * h * x);
            weights.push(0.5 * h * w);
        }
    }
    Ok(Rule1d { nodes, weights })
}

/// Radial rule for k-integrals over the cutoff support, sized so that a
/// phase factor e^{i t r} is resolved by the panels.
///
/// Panels have width ≤ half the oscillation period 2π/max(|t|, 1) and
/// carry 8 Gauss nodes each; the per-panel error of an 8-point rule on a
/// half period is below 1e-10 relative. `r_max` must cover the cutoff
/// tail (the builders in [`crate::model`] expose a suitable radius).
pub fn radial_rule_for_phase(r_max: f64, t: f64, min_panels: usize) -> Result<Rule1d> {
    const NODES_PER_PANEL: usize = 8;
    let freq = t.abs().max(1.0);
    let half_period = std::f64::consts::PI / freq;
    let needed = (r_max / half_period).ceil() as usize;
    let panels = needed.max(min_panels).max(1);
    composite_gauss_legendre(0.0, r_max, panels, NODES_PER_PANEL)
}

thread_local! {
    static HERMITE_CACHE: std::cell::RefCell<std::collections::HashMap<usize, std::sync::Arc<Rule1d>>> =
        std::cell::RefCell::new(std::collections::HashMap::new());
}

/// Gauss-Hermite rule memoized per thread. Coupling-matrix assembly
/// evaluates the same rule at every photon momentum; recomputing the
/// Golub-Welsch eigendecomposition there would dominate the runtime.
pub fn gauss_hermite_cached(n: usize) -> Result<std::sync::Arc<Rule1d>> {
    HERMITE_CACHE.with(|cell| {
        let mut map = cell.borrow_mut();
        if let Some(rule) = map.get(&n) {
            return Ok(rule.clone());
        }
        let rule = std::sync::Arc::new(gauss_hermite(n)?);
        map.insert(n, rule.clone());
        Ok(rule)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(6).unwrap();
        // degree 11 is exact for a 6-node rule
        let got = rule.integrate(|x| x.powi(10));
        assert_relative_eq!(got, 2.0 / 11.0, max_relative = 1e-13);
        let odd = rule.integrate(|x| x.powi(7));
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn legendre_weights_sum_to_interval_length() {
        for n in [2, 3, 8, 33, 128] {
            let rule = gauss_legendre(n).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 2.0, max_relative = 1e-13);
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(12).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert_relative_eq!(rule.integrate(|_| 1.0), sqrt_pi, max_relative = 1e-13);
        assert_relative_eq!(
            rule.integrate(|x| x * x),
            0.5 * sqrt_pi,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            rule.integrate(|x| x.powi(4)),
            0.75 * sqrt_pi,
            max_relative = 1e-13
        );
    }

    #[test]
    fn hermite_handles_oscillatory_integrand() {
        // ∫ e^{-x²} cos(κx) dx = √π e^{-κ²/4}
        let kappa = 6.0_f64;
        let exact = std::f64::consts::PI.sqrt() * (-kappa * kappa / 4.0).exp();
        let rule = gauss_hermite(96).unwrap();
        let got = rule.integrate(|x| (kappa * x).cos());
        assert_relative_eq!(got, exact, max_relative = 1e-10);
    }

    #[test]
    fn composite_matches_single_panel_on_smooth_integrand() {
        let a = composite_gauss_legendre(0.0, 3.0, 16, 8).unwrap();
        let got = a.integrate(|x| (-x).exp());
        assert_relative_eq!(got, 1.0 - (-3.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn radial_rule_resolves_oscillation() {
        // ∫_0^5 e^{-r²} cos(t r) dr for t = 40 against a reference with
        // doubled panel density.
        let t = 40.0;
        let rule = radial_rule_for_phase(5.0, t, 4).unwrap();
        let dense = composite_gauss_legendre(0.0, 5.0, 2 * rule.len() / 8, 8).unwrap();
        let f = |r: f64| (-r * r).exp() * (t * r).cos();
        let got = rule.integrate(f);
        let reference = dense.integrate(f);
        assert_relative_eq!(got, reference, epsilon = 1e-12);
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_hermite(0).is_err());
        assert!(composite_gauss_legendre(0.0, 1.0, 0, 4).is_err());
    }
}
