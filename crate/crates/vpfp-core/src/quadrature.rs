//! Gaussian quadrature rules.
//!
//! * Gauss–Legendre on `[-1, 1]` (Newton iteration on the three-term
//!   recurrence), with affine mapping helpers and composite panels.
//! * Gauss–Hermite for the *probabilists'* weight: nodes/weights such that
//!   `sum w_i f(x_i) ≈ E[f(Z)]`, `Z ~ N(0,1)` (Golub–Welsch).

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an interpolatory rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Apply the rule to `f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True for an empty rule.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "Gauss–Legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Rule {
    let base = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    Rule {
        nodes: base.nodes.iter().map(|x| c + h * x).collect(),
        weights: base.weights.iter().map(|w| w * h).collect(),
    }
}

/// Composite Gauss–Legendre: `n` nodes on each panel between consecutive breakpoints.
pub fn composite_gauss_legendre(breaks: &[f64], n: usize) -> Rule {
    let base = gauss_legendre(n);
    let mut nodes = Vec::with_capacity(n * breaks.len());
    let mut weights = Vec::with_capacity(n * breaks.len());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = 0.5 * (b - a);
        let c = 0.5 * (b + a);
        for (x, wt) in base.nodes.iter().zip(&base.weights) {
            nodes.push(c + h * x);
            weights.push(wt * h);
        }
    }
    Rule { nodes, weights }
}

/// `n`-point probabilists' Gauss–Hermite rule (`E[f(Z)]`, `Z ~ N(0,1)`).
pub fn gauss_hermite_prob(n: usize) -> Rule {
    assert!(n >= 1, "Gauss–Hermite needs at least one node");
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Geometric grid of `n` points from `a` to `b` inclusive (`0 < a < b`).
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Uniform grid of `n` points from `a` to `b` inclusive.
pub fn lin_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
