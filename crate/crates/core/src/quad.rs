//! Gaussian quadrature rules used by the overlap integrals: Gauss-Legendre
//! on a finite interval for the crystal (z) integral and Gauss-Laguerre with
//! weight `exp(-x)` on `[0, inf)` for the radial integral.
//!
//! Nodes are found by Newton iteration on the orthogonal-polynomial
//! recurrences; rules up to a few hundred nodes stay well inside f64 range.

use alloc::vec::Vec;
#[allow(unused_imports)] // trait needed for float math in no_std builds
use num_traits::Float;

/// Largest supported rule size; Laguerre polynomial values near the top node
/// grow like `exp(x/2)` and leave f64 range not far beyond this.
pub const MAX_NODES: usize = 256;

/// A one-dimensional quadrature rule: paired nodes and weights.
#[derive(Debug, Clone)]
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
}

/// Gauss-Legendre rule on `[-1, 1]`.
///
/// Panics if `n` is zero or exceeds [`MAX_NODES`].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1 && n <= MAX_NODES, "node count out of range");
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d2) = legendre_with_derivative(n, x);
                dp = d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    Rule { nodes, weights }
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Rule {
    let base = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Rule {
        nodes: base.nodes.iter().map(|&t| mid + half * t).collect(),
        weights: base.weights.iter().map(|&w| w * half).collect(),
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut pm1 = 1.0; // P_0
    let mut p = x; // P_1
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * pm1) / (kf + 1.0);
        pm1 = p;
        p = next;
    }
    // (1-x^2) P_n' = n (P_{n-1} - x P_n)
    let d = (n as f64) * (pm1 - x * p) / (1.0 - x * x);
    (p, d)
}

/// Gauss-Laguerre rule for `integral_0^inf f(x) exp(-x) dx`.
///
/// Panics if `n` is zero or exceeds [`MAX_NODES`].
pub fn gauss_laguerre(n: usize) -> Rule {
    assert!(n >= 1 && n <= MAX_NODES, "node count out of range");
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n {
        // classic initial guesses (alpha = 0), marching upward from the
        // previous root
        if i == 0 {
            z = 3.0 / (1.0 + 2.4 * nf);
        } else if i == 1 {
            z += 15.0 / (1.0 + 2.5 * nf);
        } else {
            let ai = (i - 1) as f64;
            z += (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2]);
        }
        for _ in 0..200 {
            let (l, lm1) = laguerre_scaled(n, z);
            // x L_n' = n (L_n - L_{n-1}); the e^{-x/2} scale cancels in L/L'
            let d = (nf) * (l - lm1) / z;
            let dz = l / d;
            z -= dz;
            if dz.abs() < 1e-14 * z.max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        // w_i = x_i / ((n+1)^2 [L_{n+1}(x_i)]^2); with the scaled polynomial
        // Ls = e^{-x/2} L this is x e^{-x} / ((n+1)^2 Ls^2), which stays in
        // f64 range for every rule size we allow.
        let (lnp1, _) = laguerre_scaled(n + 1, z);
        weights[i] = z * (-z).exp() / ((nf + 1.0) * (nf + 1.0) * lnp1 * lnp1);
    }
    Rule { nodes, weights }
}

/// `(e^{-x/2} L_n(x), e^{-x/2} L_{n-1}(x))` by the three-term recurrence.
/// The scale keeps values bounded near the largest roots, where the bare
/// polynomial grows like `e^{x/2}`.
fn laguerre_scaled(n: usize, x: f64) -> (f64, f64) {
    let scale = (-0.5 * x).exp();
    let mut lm1 = scale;
    if n == 0 {
        return (scale, 0.0);
    }
    let mut l = scale * (1.0 - x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * l - kf * lm1) / (kf + 1.0);
        lm1 = l;
        l = next;
    }
    (l, lm1)
}
