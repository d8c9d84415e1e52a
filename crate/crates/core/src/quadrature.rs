//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots of `P_n` are refined by Newton's method from the Chebyshev-like initial guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// A Gauss–Legendre rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// `∫_a^b f` by recursive bisection until halving changes the estimate by at most `tol`.
    pub fn integrate_adaptive<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, tol: f64, mut f: F) -> f64 {
        let whole = self.integrate(a, b, &mut f);
        self.refine(a, b, whole, tol, 48, &mut f)
    }

    fn refine<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, whole: f64, tol: f64, depth: u32, f: &mut F) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.integrate(a, mid, &mut *f);
        let right = self.integrate(mid, b, &mut *f);
        if depth == 0 || (left + right - whole).abs() <= tol {
            return left + right;
        }
        self.refine(a, mid, left, 0.5 * tol, depth - 1, f) + self.refine(mid, b, right, 0.5 * tol, depth - 1, f)
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, w * half))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 64, 200] {
            let (_, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let q = GaussLegendre::new(8);
        // degree 15 is integrated exactly by 8 nodes
        let got = q.integrate(0.0, 2.0, |x| x.powi(15));
        assert_abs_diff_eq!(got, 2f64.powi(16) / 16.0, epsilon = 1e-9);
    }

    #[test]
    fn adaptive_resolves_a_sharp_step() {
        let q = GaussLegendre::new(16);
        let got = q.integrate_adaptive(0.0, 1.0, 1e-14, |x| 1.0 / (1.0 + (-(x - 0.3) * 1e5).exp()));
        assert_abs_diff_eq!(got, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn smooth_integral() {
        let q = GaussLegendre::new(64);
        assert_abs_diff_eq!(q.integrate(0.0, PI, f64::sin), 2.0, epsilon = 1e-13);
    }
}
