//! Gauss-Legendre rules on intervals and triangles.

use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the Legendre roots, found by Newton iteration from the
    /// Chebyshev-like initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(mid + half * z))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&z, &w)| (mid + half * z, w * half))
    }
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

/// Collapsed (Duffy) Gauss rule on an arbitrary triangle; exact for
/// polynomials of total degree `2n - 2`.
pub fn triangle_rule(n: usize, verts: [[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
    let g = GaussLegendre::new(n);
    let [a, b, c] = verts;
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let mut out = Vec::with_capacity(n * n);
    for (u, wu) in g.mapped(0.0, 1.0) {
        for (v, wv) in g.mapped(0.0, 1.0) {
            // (u, v) in the unit square -> (r, s) = (u, (1-u) v) in the unit triangle
            let r = u;
            let s = (1.0 - u) * v;
            let x = a[0] + r * (b[0] - a[0]) + s * (c[0] - a[0]);
            let t = a[1] + r * (b[1] - a[1]) + s * (c[1] - a[1]);
            out.push(([x, t], wu * wv * (1.0 - u) * area2));
        }
    }
    out
}

/// Composite Gauss rule on `[a, b]` with `panels` equal sub-intervals.
pub fn composite(a: f64, b: f64, panels: usize, rule: &GaussLegendre, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| rule.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..20 {
            let g = GaussLegendre::new(n);
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in 1..12 {
            let g = GaussLegendre::new(n);
            for d in 0..(2 * n) {
                let got = g.integrate(0.0, 1.0, |x| x.powi(d as i32));
                let exact = 1.0 / (d as f64 + 1.0);
                assert!((got - exact).abs() < 1e-13, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn triangle_rule_integrates_monomials() {
        // reference triangle (0,0),(1,0),(1,1): integral of x^a t^b = 1/((b+1)(a+b+2))
        let rule = triangle_rule(5, [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
        for a in 0..=4 {
            for b in 0..=(4 - a) {
                let got: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a) * p[1].powi(b)).sum();
                let exact = 1.0 / ((b as f64 + 1.0) * (a as f64 + b as f64 + 2.0));
                assert!((got - exact).abs() < 1e-14, "a={a} b={b}");
            }
        }
    }
}
