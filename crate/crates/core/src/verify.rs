//! Quadrature checks of the trace inequality and integration-by-parts
//! identities, and the mesh-refinement harness.
//!
//! The reference triangle is `K = {0 <= t <= x <= 1}`. Its inflow side is
//! `t = 0` and its outflow side is `t = x`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ctcs_ref::{ctcs_run, Bootstrap, CtcsProblem, UniformGrid};
use crate::error::{Error, Result};
use crate::marcher::{march, MarchOptions, Problem, SolverChoice};
use crate::mesh1d::Tent;
use crate::quadrature::{triangle_rule, GaussLegendre};
use crate::tent_pitcher::uniform_stencil;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceReport {
    /// `∫ x |w(x, 0)|² dx`
    pub weighted_inflow: f64,
    /// `∫ x |w(x, x)|² dx`
    pub weighted_outflow: f64,
    /// `∫ |w(x, 0) - w(x, x)|² / x dx`
    pub difference: f64,
    /// `∫_K w² + (∂_t w)²`
    pub graph_norm_sq: f64,
    pub ratio: f64,
    /// Unweighted `∫ |w(x, 0)|² dx`, the quantity that may diverge.
    pub unweighted_inflow: f64,
}

/// Quadrature in `x` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceQuadrature {
    /// `n`-point Gauss on the whole interval.
    Gauss(usize),
    /// Geometric layers `[2^{-i-1}, 2^{-i}]`, `i < layers`, with `points`-point Gauss on each.
    Graded { layers: usize, points: usize },
}

impl TraceQuadrature {
    fn nodes(&self) -> Vec<(f64, f64)> {
        match *self {
            TraceQuadrature::Gauss(n) => GaussLegendre::new(n).mapped(0.0, 1.0).collect(),
            TraceQuadrature::Graded { layers, points } => {
                let g = GaussLegendre::new(points);
                let mut out = Vec::with_capacity(layers * points);
                let mut b = 1.0;
                for _ in 0..layers {
                    let a = 0.5 * b;
                    out.extend(g.mapped(a, b));
                    b = a;
                }
                out
            }
        }
    }

    fn points(&self) -> usize {
        match *self {
            TraceQuadrature::Gauss(n) => n,
            TraceQuadrature::Graded { points, .. } => points,
        }
    }
}

/// Evaluate the trace-inequality terms for `w` with time derivative `dt_w`.
pub fn trace_check(
    w: &dyn Fn(f64, f64) -> f64,
    dt_w: &dyn Fn(f64, f64) -> f64,
    quad: TraceQuadrature,
) -> TraceReport {
    let xs = quad.nodes();
    let gt = GaussLegendre::new(quad.points());
    let (mut wi, mut wo, mut diff, mut graph, mut unweighted) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, wx) in &xs {
        let (a, b) = (w(x, 0.0), w(x, x));
        wi += wx * x * a * a;
        wo += wx * x * b * b;
        diff += wx * (a - b) * (a - b) / x;
        unweighted += wx * a * a;
        graph += wx * gt.integrate(0.0, x, |t| w(x, t).powi(2) + dt_w(x, t).powi(2));
    }
    TraceReport {
        weighted_inflow: wi,
        weighted_outflow: wo,
        difference: diff,
        graph_norm_sq: graph,
        ratio: (wi + wo + diff) / graph,
        unweighted_inflow: unweighted,
    }
}

/// Polynomial in `(x, t)` stored as `(i, j, coefficient)` for `x^i t^j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Poly2 {
    pub terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Self { terms }
    }

    /// All monomials up to total degree `deg` with uniform random coefficients in `[-1, 1]`.
    pub fn random(deg: u32, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                terms.push((i, j, rng.random_range(-1.0..=1.0)));
            }
        }
        Self { terms }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * x.powi(i as i32) * t.powi(j as i32)).sum()
    }

    pub fn dt(&self) -> Poly2 {
        Poly2 {
            terms: self
                .terms
                .iter()
                .filter(|&&(_, j, _)| j > 0)
                .map(|&(i, j, c)| (i, j - 1, c * j as f64))
                .collect(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IbpReport {
    pub volume: f64,
    pub outflow: f64,
    pub inflow: f64,
    pub residual: f64,
    /// Residual divided by the sum of absolute term sizes.
    pub relative: f64,
}

/// Region between two piecewise-linear graphs over common breakpoints.
struct GraphRegion {
    triangles: Vec<[[f64; 2]; 3]>,
    /// `(a, b)` endpoints of the top and bottom segments
    top: Vec<([f64; 2], [f64; 2])>,
    bottom: Vec<([f64; 2], [f64; 2])>,
}

fn line_integral(segments: &[([f64; 2], [f64; 2])], g: &GaussLegendre, f: &dyn Fn(f64, f64) -> f64) -> f64 {
    segments
        .iter()
        .map(|&(a, b)| {
            g.integrate(a[0], b[0], |x| {
                let s = (x - a[0]) / (b[0] - a[0]);
                f(x, a[1] + s * (b[1] - a[1]))
            })
        })
        .sum()
}

fn ibp_on(region: &GraphRegion, w: &Poly2, v: &Poly2) -> IbpReport {
    let deg = w.degree() + v.degree();
    let n = (deg as usize + 3) / 2 + 1;
    let g = GaussLegendre::new(n);
    let (dw, dv) = (w.dt(), v.dt());
    let mut volume = 0.0;
    let mut volume_abs = 0.0;
    for tri in &region.triangles {
        for (p, wt) in triangle_rule(n + 1, *tri) {
            let val = dw.eval(p[0], p[1]) * v.eval(p[0], p[1]) + w.eval(p[0], p[1]) * dv.eval(p[0], p[1]);
            volume += wt * val;
            volume_abs += wt * val.abs();
        }
    }
    let prod = |x: f64, t: f64| w.eval(x, t) * v.eval(x, t);
    let outflow = line_integral(&region.top, &g, &prod);
    let inflow = line_integral(&region.bottom, &g, &prod);
    let abs = |x: f64, t: f64| prod(x, t).abs();
    let scale = volume_abs + line_integral(&region.top, &g, &abs) + line_integral(&region.bottom, &g, &abs);
    let residual = (volume - outflow + inflow).abs();
    IbpReport { volume, outflow, inflow, residual, relative: residual / scale.max(f64::MIN_POSITIVE) }
}

/// `∫_K ∂_t(w v) = ∫ τ_o w τ_o v dx - ∫ τ_i w τ_i v dx` on the reference triangle.
pub fn ibp_reference(w: &Poly2, v: &Poly2) -> IbpReport {
    let region = GraphRegion {
        triangles: vec![[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]],
        top: vec![([0.0, 0.0], [1.0, 1.0])],
        bottom: vec![([0.0, 0.0], [1.0, 0.0])],
    };
    ibp_on(&region, w, v)
}

/// Same identity on a tent: the top graph runs through the apex, the bottom
/// graph through the pole base. On a boundary tent the pole is a vertical
/// side where `∂_t(w v)` integrates to zero against `n_t = 0`.
pub fn ibp_identity_check(w: &Poly2, v: &Poly2, tent: &Tent) -> Result<IbpReport> {
    tent.validate()?;
    let (b, a) = (tent.bottom(), tent.apex());
    let mut region = GraphRegion { triangles: tent.triangles(), top: Vec::new(), bottom: Vec::new() };
    if let Some(l) = tent.left_vertex() {
        region.top.push((l, a));
        region.bottom.push((l, b));
    }
    if let Some(r) = tent.right_vertex() {
        region.top.push((a, r));
        region.bottom.push((b, r));
    }
    Ok(ibp_on(&region, w, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonclosedRow {
    pub n: usize,
    /// `‖χ_n - 1‖²_W`, exact value `1/(2 n²)`
    pub chi_defect_sq: f64,
    pub chi_defect_sq_exact: f64,
    /// `∫_{1/n}^1 dx / x`, exact value `log n`
    pub weighted_trace: f64,
    pub weighted_trace_exact: f64,
    /// `‖χ_n t / x‖²_W`, exact value `(1 - 1/n²)/6 + log n`
    pub vn_norm_sq: f64,
    pub vn_norm_sq_exact: f64,
}

/// `v_n = χ_n t/x` with `χ_n` the indicator of `x > 1/n`. `χ_n → 1` in the
/// graph norm, while the traces of `v_n` carry a `1/x`-weighted energy
/// growing like `log n`.
pub fn nonclosed_sum_demo(n_max: usize) -> Result<Vec<NonclosedRow>> {
    if n_max < 2 {
        return Err(Error::config("n", "n must be at least 2"));
    }
    let mut ns: Vec<usize> = std::iter::successors(Some(2usize), |&n| n.checked_mul(2)).take_while(|&n| n <= n_max).collect();
    if ns.last() != Some(&n_max) {
        ns.push(n_max);
    }
    let g = GaussLegendre::new(12);
    Ok(ns
        .into_iter()
        .map(|n| {
            let nf = n as f64;
            let cut = 1.0 / nf;
            // χ_n - 1 is the indicator of {x < 1/n} ∩ K; ∂_t vanishes
            let chi = g.integrate(0.0, cut, |x| g.integrate(0.0, x, |_| 1.0));
            // graded in x to resolve 1/x toward the cut
            let layers = ((nf.ln() / 2f64.ln()).ceil() as usize).max(1);
            let mut trace = 0.0;
            let mut vn = 0.0;
            let mut b: f64 = 1.0;
            for i in 0..layers {
                let a = if i + 1 == layers { cut } else { (0.5 * b).max(cut) };
                trace += g.integrate(a, b, |x| 1.0 / x);
                vn += g.integrate(a, b, |x| g.integrate(0.0, x, |t| (t / x).powi(2) + (1.0 / x).powi(2)));
                b = a;
            }
            NonclosedRow {
                n,
                chi_defect_sq: chi,
                chi_defect_sq_exact: 0.5 / (nf * nf),
                weighted_trace: trace,
                weighted_trace_exact: nf.ln(),
                vn_norm_sq: vn,
                vn_norm_sq_exact: (1.0 - 1.0 / (nf * nf)) / 6.0 + nf.ln(),
            }
        })
        .collect())
}

/// Smooth test functions `(name, w, ∂_t w)` for the trace-ratio sweep.
pub type TestFunction = (String, Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>, Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

/// Tensor monomials `x^i t^j (i + j <= 4)`, shifted Gaussians, and random
/// cubics from a fixed seed; `count` entries total.
pub fn trace_corpus(count: usize, seed: u64) -> Vec<TestFunction> {
    let mut out: Vec<TestFunction> = Vec::new();
    for i in 0..=4i32 {
        for j in 0..=(4 - i) {
            let f = move |x: f64, t: f64| x.powi(i) * t.powi(j);
            let d = move |x: f64, t: f64| if j == 0 { 0.0 } else { j as f64 * x.powi(i) * t.powi(j - 1) };
            out.push((format!("x^{i} t^{j}"), Arc::new(f), Arc::new(d)));
        }
    }
    for (x0, t0, s) in [(0.5, 0.2, 10.0), (0.8, 0.5, 20.0), (0.2, 0.1, 5.0), (1.0, 1.0, 30.0), (0.0, 0.0, 8.0)] {
        let f = move |x: f64, t: f64| (-s * ((x - x0).powi(2) + (t - t0).powi(2))).exp();
        let d = move |x: f64, t: f64| -2.0 * s * (t - t0) * f(x, t);
        out.push((format!("gauss({x0},{t0},{s})"), Arc::new(f), Arc::new(d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let p = Arc::new(Poly2::random(3, &mut rng));
        let dp = Arc::new(p.dt());
        let name = format!("cubic#{}", out.len());
        let (p2, dp2) = (p.clone(), dp.clone());
        out.push((name, Arc::new(move |x, t| p2.eval(x, t)), Arc::new(move |x, t| dp2.eval(x, t))));
    }
    out.truncate(count);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tp,
    Ctcs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub err: f64,
    /// `log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`, NaN on the first row.
    pub slope_running: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub scheme: Scheme,
    pub t_eval: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log err` against `log h`.
    pub slope: f64,
    /// Errors decrease along the sequence.
    pub monotone: bool,
}

/// The left-moving pulse `u1 = u2 = exp(-1000 ((x + t) - 1/2)²)` on `[0, 1]`, `c = 1`, `z = 1`.
pub fn pulse_problem() -> Problem {
    Problem::left_pulse(1.0, |y| (-1000.0 * (y - 0.5) * (y - 0.5)).exp())
}

/// Error of one scheme on the pulse problem at `t_eval`.
pub fn pulse_error(scheme: Scheme, h: f64, k: f64, t_eval: f64) -> Result<f64> {
    let problem = pulse_problem();
    let exact = problem.exact.clone().unwrap();
    match scheme {
        Scheme::Tp => {
            let mesh = uniform_stencil(1.0, h, k, t_eval)?;
            let opts = MarchOptions { solver: SolverChoice::Auto, ..Default::default() };
            march(&mesh, &problem, &opts)?.l2_error(t_eval, &*exact)
        }
        Scheme::Ctcs => {
            let grid = UniformGrid::new(1.0, h, k, 1.0)?;
            let p = CtcsProblem { z_left: 1.0, z_right: 1.0, initial: problem.initial.clone(), exact: Some(exact) };
            Ok(ctcs_run(&grid, &p, &[t_eval], Bootstrap::Taylor)?.errors[0])
        }
    }
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Refinement study on the pulse problem with `k = k_ratio h`.
pub fn convergence_study(scheme: Scheme, h_list: &[f64], k_ratio: f64, t_eval: f64) -> Result<ConvergenceTable> {
    if h_list.len() < 2 {
        return Err(Error::config("h_list", "at least two mesh sizes are needed"));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let err = pulse_error(scheme, h, k_ratio * h, t_eval)?;
        let slope_running = match rows.last() {
            Some(prev) => (prev.err / err).ln() / (prev.h / h).ln(),
            None => f64::NAN,
        };
        rows.push(ConvergenceRow { h, err, slope_running });
    }
    let lx: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.err.ln()).collect();
    let monotone = rows.windows(2).all(|w| w[1].err < w[0].err);
    Ok(ConvergenceTable { scheme, t_eval, slope: least_squares_slope(&lx, &ly), monotone, rows })
}
