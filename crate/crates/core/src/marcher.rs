//! Causal sweep over a tent mesh and evaluation of the space-time solution.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::local_solver::{
    solve_tent_assembled, solve_tent_closed_form, BoundaryConstraint, TentInflow, TentMaterial,
};
use crate::mesh1d::{cfl_admissible, Material, Region, TentType};
use crate::quadrature::GaussLegendre;
use crate::tent_pitcher::TentMesh;

pub type InitialData = Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>;
pub type SpaceTimeField = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Boundary-value problem on `[0, S]`.
#[derive(Clone)]
pub struct Problem {
    pub material: Material,
    pub z_left: f64,
    pub z_right: f64,
    pub initial: InitialData,
    pub source: Option<SpaceTimeField>,
    pub exact: Option<SpaceTimeField>,
}

impl Problem {
    pub fn new(material: Material, z_left: f64, z_right: f64, initial: InitialData) -> Self {
        Self { material, z_left, z_right, initial, source: None, exact: None }
    }

    pub fn with_source(mut self, f: SpaceTimeField) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_exact(mut self, u: SpaceTimeField) -> Self {
        self.exact = Some(u);
        self
    }

    /// Left-travelling pulse `u1 = u2 = g(x + c t)` on a unit homogeneous medium.
    pub fn left_pulse(c: f64, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let g = Arc::new(g);
        let g0 = g.clone();
        let initial: InitialData = Arc::new(move |x| {
            let v = g0(x);
            [v, v]
        });
        let exact: SpaceTimeField = Arc::new(move |x, t| {
            let v = g(x + c * t);
            [v, v]
        });
        Self::new(Material::homogeneous(c), 1.0, 1.0, initial).with_exact(exact)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolverChoice {
    /// Closed form where it is exact, the assembled system elsewhere.
    #[default]
    Auto,
    ClosedForm,
    Assembled,
}

#[derive(Clone, Copy, Debug)]
pub struct MarchOptions {
    pub solver: SolverChoice,
    /// Tents are rejected when some side exceeds this CFL ratio.
    pub cfl_limit: f64,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self { solver: SolverChoice::Auto, cfl_limit: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Node {
    pub x: f64,
    pub t: f64,
    pub u1: f64,
    pub u2: f64,
}

/// Trace of the solution on a time level: breakpoints and values, linear in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<[f64; 2]>,
}

/// Discrete space-time solution. Self-contained: it keeps the geometry it needs.
#[derive(Clone, Debug)]
pub struct Solution {
    xs: Vec<f64>,
    ts: Vec<f64>,
    values: Vec<[f64; 2]>,
    tent_u: Vec<[f64; 2]>,
    /// Per spatial cell, successive front segments `(left vertex, right vertex)`.
    cell_fronts: Vec<Vec<(usize, usize)>>,
    cell_regions: Vec<Region>,
    t_covered: f64,
    closed_form_tents: usize,
}

/// Solve tent by tent in pitching order.
pub fn march(mesh: &TentMesh, problem: &Problem, options: &MarchOptions) -> Result<Solution> {
    let spatial = mesh.spatial_mesh();
    problem.material.check_mesh(spatial)?;
    let c = problem.material.c;
    let verts = mesh.vertices();
    let xs: Vec<f64> = verts.iter().map(|v| spatial.x(v.spatial)).collect();
    let ts: Vec<f64> = verts.iter().map(|v| v.t).collect();
    let mut values = vec![[0.0; 2]; verts.len()];
    let mut known = vec![false; verts.len()];
    for j in 0..spatial.n_vertices() {
        values[j] = (problem.initial)(spatial.x(j));
        known[j] = true;
    }
    let n_cells = spatial.n_cells();
    let mut cell_fronts: Vec<Vec<(usize, usize)>> = (0..n_cells).map(|c| vec![(c, c + 1)]).collect();
    let cell_regions: Vec<Region> = spatial.regions().iter().map(|&r| problem.material.regions[r]).collect();
    let mut tent_u = Vec::with_capacity(mesh.n_tents());
    let mut closed_form_tents = 0;
    let source = problem.source.as_deref();

    for (i, (tent, nodes)) in mesh.tents().iter().zip(mesh.tent_nodes()).enumerate() {
        let wrap = |e: Error| Error::TentFailure { tent: i, source: Box::new(e) };
        for v in nodes.inflow() {
            if !known[v] {
                return Err(Error::OrderingViolation { tent: i, vertex: v });
            }
        }
        let speeds = problem.material.side_speeds(spatial, tent.center);
        if !cfl_admissible(tent, speeds, options.cfl_limit).map_err(wrap)? {
            let (l, r) = tent.cfl_ratios(speeds);
            return Err(wrap(Error::CflViolation(format!(
                "tent at vertex {} has CFL ratios {:?} / {:?}",
                tent.center, l, r
            ))));
        }
        let inflow = TentInflow {
            bottom: values[nodes.bottom],
            left: nodes.left.map(|v| values[v]),
            right: nodes.right.map(|v| values[v]),
        };
        let (left_region, right_region) = problem.material.side_regions(spatial, tent.center);
        let tmat = TentMaterial {
            c,
            left: left_region.unwrap_or(Region::UNIT),
            right: right_region.unwrap_or(Region::UNIT),
        };
        let constraint = BoundaryConstraint::for_tent(tent, problem.z_left, problem.z_right);
        let use_closed = match options.solver {
            SolverChoice::ClosedForm => true,
            SolverChoice::Assembled => false,
            SolverChoice::Auto => closed_form_is_exact(tent.tent_type, &tmat, constraint, inflow.bottom, source.is_some()),
        };
        let (apex, u) = if use_closed {
            closed_form_tents += 1;
            let apex = solve_tent_closed_form(tent, &inflow, c).map_err(wrap)?;
            (apex, [f64::NAN; 2])
        } else {
            let s = solve_tent_assembled(tent, &inflow, &tmat, source.map(|f| f as _), constraint).map_err(wrap)?;
            (s.apex, s.u)
        };
        if !(apex[0].is_finite() && apex[1].is_finite()) {
            return Err(wrap(Error::SingularSystem { condition: f64::INFINITY }));
        }
        values[nodes.apex] = apex;
        known[nodes.apex] = true;
        tent_u.push(u);
        if let Some(r) = nodes.right {
            cell_fronts[tent.center].push((nodes.apex, r));
        }
        if let Some(l) = nodes.left {
            cell_fronts[tent.center - 1].push((l, nodes.apex));
        }
    }
    let t_covered = mesh.covered_time();
    Ok(Solution { xs, ts, values, tent_u, cell_fronts, cell_regions, t_covered, closed_form_tents })
}

fn closed_form_is_exact(
    kind: TentType,
    material: &TentMaterial,
    constraint: BoundaryConstraint,
    bottom: [f64; 2],
    has_source: bool,
) -> bool {
    if has_source || !material.left.is_unit() || !material.right.is_unit() {
        return false;
    }
    match kind {
        TentType::Interior => true,
        TentType::Left | TentType::Right => {
            let scale = bottom[0].abs().max(bottom[1].abs()).max(f64::MIN_POSITIVE);
            constraint.z == 1.0 && constraint.residual(bottom).abs() <= 1e-14 * scale
        }
    }
}

impl Solution {
    pub fn n_vertices(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    /// Constant part `u` per tent (NaN for tents solved by the closed form).
    pub fn tent_constants(&self) -> &[[f64; 2]] {
        &self.tent_u
    }

    pub fn closed_form_tents(&self) -> usize {
        self.closed_form_tents
    }

    /// Latest time at which the whole interval has been covered.
    pub fn covered_time(&self) -> f64 {
        self.t_covered
    }

    pub fn nodes(&self) -> Vec<Node> {
        (0..self.values.len())
            .map(|v| Node { x: self.xs[v], t: self.ts[v], u1: self.values[v][0], u2: self.values[v][1] })
            .collect()
    }

    /// Value of the nodal interpolant at a spatial vertex index and time level.
    pub fn front_time(&self, front: (usize, usize), x: f64) -> f64 {
        let (a, b) = front;
        let s = (x - self.xs[a]) / (self.xs[b] - self.xs[a]);
        self.ts[a] + s * (self.ts[b] - self.ts[a])
    }

    fn front_value(&self, front: (usize, usize), x: f64) -> [f64; 2] {
        let (a, b) = front;
        let s = (x - self.xs[a]) / (self.xs[b] - self.xs[a]);
        let (ua, ub) = (self.values[a], self.values[b]);
        [ua[0] + s * (ub[0] - ua[0]), ua[1] + s * (ub[1] - ua[1])]
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.t_covered.max(1.0);
        if !(t >= 0.0 && t <= self.t_covered + slack) {
            return Err(Error::TimeOutOfRange { t, t_max: self.t_covered });
        }
        Ok(())
    }

    fn cell_of(&self, x: f64) -> Option<usize> {
        let n = self.cell_fronts.len();
        let first = |c: usize| self.xs[self.cell_fronts[c][0].0];
        let last = self.xs[self.cell_fronts[n - 1][0].1];
        if !(x >= first(0) && x <= last) {
            return None;
        }
        let mut lo = 0;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if first(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    fn eval_in_cell(&self, cell: usize, x: f64, t: f64) -> [f64; 2] {
        let fronts = &self.cell_fronts[cell];
        // first front whose height at x reaches t
        let idx = fronts.partition_point(|&f| self.front_time(f, x) < t);
        if idx == 0 {
            return self.front_value(fronts[0], x);
        }
        if idx == fronts.len() {
            return self.front_value(fronts[idx - 1], x);
        }
        let (lo, hi) = (fronts[idx - 1], fronts[idx]);
        let (t0, t1) = (self.front_time(lo, x), self.front_time(hi, x));
        let (u0, u1) = (self.front_value(lo, x), self.front_value(hi, x));
        if t1 - t0 <= 0.0 {
            return u1;
        }
        let s = (t - t0) / (t1 - t0);
        [u0[0] + s * (u1[0] - u0[0]), u0[1] + s * (u1[1] - u0[1])]
    }

    /// Evaluate the piecewise-linear solution at `(x, t)`.
    pub fn evaluate(&self, x: f64, t: f64) -> Result<[f64; 2]> {
        self.check_time(t)?;
        let cell = self.cell_of(x).ok_or_else(|| Error::InvalidMesh(format!("x = {x} lies outside the domain")))?;
        Ok(self.eval_in_cell(cell, x, t))
    }

    /// Breakpoints of the trace inside a cell, endpoints included.
    fn cell_breakpoints(&self, cell: usize, t: f64) -> Vec<f64> {
        let fronts = &self.cell_fronts[cell];
        let (xa, xb) = (self.xs[fronts[0].0], self.xs[fronts[0].1]);
        let mut pts = vec![xa, xb];
        for &(a, b) in fronts {
            let (ta, tb) = (self.ts[a], self.ts[b]);
            if (ta - t) * (tb - t) < 0.0 {
                let s = (t - ta) / (tb - ta);
                pts.push(xa + s * (xb - xa));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Exact trace at time `t`, kinks included.
    pub fn snapshot(&self, t: f64) -> Result<Trace> {
        self.check_time(t)?;
        let mut x = Vec::new();
        let mut u = Vec::new();
        for cell in 0..self.cell_fronts.len() {
            let pts = self.cell_breakpoints(cell, t);
            let skip = if cell == 0 { 0 } else { 1 };
            for &p in &pts[skip..] {
                x.push(p);
                u.push(self.eval_in_cell(cell, p, t));
            }
        }
        Ok(Trace { t, x, u })
    }

    /// Trace at a given set of points.
    pub fn sample(&self, t: f64, points: &[f64]) -> Result<Vec<[f64; 2]>> {
        points.iter().map(|&x| self.evaluate(x, t)).collect()
    }

    /// `∫ g(x, u_h(x, t)) dx`, exact up to the Gauss rule on each linear piece.
    fn integrate_trace(&self, t: f64, points: usize, mut g: impl FnMut(usize, f64, [f64; 2]) -> f64) -> Result<f64> {
        self.check_time(t)?;
        let rule = GaussLegendre::new(points);
        let mut acc = 0.0;
        for cell in 0..self.cell_fronts.len() {
            let pts = self.cell_breakpoints(cell, t);
            for w in pts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let ua = self.eval_in_cell(cell, a, t);
                let ub = self.eval_in_cell(cell, b, t);
                for (x, wt) in rule.mapped(a, b) {
                    let s = (x - a) / (b - a);
                    let u = [ua[0] + s * (ub[0] - ua[0]), ua[1] + s * (ub[1] - ua[1])];
                    acc += wt * g(cell, x, u);
                }
            }
        }
        Ok(acc)
    }

    /// `‖u_h(·, t) - exact(·, t)‖_{L²}`.
    pub fn l2_error(&self, t: f64, exact: &(dyn Fn(f64, f64) -> [f64; 2] + Sync)) -> Result<f64> {
        let sq = self.integrate_trace(t, 5, |_, x, u| {
            let e = exact(x, t);
            (u[0] - e[0]).powi(2) + (u[1] - e[1]).powi(2)
        })?;
        Ok(sq.sqrt())
    }

    /// `½ ∫ (k1 u1² + k2 u2²) dx` at time `t`.
    pub fn energy(&self, t: f64) -> Result<f64> {
        let e = self.integrate_trace(t, 3, |cell, _, u| {
            let r = self.cell_regions[cell];
            r.kappa1 * u[0] * u[0] + r.kappa2 * u[1] * u[1]
        })?;
        Ok(0.5 * e)
    }

    /// `(t, error)` on `n + 1` equispaced times in `[0, t_end]`.
    pub fn error_history(
        &self,
        t_end: f64,
        n: usize,
        exact: &(dyn Fn(f64, f64) -> [f64; 2] + Sync),
    ) -> Result<Vec<(f64, f64)>> {
        (0..=n)
            .map(|i| {
                let t = t_end * i as f64 / n.max(1) as f64;
                self.l2_error(t, exact).map(|e| (t, e))
            })
            .collect()
    }
}
