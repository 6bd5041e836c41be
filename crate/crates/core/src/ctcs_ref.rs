//! Reference finite difference schemes on uniform grids.
//!
//! * [`StencilState`] / [`leapfrog_step`]: the non-staggered leapfrog
//!   `U_j^{n+1} = U_j^{n-1} + a c (V_{j+1}^n - V_{j-1}^n)` on the lattice
//!   `(h/2) Z x (k/2) Z`, where even vertices live on odd levels and odd
//!   vertices on even levels. This is what tent pitching produces with tents
//!   of width `h` and pole `k`.
//! * [`ctcs_run`]: the staggered central-time central-space (Yee) scheme with
//!   `U` at `(m h, n k)` and `V` at `((m + 1/2) h, (n + 1/2) k)`.
//!
//! Ghost elimination for the Yee scheme. The boundary condition
//! `z0 u1 - u2 = 0` at `x = 0`, imposed at time `(n + 1/2) k` with both
//! fields averaged to the boundary, gives
//! `V_{-1/2} = z0 (U_0^n + U_0^{n+1}) - V_{1/2}`. Substituting into
//! `U_0^{n+1} = U_0^n + a c (V_{1/2} - V_{-1/2})`:
//!
//! ```text
//! (1 + a c z0) U_0^{n+1} = (1 - a c z0) U_0^n + 2 a c V_{1/2}
//! ```
//!
//! and likewise at `x = S` with `z1 u1 + u2 = 0`:
//!
//! ```text
//! (1 + a c z1) U_M^{n+1} = (1 - a c z1) U_M^n - 2 a c V_{M-1/2}
//! ```

use crate::error::{Error, Result};
use crate::marcher::{InitialData, SpaceTimeField};
use crate::quadrature::GaussLegendre;

/// Uniform space-time grid on `[0, length]` with `a = k/h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformGrid {
    pub length: f64,
    pub h: f64,
    pub k: f64,
    pub c: f64,
    pub cells: usize,
}

impl UniformGrid {
    /// Rejects `|a c| >= 1`.
    pub fn new(length: f64, h: f64, k: f64, c: f64) -> Result<Self> {
        if !(length > 0.0 && h > 0.0 && k > 0.0 && c > 0.0) || ![length, h, k, c].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidMesh(format!("grid parameters must be positive (length={length}, h={h}, k={k}, c={c})")));
        }
        let cells = (length / h).round();
        if cells < 2.0 || (length / h - cells).abs() > 1e-9 * cells {
            return Err(Error::InvalidMesh(format!("length/h = {} is not an integer >= 2", length / h)));
        }
        let courant = k * c / h;
        if courant >= 1.0 {
            return Err(Error::CflViolation(format!("|a c| = {courant} >= 1")));
        }
        Ok(Self { length, h, k, c, cells: cells as usize })
    }

    pub fn a(&self) -> f64 {
        self.k / self.h
    }

    pub fn courant(&self) -> f64 {
        self.k * self.c / self.h
    }

    pub fn x(&self, m: usize) -> f64 {
        // exact at both ends
        if m == self.cells {
            self.length
        } else {
            m as f64 * self.h
        }
    }
}

/// Boundary closure of the non-staggered leapfrog.
pub enum StencilClosure<'a> {
    /// `z = 1` at both ends, closed along the outgoing characteristic.
    /// Requires the boundary values to satisfy the condition already.
    UnitImpedance,
    /// Boundary values supplied by `(vertex, level)`.
    Prescribed(&'a dyn Fn(usize, usize) -> [f64; 2]),
}

/// Latest value and lattice level (units of `k/2`) at every vertex `j h/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilState {
    pub values: Vec<[f64; 2]>,
    pub levels: Vec<usize>,
    pub round: usize,
}

impl StencilState {
    pub fn new(grid: &UniformGrid, initial: &dyn Fn(f64) -> [f64; 2]) -> Self {
        let n = 2 * grid.cells + 1;
        Self { values: (0..n).map(|j| initial(Self::x(grid, j))).collect(), levels: vec![0; n], round: 0 }
    }

    pub fn x(grid: &UniformGrid, j: usize) -> f64 {
        if j == 2 * grid.cells {
            grid.length
        } else {
            0.5 * j as f64 * grid.h
        }
    }

    /// Vertices advanced by the next round.
    pub fn next_parity(&self) -> usize {
        self.round % 2
    }
}

/// Advance every vertex of one parity class. The first round moves even
/// vertices from level 0 to level 1 with half the usual weight.
pub fn leapfrog_step(grid: &UniformGrid, state: &mut StencilState, closure: &StencilClosure<'_>) {
    let n = state.values.len();
    let ac = grid.courant();
    let parity = state.next_parity();
    let old = state.values.clone();
    for j in (parity..n).step_by(2) {
        let first = state.levels[j] == 0 && j % 2 == 0;
        let target = state.levels[j] + if first { 1 } else { 2 };
        let b = old[j];
        let new = if j > 0 && j + 1 < n {
            let w = if first { 0.5 * ac } else { ac };
            let (l, r) = (old[j - 1], old[j + 1]);
            [b[0] + w * (r[1] - l[1]), b[1] + w * (r[0] - l[0])]
        } else {
            match closure {
                StencilClosure::Prescribed(f) => f(j, target),
                StencilClosure::UnitImpedance => {
                    let (nb, sign) = if j == 0 { (old[1], 1.0) } else { (old[j - 1], -1.0) };
                    // w = U + V on the left, U - V on the right
                    let (wb, wn) = (b[0] + sign * b[1], nb[0] + sign * nb[1]);
                    let w = if first {
                        (1.0 - ac) * wb + ac * wn
                    } else {
                        ((1.0 - ac) * wb + 2.0 * ac * wn) / (1.0 + ac)
                    };
                    [0.5 * w, sign * 0.5 * w]
                }
            }
        };
        state.values[j] = new;
        state.levels[j] = target;
    }
    state.round += 1;
}

/// Start-up of the staggered `V` field at `t = k/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bootstrap {
    /// `V^{1/2} = u2⁰ + (k/2) c D_x u1⁰`.
    #[default]
    Taylor,
    /// Exact solution at `t = k/2`.
    Exact,
}

/// Impedance-boundary pulse problem for the Yee scheme (unit material).
#[derive(Clone)]
pub struct CtcsProblem {
    pub z_left: f64,
    pub z_right: f64,
    pub initial: InitialData,
    pub exact: Option<SpaceTimeField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CtcsRecord {
    pub times: Vec<f64>,
    pub errors: Vec<f64>,
    /// `U` at the last level reached, on the integer nodes.
    pub u_final: Vec<f64>,
    /// `V` at the last half level reached, on the half nodes.
    pub v_final: Vec<f64>,
    pub steps: usize,
}

struct Level {
    t: f64,
    values: Vec<f64>,
}

fn bracket(levels: &[Level], t: f64) -> (&Level, &Level, f64) {
    let i = levels
        .windows(2)
        .position(|w| t >= w[0].t && t <= w[1].t)
        .unwrap_or(levels.len() - 2);
    let (a, b) = (&levels[i], &levels[i + 1]);
    (a, b, (t - a.t) / (b.t - a.t))
}

fn lerp(a: &[f64], b: &[f64], s: f64, i: usize) -> f64 {
    a[i] + s * (b[i] - a[i])
}

/// Run the Yee scheme and record `L²` errors at `sample_times` (ascending).
pub fn ctcs_run(
    grid: &UniformGrid,
    problem: &CtcsProblem,
    sample_times: &[f64],
    bootstrap: Bootstrap,
) -> Result<CtcsRecord> {
    let exact = problem.exact.as_deref();
    if exact.is_none() && (bootstrap == Bootstrap::Exact || !sample_times.is_empty()) {
        return Err(Error::Config { path: "exact".into(), message: "an exact solution is required".into() });
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Config { path: "sample_times".into(), message: "must be nonnegative and ascending".into() });
    }
    let m = grid.cells;
    let (h, k, ac) = (grid.h, grid.k, grid.courant());
    let (z0, z1) = (problem.z_left, problem.z_right);
    let xh = |i: usize| (i as f64 + 0.5) * h;
    let u0: Vec<f64> = (0..=m).map(|i| (problem.initial)(grid.x(i))[0]).collect();
    let v0: Vec<f64> = (0..m).map(|i| (problem.initial)(xh(i))[1]).collect();
    let v_half: Vec<f64> = match bootstrap {
        Bootstrap::Taylor => (0..m)
            .map(|i| v0[i] + 0.5 * k * grid.c * (u0[i + 1] - u0[i]) / h)
            .collect(),
        Bootstrap::Exact => (0..m).map(|i| exact.unwrap()(xh(i), 0.5 * k)[1]).collect(),
    };
    let t_end = sample_times.last().copied().unwrap_or(0.0);
    let mut us = vec![Level { t: 0.0, values: u0 }];
    let mut vs = vec![Level { t: 0.0, values: v0 }, Level { t: 0.5 * k, values: v_half }];
    let mut times = Vec::with_capacity(sample_times.len());
    let mut errors = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    let mut n = 0usize;
    let rule = GaussLegendre::new(5);

    loop {
        // U^{n+1} from U^n and V^{n+1/2}
        let un = &us.last().unwrap().values;
        let v = &vs.last().unwrap().values;
        let mut u_new = vec![0.0; m + 1];
        for i in 1..m {
            u_new[i] = un[i] + ac * (v[i] - v[i - 1]);
        }
        u_new[0] = ((1.0 - ac * z0) * un[0] + 2.0 * ac * v[0]) / (1.0 + ac * z0);
        u_new[m] = ((1.0 - ac * z1) * un[m] - 2.0 * ac * v[m - 1]) / (1.0 + ac * z1);
        // V^{n+3/2} from U^{n+1}
        let v_new: Vec<f64> = (0..m).map(|i| v[i] + ac * (u_new[i + 1] - u_new[i])).collect();
        n += 1;
        us.push(Level { t: n as f64 * k, values: u_new });
        vs.push(Level { t: (n as f64 + 0.5) * k, values: v_new });
        if us.len() > 2 {
            us.remove(0);
        }
        if vs.len() > 3 {
            vs.remove(0);
        }
        // samples in [(n-1) k, n k] are now bracketed for both fields
        let t_hi = n as f64 * k;
        while next_sample < sample_times.len() && sample_times[next_sample] <= t_hi {
            let t = sample_times[next_sample];
            let e = yee_error(grid, &us, &vs, t, z0, z1, exact.unwrap(), &rule);
            times.push(t);
            errors.push(e);
            next_sample += 1;
        }
        if next_sample == sample_times.len() && t_hi >= t_end {
            break;
        }
        if !us.last().unwrap().values.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem { condition: f64::INFINITY });
        }
    }
    Ok(CtcsRecord {
        times,
        errors,
        u_final: us.pop().unwrap().values,
        v_final: vs.pop().unwrap().values,
        steps: n,
    })
}

/// Piecewise-linear reconstruction of both fields at time `t` (linear in
/// time between levels). `V` is extended to the ends with the boundary
/// values `z0 U_0` and `-z1 U_M` implied by the ghost elimination.
#[allow(clippy::too_many_arguments)]
fn yee_error(
    grid: &UniformGrid,
    us: &[Level],
    vs: &[Level],
    t: f64,
    z0: f64,
    z1: f64,
    exact: &(dyn Fn(f64, f64) -> [f64; 2] + Send + Sync),
    rule: &GaussLegendre,
) -> f64 {
    let m = grid.cells;
    let (ua, ub, su) = bracket(us, t);
    let (va, vb, sv) = bracket(vs, t);
    let u_at = |i: usize| lerp(&ua.values, &ub.values, su, i);
    let v_at = |i: usize| lerp(&va.values, &vb.values, sv, i);
    let mut acc = 0.0;
    for cell in 0..m {
        let x0 = grid.x(cell);
        let x1 = grid.x(cell + 1);
        let xm = 0.5 * (x0 + x1);
        let (u0, u1) = (u_at(cell), u_at(cell + 1));
        let vm = v_at(cell);
        let v_left = if cell == 0 { z0 * u0 } else { 0.5 * (v_at(cell - 1) + vm) };
        let v_right = if cell + 1 == m { -z1 * u1 } else { 0.5 * (vm + v_at(cell + 1)) };
        for (a, b, va_, vb_) in [(x0, xm, v_left, vm), (xm, x1, vm, v_right)] {
            for (x, w) in rule.mapped(a, b) {
                let su = (x - x0) / (x1 - x0);
                let u = u0 + su * (u1 - u0);
                let sv = (x - a) / (b - a);
                let v = va_ + sv * (vb_ - va_);
                let e = exact(x, t);
                acc += w * ((u - e[0]).powi(2) + (v - e[1]).powi(2));
            }
        }
    }
    acc.sqrt()
}
