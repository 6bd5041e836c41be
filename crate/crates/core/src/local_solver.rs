//! Per-tent Petrov-Galerkin solve.
//!
//! On a tent K the discrete solution is `z_h = z_in + alpha * zeta`, where
//! `z_in` interpolates the known inflow nodal values (zero at the apex) and
//! `zeta` is the apex hat function. The unknowns are the apex coefficient
//! `alpha` and a constant `u` on K. With the test space
//! `{ kappa + mu * zeta : kappa * zeta admissible }` the tent problem reads
//!
//! ```text
//! -∫_K u · A w + ∫_∂K 𝒟 (alpha zeta) · w = ∫_K f · w - ∫_∂K 𝒟 z_in · w
//! ```
//!
//! with `A = diag(k1, k2) ∂_t - [[0, c], [c, 0]] ∂_x` and
//! `𝒟 = [[n_t k1, -c n_x], [-c n_x, n_t k2]]` on each triangle's material.
//! On a boundary tent `alpha` and `kappa` are restricted to the null space of
//! the impedance condition, which shrinks the system from 4 to 3 unknowns.

use crate::error::{Error, Result};
use crate::mesh1d::{Region, Tent, TentType};

/// Pivots smaller than this fraction of the matrix norm count as zero.
const SINGULAR_PIVOT: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryKind {
    None,
    /// `z u1 - u2 = 0` on the left end.
    Left,
    /// `z u1 + u2 = 0` on the right end.
    Right,
}

/// Essential impedance condition carried by a boundary tent. `z = 0` is
/// Dirichlet on `u2`, `z = sqrt(k1/k2)` is the matched (outgoing) condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryConstraint {
    pub kind: BoundaryKind,
    pub z: f64,
}

impl BoundaryConstraint {
    pub const NONE: BoundaryConstraint = BoundaryConstraint { kind: BoundaryKind::None, z: 0.0 };

    pub fn left(z: f64) -> Self {
        Self { kind: BoundaryKind::Left, z }
    }

    pub fn right(z: f64) -> Self {
        Self { kind: BoundaryKind::Right, z }
    }

    /// Direction spanning the admissible apex values.
    pub fn null_vector(&self) -> Option<[f64; 2]> {
        match self.kind {
            BoundaryKind::None => None,
            BoundaryKind::Left => Some([1.0, self.z]),
            BoundaryKind::Right => Some([1.0, -self.z]),
        }
    }

    /// Residual of the condition at a nodal pair.
    pub fn residual(&self, v: [f64; 2]) -> f64 {
        match self.kind {
            BoundaryKind::None => 0.0,
            BoundaryKind::Left => self.z * v[0] - v[1],
            BoundaryKind::Right => self.z * v[0] + v[1],
        }
    }

    /// Constraint matching a tent's type.
    pub fn for_tent(tent: &Tent, z_left: f64, z_right: f64) -> Self {
        match tent.tent_type {
            TentType::Interior => Self::NONE,
            TentType::Left => Self::left(z_left),
            TentType::Right => Self::right(z_right),
        }
    }
}

/// Nodal values `(U, V)` at the inflow vertices of a tent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TentInflow {
    pub bottom: [f64; 2],
    pub left: Option<[f64; 2]>,
    pub right: Option<[f64; 2]>,
}

/// Materials of the two triangles of a tent. A missing side's entry is ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TentMaterial {
    pub c: f64,
    pub left: Region,
    pub right: Region,
}

impl TentMaterial {
    pub fn homogeneous(c: f64) -> Self {
        Self { c, left: Region::UNIT, right: Region::UNIT }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TentSolution {
    /// Apex nodal pair `(U^t, V^t)`.
    pub apex: [f64; 2],
    /// Constant approximation of `u` on the tent.
    pub u: [f64; 2],
}

pub type Source<'a> = &'a (dyn Fn(f64, f64) -> [f64; 2] + Sync);

/// Dense local system; unknowns are `[u1, u2, alpha...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSystem {
    pub n: usize,
    pub matrix: [[f64; 4]; 4],
    pub rhs: [f64; 4],
    /// Apex direction for the constrained (n = 3) case.
    pub apex_direction: Option<[f64; 2]>,
}

// local node numbering
const B: usize = 0;
const R: usize = 1;
const T: usize = 2;
const L: usize = 3;

#[derive(Clone, Copy)]
enum Test {
    Const([f64; 2]),
    Hat(usize),
}

struct Triangle {
    v: [usize; 3],
    region: Region,
    /// ∂φ/∂x, ∂φ/∂t for the three vertices
    grad: [[f64; 2]; 3],
    area: f64,
    boundary_edges: [Option<(usize, usize)>; 3],
}

struct TentGeometry {
    coords: [[f64; 2]; 4],
    triangles: Vec<Triangle>,
    c: f64,
}

impl TentGeometry {
    fn new(tent: &Tent, material: &TentMaterial) -> Self {
        let mut coords = [[0.0; 2]; 4];
        coords[B] = tent.bottom();
        coords[T] = tent.apex();
        let mut triangles = Vec::with_capacity(2);
        if let Some(r) = tent.right_vertex() {
            coords[R] = r;
            let pole_is_boundary = tent.tent_type == TentType::Left;
            triangles.push(Self::triangle(
                &coords,
                [B, R, T],
                material.right,
                [Some((B, R)), Some((R, T)), pole_is_boundary.then_some((T, B))],
            ));
        }
        if let Some(l) = tent.left_vertex() {
            coords[L] = l;
            let pole_is_boundary = tent.tent_type == TentType::Right;
            triangles.push(Self::triangle(
                &coords,
                [B, T, L],
                material.left,
                [pole_is_boundary.then_some((B, T)), Some((T, L)), Some((L, B))],
            ));
        }
        Self { coords, triangles, c: material.c }
    }

    fn triangle(coords: &[[f64; 2]; 4], v: [usize; 3], region: Region, edges: [Option<(usize, usize)>; 3]) -> Triangle {
        let p = v.map(|i| coords[i]);
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grad = [[0.0; 2]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            let k = (i + 2) % 3;
            grad[i] = [(p[j][1] - p[k][1]) / area2, (p[k][0] - p[j][0]) / area2];
        }
        Triangle { v, region, grad, area: 0.5 * area2, boundary_edges: edges }
    }

    /// `𝒟(n ds)` for the edge `a -> b` of a counter-clockwise triangle.
    fn flux_matrix(&self, a: usize, b: usize, region: Region) -> [[f64; 2]; 2] {
        let dx = self.coords[b][0] - self.coords[a][0];
        let dt = self.coords[b][1] - self.coords[a][1];
        let (nx, nt) = (dt, -dx);
        [[nt * region.kappa1, -self.c * nx], [-self.c * nx, nt * region.kappa2]]
    }

    /// `Σ_edges ∫ 𝒟 z · w` for a nodal field `z` and a test function.
    fn boundary_form(&self, z: &[[f64; 2]; 4], test: Test) -> f64 {
        let mut acc = 0.0;
        for tri in &self.triangles {
            for &(a, b) in tri.boundary_edges.iter().flatten() {
                let d = self.flux_matrix(a, b, tri.region);
                let dz = |node: usize| {
                    let v = z[node];
                    [d[0][0] * v[0] + d[0][1] * v[1], d[1][0] * v[0] + d[1][1] * v[1]]
                };
                let (za, zb) = (dz(a), dz(b));
                acc += match test {
                    Test::Const(e) => 0.5 * ((za[0] + zb[0]) * e[0] + (za[1] + zb[1]) * e[1]),
                    Test::Hat(i) => {
                        // edge mass ∫ φ_a ζ and ∫ φ_b ζ
                        let m = |node: usize| -> f64 {
                            if node == T {
                                1.0 / 3.0
                            } else if a == T || b == T {
                                1.0 / 6.0
                            } else {
                                0.0
                            }
                        };
                        za[i] * m(a) + zb[i] * m(b)
                    }
                };
            }
        }
        acc
    }

    /// Coefficient of `u_m` in `-∫_K u · A w`.
    fn volume_u(&self, m: usize, test: Test) -> f64 {
        let Test::Hat(i) = test else { return 0.0 };
        let mut acc = 0.0;
        for tri in &self.triangles {
            let Some(local) = tri.v.iter().position(|&v| v == T) else { continue };
            let [zx, zt] = tri.grad[local];
            let kappa = if i == 0 { tri.region.kappa1 } else { tri.region.kappa2 };
            acc += if m == i {
                -tri.area * kappa * zt
            } else {
                tri.area * self.c * zx
            };
        }
        acc
    }

    /// `∫_K f · w` with the edge-midpoint rule (exact for quadratics).
    fn source(&self, f: Source<'_>, test: Test) -> f64 {
        let mut acc = 0.0;
        for tri in &self.triangles {
            for e in 0..3 {
                let a = tri.v[e];
                let b = tri.v[(e + 1) % 3];
                let x = 0.5 * (self.coords[a][0] + self.coords[b][0]);
                let t = 0.5 * (self.coords[a][1] + self.coords[b][1]);
                let fv = f(x, t);
                let w = tri.area / 3.0;
                acc += w * match test {
                    Test::Const(k) => fv[0] * k[0] + fv[1] * k[1],
                    Test::Hat(i) => {
                        let zeta = 0.5 * ((a == T) as u8 as f64 + (b == T) as u8 as f64);
                        fv[i] * zeta
                    }
                };
            }
        }
        acc
    }
}

/// Assemble the tent system for arbitrary piecewise-constant materials.
pub fn assemble(
    tent: &Tent,
    inflow: &TentInflow,
    material: &TentMaterial,
    source: Option<Source<'_>>,
    constraint: BoundaryConstraint,
) -> Result<LocalSystem> {
    tent.validate()?;
    check_inflow(tent, inflow)?;
    let geo = TentGeometry::new(tent, material);
    let mut z_in = [[0.0; 2]; 4];
    z_in[B] = inflow.bottom;
    if let Some(v) = inflow.right {
        z_in[R] = v;
    }
    if let Some(v) = inflow.left {
        z_in[L] = v;
    }

    let direction = constraint.null_vector();
    if direction.is_some() && tent.tent_type == TentType::Interior {
        return Err(Error::InvalidTent("boundary constraint given for an interior tent".into()));
    }
    if direction.is_none() && tent.tent_type != TentType::Interior {
        return Err(Error::InvalidTent("boundary tent needs a boundary constraint".into()));
    }
    let (tests, apex_basis): (Vec<Test>, Vec<[f64; 2]>) = match direction {
        None => (
            vec![Test::Const([1.0, 0.0]), Test::Const([0.0, 1.0]), Test::Hat(0), Test::Hat(1)],
            vec![[1.0, 0.0], [0.0, 1.0]],
        ),
        Some(e) => (vec![Test::Const(e), Test::Hat(0), Test::Hat(1)], vec![e]),
    };
    let n = tests.len();
    let mut matrix = [[0.0; 4]; 4];
    let mut rhs = [0.0; 4];
    for (row, &test) in tests.iter().enumerate() {
        matrix[row][0] = geo.volume_u(0, test);
        matrix[row][1] = geo.volume_u(1, test);
        for (j, e) in apex_basis.iter().enumerate() {
            let mut z = [[0.0; 2]; 4];
            z[T] = *e;
            matrix[row][2 + j] = geo.boundary_form(&z, test);
        }
        rhs[row] = -geo.boundary_form(&z_in, test);
        if let Some(f) = source {
            rhs[row] += geo.source(f, test);
        }
    }
    Ok(LocalSystem { n, matrix, rhs, apex_direction: direction })
}

fn check_inflow(tent: &Tent, inflow: &TentInflow) -> Result<()> {
    if tent.has_left() != inflow.left.is_some() || tent.has_right() != inflow.right.is_some() {
        return Err(Error::InvalidTent("inflow values do not match the tent type".into()));
    }
    Ok(())
}

impl LocalSystem {
    pub fn solve(&self) -> Result<TentSolution> {
        let y = lu_solve(self.n, &self.matrix, &self.rhs)?;
        let apex = match self.apex_direction {
            None => [y[2], y[3]],
            Some(e) => [y[2] * e[0], y[2] * e[1]],
        };
        Ok(TentSolution { apex, u: [y[0], y[1]] })
    }

    /// Smallest pivot magnitude of the partially pivoted factorization
    /// relative to the infinity norm of the matrix.
    pub fn relative_min_pivot(&self) -> f64 {
        let (pivots, _) = lu_factor(self.n, &self.matrix);
        let norm = inf_norm(self.n, &self.matrix);
        pivots.iter().take(self.n).fold(f64::INFINITY, |m, p| m.min(p.abs())) / norm
    }

    /// `‖A‖∞ ‖A⁻¹‖∞`, infinite when singular.
    pub fn condition_estimate(&self) -> f64 {
        let mut inv_norm: f64 = 0.0;
        let mut cols = [[0.0; 4]; 4];
        for j in 0..self.n {
            let mut e = [0.0; 4];
            e[j] = 1.0;
            match lu_solve(self.n, &self.matrix, &e) {
                Ok(col) => cols[j] = col,
                Err(_) => return f64::INFINITY,
            }
        }
        for i in 0..self.n {
            inv_norm = inv_norm.max((0..self.n).map(|j| cols[j][i].abs()).sum());
        }
        inf_norm(self.n, &self.matrix) * inv_norm
    }
}

fn inf_norm(n: usize, a: &[[f64; 4]; 4]) -> f64 {
    (0..n).map(|i| (0..n).map(|j| a[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// In-place LU with partial pivoting; returns the pivots and the factored matrix with row swaps applied.
fn lu_factor(n: usize, a: &[[f64; 4]; 4]) -> ([f64; 4], ([[f64; 4]; 4], [usize; 4])) {
    let mut m = *a;
    let mut perm = [0, 1, 2, 3];
    let mut pivots = [0.0; 4];
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, p);
        perm.swap(col, p);
        pivots[col] = m[col][col];
        if m[col][col] == 0.0 {
            continue;
        }
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            m[row][col] = f;
            for k in col + 1..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    (pivots, (m, perm))
}

fn lu_solve(n: usize, a: &[[f64; 4]; 4], b: &[f64; 4]) -> Result<[f64; 4]> {
    let (pivots, (m, perm)) = lu_factor(n, a);
    let norm = inf_norm(n, a);
    let min_pivot = pivots.iter().take(n).fold(f64::INFINITY, |acc, p| acc.min(p.abs()));
    if !(min_pivot > SINGULAR_PIVOT * norm) {
        let max_pivot = pivots.iter().take(n).fold(0.0f64, |acc, p| acc.max(p.abs()));
        return Err(Error::SingularSystem { condition: max_pivot / min_pivot });
    }
    let mut y = [0.0; 4];
    for i in 0..n {
        y[i] = b[perm[i]] - (0..i).map(|k| m[i][k] * y[k]).sum::<f64>();
    }
    for i in (0..n).rev() {
        y[i] = (y[i] - (i + 1..n).map(|k| m[i][k] * y[k]).sum::<f64>()) / m[i][i];
    }
    Ok(y)
}

/// General tent solve: heterogeneous materials, optional source, boundary constraint.
pub fn solve_tent_assembled(
    tent: &Tent,
    inflow: &TentInflow,
    material: &TentMaterial,
    source: Option<Source<'_>>,
    constraint: BoundaryConstraint,
) -> Result<TentSolution> {
    assemble(tent, inflow, material, source, constraint)?.solve()
}

/// Propagation formula for homogeneous media (`k1 = k2 = 1`) without source.
///
/// Type I: `w1 = (h_r+h_l) k / D`, `w2 = c k^2 (p_r-p_l) / D` with
/// `D = (h_r+h_l)^2 - c^2 k^2 (p_r-p_l)^2`. Type L and R use
/// `w1 = k / (2 (c k (1-p) + h))` and `w2 = ±w1`.
///
/// The boundary formulas keep `U - V` (Type L) or `U + V` (Type R) of the
/// bottom node, so they agree with the constrained solve only when the
/// bottom value already satisfies the unit-impedance condition.
pub fn solve_tent_closed_form(tent: &Tent, inflow: &TentInflow, c: f64) -> Result<[f64; 2]> {
    tent.validate()?;
    check_inflow(tent, inflow)?;
    let b = inflow.bottom;
    let (w1, w2, diff) = match tent.tent_type {
        TentType::Interior => {
            let l = inflow.left.unwrap();
            let r = inflow.right.unwrap();
            let hs = tent.h_r + tent.h_l;
            let dp = tent.p_r - tent.p_l;
            let den = hs * hs - c * c * tent.k * tent.k * dp * dp;
            if !(den > 0.0) {
                return Err(Error::CflViolation(format!("Type I weight denominator {den:.3e} <= 0")));
            }
            (hs * tent.k / den, c * tent.k * tent.k * dp / den, [r[0] - l[0], r[1] - l[1]])
        }
        TentType::Left => {
            let r = inflow.right.unwrap();
            let den = 2.0 * (c * tent.k * (1.0 - tent.p_r) + tent.h_r);
            if !(den > 0.0) {
                return Err(Error::CflViolation(format!("Type L weight denominator {den:.3e} <= 0")));
            }
            let w1 = tent.k / den;
            (w1, w1, [r[0] - b[0], r[1] - b[1]])
        }
        TentType::Right => {
            let l = inflow.left.unwrap();
            let den = 2.0 * (c * tent.k * (1.0 - tent.p_l) + tent.h_l);
            if !(den > 0.0) {
                return Err(Error::CflViolation(format!("Type R weight denominator {den:.3e} <= 0")));
            }
            let w1 = tent.k / den;
            (w1, -w1, [b[0] - l[0], b[1] - l[1]])
        }
    };
    Ok([
        b[0] + w1 * c * diff[1] + w2 * c * diff[0],
        b[1] + w1 * c * diff[0] + w2 * c * diff[1],
    ])
}
