//! Spatial mesh, piecewise-constant materials and the geometry of a single tent.
//!
//! A tent is pitched at a spatial vertex: its pole rises from `t_bottom` to
//! `t_bottom + k`. On each side it reaches the neighbouring vertex, which
//! sits at time `t_apex - p * k`, so `p * k` is the vertical rise of the
//! outflow edge from that neighbour to the apex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default CFL margin.
pub const DEFAULT_MARGIN: f64 = 0.99;

/// Relative slack allowed when comparing a CFL ratio against the margin.
/// Pole heights computed at exactly the margin pick up a few ulps of rounding.
const CFL_ROUNDING_SLACK: f64 = 1e-12;

/// Strictly increasing vertex coordinates with one material region per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMesh {
    vertices: Vec<f64>,
    regions: Vec<usize>,
}

impl SpatialMesh {
    pub fn new(vertices: Vec<f64>, regions: Vec<usize>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidMesh("at least two vertices are required".into()));
        }
        if let Some(i) = vertices.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidMesh(format!(
                "vertices must be strictly increasing (violated at index {})",
                i + 1
            )));
        }
        if vertices.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMesh("vertex coordinates must be finite".into()));
        }
        if regions.len() != vertices.len() - 1 {
            return Err(Error::InvalidMesh(format!(
                "expected {} cell regions, got {}",
                vertices.len() - 1,
                regions.len()
            )));
        }
        Ok(Self { vertices, regions })
    }

    /// `n_cells` equal cells on `[0, length]`, all in region 0.
    pub fn uniform(length: f64, n_cells: usize) -> Result<Self> {
        if n_cells == 0 || !(length > 0.0) {
            return Err(Error::InvalidMesh("uniform mesh needs n_cells > 0 and length > 0".into()));
        }
        let h = length / n_cells as f64;
        let mut vertices: Vec<f64> = (0..=n_cells).map(|i| i as f64 * h).collect();
        vertices[n_cells] = length;
        Self::new(vertices, vec![0; n_cells])
    }

    /// Piecewise-uniform mesh. Each segment `(end, h, region)` continues from
    /// the previous end with cells of size close to `h` that fit exactly.
    pub fn piecewise_uniform(start: f64, segments: &[(f64, f64, usize)]) -> Result<Self> {
        let mut vertices = vec![start];
        let mut regions = Vec::new();
        let mut left = start;
        for &(end, h, region) in segments {
            if !(end > left) || !(h > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "segment ending at {end} must extend past {left} with h > 0"
                )));
            }
            let n = ((end - left) / h).round().max(1.0) as usize;
            let dx = (end - left) / n as f64;
            for i in 1..=n {
                vertices.push(if i == n { end } else { left + i as f64 * dx });
                regions.push(region);
            }
            left = end;
        }
        Self::new(vertices, regions)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            vertices: Vec<f64>,
            regions: Vec<usize>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::new(raw.vertices, raw.regions)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mesh serialization cannot fail")
    }

    pub fn vertices(&self) -> &[f64] {
        &self.vertices
    }

    pub fn regions(&self) -> &[usize] {
        &self.regions
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.regions.len()
    }

    pub fn x(&self, vertex: usize) -> f64 {
        self.vertices[vertex]
    }

    pub fn length(&self) -> f64 {
        self.vertices[self.vertices.len() - 1] - self.vertices[0]
    }

    pub fn cell_size(&self, cell: usize) -> f64 {
        self.vertices[cell + 1] - self.vertices[cell]
    }

    /// Cell containing `x`, with right-continuity except at the last vertex.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let n = self.n_cells();
        if x < self.vertices[0] || x > self.vertices[n] {
            return None;
        }
        let idx = self.vertices.partition_point(|&v| v <= x);
        Some(idx.saturating_sub(1).min(n - 1))
    }

    /// (left cell, right cell) around a vertex.
    pub fn adjacent_cells(&self, vertex: usize) -> (Option<usize>, Option<usize>) {
        let left = vertex.checked_sub(1);
        let right = (vertex < self.n_cells()).then_some(vertex);
        (left, right)
    }
}

/// Material constants of one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl Region {
    pub const UNIT: Region = Region { kappa1: 1.0, kappa2: 1.0 };

    pub fn is_unit(&self) -> bool {
        self.kappa1 == 1.0 && self.kappa2 == 1.0
    }

    /// Matched (reflectionless) impedance parameter.
    pub fn matched_impedance(&self) -> f64 {
        (self.kappa1 / self.kappa2).sqrt()
    }
}

/// Global wave constant `c` and per-region `(kappa1, kappa2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub c: f64,
    pub regions: Vec<Region>,
}

impl Material {
    pub fn new(c: f64, regions: Vec<Region>) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidMaterial(format!("c must be positive, got {c}")));
        }
        if regions.is_empty() {
            return Err(Error::InvalidMaterial("at least one region is required".into()));
        }
        for (i, r) in regions.iter().enumerate() {
            if !(r.kappa1 > 0.0 && r.kappa2 > 0.0) || !r.kappa1.is_finite() || !r.kappa2.is_finite() {
                return Err(Error::InvalidMaterial(format!(
                    "region {i}: kappa1 and kappa2 must be positive"
                )));
            }
        }
        Ok(Self { c, regions })
    }

    pub fn homogeneous(c: f64) -> Self {
        Self::new(c, vec![Region::UNIT]).expect("valid homogeneous material")
    }

    /// Local wave speed `c / sqrt(kappa1 kappa2)`.
    pub fn wave_speed(&self, region: usize) -> f64 {
        let r = self.regions[region];
        self.c / (r.kappa1 * r.kappa2).sqrt()
    }

    pub fn check_mesh(&self, mesh: &SpatialMesh) -> Result<()> {
        if let Some(&bad) = mesh.regions().iter().find(|&&r| r >= self.regions.len()) {
            return Err(Error::InvalidMaterial(format!(
                "mesh references region {bad} but only {} are defined",
                self.regions.len()
            )));
        }
        Ok(())
    }

    pub fn side_speeds(&self, mesh: &SpatialMesh, vertex: usize) -> SideSpeeds {
        let (l, r) = mesh.adjacent_cells(vertex);
        SideSpeeds {
            left: l.map(|c| self.wave_speed(mesh.regions()[c])),
            right: r.map(|c| self.wave_speed(mesh.regions()[c])),
        }
    }

    pub fn side_regions(&self, mesh: &SpatialMesh, vertex: usize) -> (Option<Region>, Option<Region>) {
        let (l, r) = mesh.adjacent_cells(vertex);
        (
            l.map(|c| self.regions[mesh.regions()[c]]),
            r.map(|c| self.regions[mesh.regions()[c]]),
        )
    }
}

/// Local wave speeds of the cells left and right of a pole.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SideSpeeds {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

impl SideSpeeds {
    pub fn uniform(c: f64) -> Self {
        Self { left: Some(c), right: Some(c) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TentType {
    /// Two triangles, pole in the interior.
    #[serde(rename = "I")]
    Interior,
    /// Pole on the left domain boundary; right triangle only.
    #[serde(rename = "L")]
    Left,
    /// Pole on the right domain boundary; left triangle only.
    #[serde(rename = "R")]
    Right,
}

/// One space-time tent over a spatial vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tent {
    pub center: usize,
    #[serde(rename = "type")]
    pub tent_type: TentType,
    /// Pole location.
    pub x: f64,
    pub t_bottom: f64,
    /// Pole height.
    pub k: f64,
    pub h_l: f64,
    pub h_r: f64,
    pub p_l: f64,
    pub p_r: f64,
}

impl Tent {
    pub fn t_apex(&self) -> f64 {
        self.t_bottom + self.k
    }

    pub fn has_left(&self) -> bool {
        self.tent_type != TentType::Left
    }

    pub fn has_right(&self) -> bool {
        self.tent_type != TentType::Right
    }

    pub fn bottom(&self) -> [f64; 2] {
        [self.x, self.t_bottom]
    }

    pub fn apex(&self) -> [f64; 2] {
        [self.x, self.t_apex()]
    }

    pub fn left_vertex(&self) -> Option<[f64; 2]> {
        self.has_left()
            .then(|| [self.x - self.h_l, self.t_apex() - self.p_l * self.k])
    }

    pub fn right_vertex(&self) -> Option<[f64; 2]> {
        self.has_right()
            .then(|| [self.x + self.h_r, self.t_apex() - self.p_r * self.k])
    }

    pub fn n_triangles(&self) -> usize {
        match self.tent_type {
            TentType::Interior => 2,
            _ => 1,
        }
    }

    /// Space-time area: each side triangle has base `k` (the pole) and height `h`.
    pub fn area(&self) -> f64 {
        let mut a = 0.0;
        if self.has_left() {
            a += 0.5 * self.k * self.h_l;
        }
        if self.has_right() {
            a += 0.5 * self.k * self.h_r;
        }
        a
    }

    /// Counter-clockwise triangles `[bottom, right, apex]` and `[bottom, apex, left]`.
    pub fn triangles(&self) -> Vec<[[f64; 2]; 3]> {
        let mut out = Vec::with_capacity(2);
        if let Some(r) = self.right_vertex() {
            out.push([self.bottom(), r, self.apex()]);
        }
        if let Some(l) = self.left_vertex() {
            out.push([self.bottom(), self.apex(), l]);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidTent(format!("pole height must be positive, got {}", self.k)));
        }
        if self.h_l < 0.0 || self.h_r < 0.0 || !self.h_l.is_finite() || !self.h_r.is_finite() {
            return Err(Error::InvalidTent("half-widths must be nonnegative".into()));
        }
        let consistent = match self.tent_type {
            TentType::Interior => self.h_l > 0.0 && self.h_r > 0.0,
            TentType::Left => self.h_l == 0.0 && self.h_r > 0.0,
            TentType::Right => self.h_r == 0.0 && self.h_l > 0.0,
        };
        if !consistent {
            return Err(Error::InvalidTent(format!(
                "type {:?} inconsistent with h_l={}, h_r={}",
                self.tent_type, self.h_l, self.h_r
            )));
        }
        for (side, present, p) in [("left", self.has_left(), self.p_l), ("right", self.has_right(), self.p_r)] {
            if present && !p.is_finite() {
                return Err(Error::InvalidTent(format!("{side} slope fraction must be finite, got {p}")));
            }
        }
        Ok(())
    }

    /// `|c k p / h|` per present side.
    pub fn cfl_ratios(&self, speeds: SideSpeeds) -> (Option<f64>, Option<f64>) {
        let left = self
            .has_left()
            .then(|| (speeds.left.unwrap_or(0.0) * self.k * self.p_l / self.h_l).abs());
        let right = self
            .has_right()
            .then(|| (speeds.right.unwrap_or(0.0) * self.k * self.p_r / self.h_r).abs());
        (left, right)
    }
}

/// CFL admissibility of a tent: every present side satisfies `|c k p / h| <= margin`.
pub fn cfl_admissible(tent: &Tent, speeds: SideSpeeds, margin: f64) -> Result<bool> {
    tent.validate()?;
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidTent(format!("margin must lie in (0, 1], got {margin}")));
    }
    if (tent.has_left() && speeds.left.is_none()) || (tent.has_right() && speeds.right.is_none()) {
        return Err(Error::InvalidTent("missing wave speed for a present side".into()));
    }
    let limit = margin * (1.0 + CFL_ROUNDING_SLACK);
    let (l, r) = tent.cfl_ratios(speeds);
    Ok(l.is_none_or(|v| v <= limit) && r.is_none_or(|v| v <= limit))
}

/// Largest pole height at `center` that keeps the tent CFL-admissible given
/// the current front times of the neighbouring vertices.
///
/// On a side with speed `c` and width `h`, `c (t_apex - t_neighbour) <= margin h`,
/// so `k <= t_neighbour - t_center + margin h / c`.
pub fn max_pole_height(
    center: usize,
    front_times: &[f64],
    mesh: &SpatialMesh,
    material: &Material,
    margin: f64,
) -> Result<f64> {
    let n = mesh.n_vertices();
    if center >= n || front_times.len() != n {
        return Err(Error::NoAdmissiblePole {
            vertex: center,
            reason: "vertex index or front length does not match the mesh".into(),
        });
    }
    let speeds = material.side_speeds(mesh, center);
    let tc = front_times[center];
    let mut k = f64::INFINITY;
    if let Some(c) = speeds.left {
        let h = mesh.x(center) - mesh.x(center - 1);
        k = k.min(front_times[center - 1] - tc + margin * h / c);
    }
    if let Some(c) = speeds.right {
        let h = mesh.x(center + 1) - mesh.x(center);
        k = k.min(front_times[center + 1] - tc + margin * h / c);
    }
    if !k.is_finite() {
        return Err(Error::NoAdmissiblePole { vertex: center, reason: "isolated vertex".into() });
    }
    if k <= 0.0 {
        return Err(Error::NoAdmissiblePole {
            vertex: center,
            reason: format!("a neighbour lies too far below the vertex (k_max = {k:.3e})"),
        });
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent(tent_type: TentType, k: f64, h_l: f64, h_r: f64, p_l: f64, p_r: f64) -> Tent {
        Tent { center: 1, tent_type, x: 0.5, t_bottom: 0.0, k, h_l, h_r, p_l, p_r }
    }

    #[test]
    fn cfl_uniform_stencil_ratio() {
        let h = 0.0025;
        let t = tent(TentType::Interior, 0.9 * h, h, h, 1.0, 1.0);
        assert!(cfl_admissible(&t, SideSpeeds::uniform(1.0), 0.99).unwrap());
    }

    #[test]
    fn cfl_strict_boundary_fails() {
        let h = 0.01;
        let t = tent(TentType::Left, h, 0.0, h, 0.0, 1.0);
        let s = SideSpeeds { left: None, right: Some(1.0) };
        assert!(!cfl_admissible(&t, s, 0.99).unwrap());
    }

    #[test]
    fn cfl_type_l_formula() {
        // |2 * 0.3 * 0.5 / 0.4| = 0.75
        let t = tent(TentType::Left, 0.3, 0.0, 0.4, 0.0, 0.5);
        let s = SideSpeeds { left: None, right: Some(2.0) };
        assert!((t.cfl_ratios(s).1.unwrap() - 0.75).abs() < 1e-15);
        assert!(cfl_admissible(&t, s, 0.99).unwrap());
        // the left side is skipped entirely, even with an absurd p_l
        let mut t2 = t;
        t2.p_l = 100.0;
        assert!(cfl_admissible(&t2, s, 0.99).unwrap());
    }

    #[test]
    fn invalid_geometry_is_reported() {
        let s = SideSpeeds::uniform(1.0);
        assert!(matches!(
            cfl_admissible(&tent(TentType::Interior, 0.0, 0.1, 0.1, 1.0, 1.0), s, 0.99),
            Err(Error::InvalidTent(_))
        ));
        assert!(matches!(
            cfl_admissible(&tent(TentType::Interior, 0.1, -0.1, 0.1, 1.0, 1.0), s, 0.99),
            Err(Error::InvalidTent(_))
        ));
        assert!(matches!(
            cfl_admissible(&tent(TentType::Left, 0.1, 0.1, 0.1, 1.0, 1.0), s, 0.99),
            Err(Error::InvalidTent(_))
        ));
    }

    #[test]
    fn max_pole_flat_front() {
        let mesh = SpatialMesh::uniform(0.04, 4).unwrap();
        let mat = Material::homogeneous(1.0);
        let front = vec![0.0; 5];
        let k = max_pole_height(2, &front, &mesh, &mat, 0.9).unwrap();
        assert!((k - 0.009).abs() < 1e-15);
    }

    #[test]
    fn max_pole_grows_with_higher_neighbour() {
        let mesh = SpatialMesh::uniform(0.04, 4).unwrap();
        let mat = Material::homogeneous(1.0);
        let flat = max_pole_height(2, &[0.0; 5], &mesh, &mat, 0.9).unwrap();
        let raised = max_pole_height(2, &[0.0, 0.003, 0.0, 0.003, 0.0], &mesh, &mat, 0.9).unwrap();
        assert!(raised > flat);
        assert!((raised - (0.003 + 0.009)).abs() < 1e-15);
    }

    #[test]
    fn max_pole_boundary_is_one_sided() {
        let mesh = SpatialMesh::new(vec![0.0, 0.01, 0.03], vec![0, 0]).unwrap();
        let mat = Material::homogeneous(1.0);
        // left boundary vertex only sees the right cell
        let k0 = max_pole_height(0, &[0.0, 0.0, 0.0], &mesh, &mat, 0.9).unwrap();
        assert!((k0 - 0.009).abs() < 1e-15);
        let k2 = max_pole_height(2, &[0.0, 0.0, 0.0], &mesh, &mat, 0.9).unwrap();
        assert!((k2 - 0.018).abs() < 1e-15);
    }

    #[test]
    fn interface_vertex_uses_side_speeds() {
        let mesh = SpatialMesh::new(vec![0.0, 0.01, 0.02], vec![0, 1]).unwrap();
        let mat = Material::new(
            1.0,
            vec![Region { kappa1: 2.0, kappa2: 2.0 }, Region::UNIT],
        )
        .unwrap();
        let s = mat.side_speeds(&mesh, 1);
        assert_eq!(s.left, Some(0.5));
        assert_eq!(s.right, Some(1.0));
        let k = max_pole_height(1, &[0.0; 3], &mesh, &mat, 0.9).unwrap();
        assert!((k - 0.009).abs() < 1e-15);
    }

    #[test]
    fn mesh_validation_and_json() {
        assert!(SpatialMesh::new(vec![0.0], vec![]).is_err());
        assert!(SpatialMesh::new(vec![0.0, 0.0], vec![0]).is_err());
        assert!(SpatialMesh::new(vec![0.0, 1.0], vec![]).is_err());
        let m = SpatialMesh::from_json(r#"{"vertices":[0,0.5,1],"regions":[0,1]}"#).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(SpatialMesh::from_json(&m.to_json()).unwrap(), m);
        assert_eq!(m.locate(0.25), Some(0));
        assert_eq!(m.locate(0.5), Some(1));
        assert_eq!(m.locate(1.0), Some(1));
        assert_eq!(m.locate(1.5), None);
    }

    #[test]
    fn piecewise_uniform_hits_breakpoints() {
        let m = SpatialMesh::piecewise_uniform(0.0, &[(0.5, 1e-3, 0), (1.0, 2e-3, 1)]).unwrap();
        assert_eq!(m.n_cells(), 750);
        assert_eq!(m.x(500), 0.5);
        assert_eq!(m.regions()[499], 0);
        assert_eq!(m.regions()[500], 1);
    }

    #[test]
    fn material_rejects_nonpositive() {
        assert!(Material::new(0.0, vec![Region::UNIT]).is_err());
        assert!(Material::new(1.0, vec![Region { kappa1: -1.0, kappa2: 1.0 }]).is_err());
    }
}
