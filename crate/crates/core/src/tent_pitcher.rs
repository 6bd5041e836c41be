//! Causally ordered tent meshes over a 1D spatial mesh.
//!
//! Tents are stored in the order they were pitched; that order is a valid
//! marching order. Space-time vertices are numbered so that the initial
//! front (t = 0) occupies ids `0..n_spatial` and every tent adds exactly one
//! vertex, its apex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh1d::{cfl_admissible, max_pole_height, Material, SpatialMesh, Tent, TentType, DEFAULT_MARGIN};

/// Fraction of the slab height below which two front times count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// A pole that would leave a gap to the slab top smaller than this fraction
/// of its own height is halved instead, so that no sliver tents appear.
const SLIVER_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpaceTimeVertex {
    pub spatial: usize,
    pub t: f64,
}

/// Vertex ids of a tent. `left`/`right` are absent for boundary tents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TentNodes {
    pub bottom: usize,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub apex: usize,
}

impl TentNodes {
    pub fn inflow(&self) -> impl Iterator<Item = usize> {
        [Some(self.bottom), self.left, self.right].into_iter().flatten()
    }
}

/// Current time and nodal values at every spatial vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct FrontState {
    pub times: Vec<f64>,
    pub nodal_values: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub struct TentMesh {
    mesh: SpatialMesh,
    vertices: Vec<SpaceTimeVertex>,
    tents: Vec<Tent>,
    nodes: Vec<TentNodes>,
    slab_height: f64,
    final_front: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct PitchOptions {
    pub margin: f64,
    pub seed: u64,
    /// Safety cap on the number of pitched tents; `None` picks a generous bound.
    pub max_iterations: Option<usize>,
}

impl Default for PitchOptions {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN, seed: 0, max_iterations: None }
    }
}

struct Builder {
    mesh: SpatialMesh,
    vertices: Vec<SpaceTimeVertex>,
    tents: Vec<Tent>,
    nodes: Vec<TentNodes>,
    front: Vec<usize>,
    times: Vec<f64>,
}

impl Builder {
    fn new(mesh: SpatialMesh) -> Self {
        let n = mesh.n_vertices();
        Self {
            vertices: (0..n).map(|j| SpaceTimeVertex { spatial: j, t: 0.0 }).collect(),
            front: (0..n).collect(),
            times: vec![0.0; n],
            tents: Vec::new(),
            nodes: Vec::new(),
            mesh,
        }
    }

    fn pitch_to(&mut self, j: usize, t_apex: f64) -> Result<()> {
        let n = self.mesh.n_vertices();
        let t_bottom = self.times[j];
        let k = t_apex - t_bottom;
        if !(k > 0.0) {
            return Err(Error::InvalidTent(format!("non-positive pole at vertex {j}")));
        }
        let x = self.mesh.x(j);
        let tent_type = if j == 0 {
            TentType::Left
        } else if j == n - 1 {
            TentType::Right
        } else {
            TentType::Interior
        };
        let (h_l, p_l, left) = if j > 0 {
            (x - self.mesh.x(j - 1), (t_apex - self.times[j - 1]) / k, Some(self.front[j - 1]))
        } else {
            (0.0, 0.0, None)
        };
        let (h_r, p_r, right) = if j + 1 < n {
            (self.mesh.x(j + 1) - x, (t_apex - self.times[j + 1]) / k, Some(self.front[j + 1]))
        } else {
            (0.0, 0.0, None)
        };
        let snap = |p: f64| if p.abs() < 1e-12 { 0.0 } else { p };
        let (p_l, p_r) = (snap(p_l), snap(p_r));
        let tent = Tent { center: j, tent_type, x, t_bottom, k, h_l, h_r, p_l, p_r };
        tent.validate()?;
        let apex = self.vertices.len();
        self.vertices.push(SpaceTimeVertex { spatial: j, t: t_apex });
        self.nodes.push(TentNodes { bottom: self.front[j], left, right, apex });
        self.tents.push(tent);
        self.front[j] = apex;
        self.times[j] = t_apex;
        Ok(())
    }

    fn finish(self, slab_height: f64) -> TentMesh {
        TentMesh {
            mesh: self.mesh,
            vertices: self.vertices,
            tents: self.tents,
            nodes: self.nodes,
            slab_height,
            final_front: self.front,
        }
    }
}

/// Mesh the slab `[0, slab_height]` by repeatedly pitching the tallest
/// admissible tent at a lowest front vertex. Ties are broken with a
/// ChaCha8 stream seeded by `options.seed`. Poles that would overshoot the
/// slab top are clamped so the final front is flat.
pub fn pitch_slab(
    mesh: &SpatialMesh,
    material: &Material,
    slab_height: f64,
    options: &PitchOptions,
) -> Result<TentMesh> {
    if !(slab_height > 0.0) || !slab_height.is_finite() {
        return Err(Error::InvalidTent(format!("slab height must be positive, got {slab_height}")));
    }
    material.check_mesh(mesh)?;
    let n = mesh.n_vertices();
    let max_iterations = options.max_iterations.unwrap_or_else(|| {
        let h_min = (0..mesh.n_cells()).map(|c| mesh.cell_size(c)).fold(f64::INFINITY, f64::min);
        let c_max = (0..material.regions.len()).map(|r| material.wave_speed(r)).fold(0.0, f64::max);
        let per_vertex = (slab_height * c_max / (options.margin * h_min)).ceil() as usize + 2;
        4 * n * per_vertex + 1000
    });
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut b = Builder::new(mesh.clone());
    let tie = TIE_TOLERANCE * slab_height;
    let mut candidates = Vec::with_capacity(n);

    for _ in 0..max_iterations {
        let t_min = b.times.iter().copied().fold(f64::INFINITY, f64::min);
        if t_min >= slab_height {
            return Ok(b.finish(slab_height));
        }
        candidates.clear();
        candidates.extend((0..n).filter(|&j| b.times[j] <= t_min + tie));
        let j = candidates[rng.random_range(0..candidates.len())];
        let k = max_pole_height(j, &b.times, mesh, material, options.margin)?;
        let t_c = b.times[j];
        let gap = slab_height - (t_c + k);
        let t_apex = if gap <= 0.0 {
            slab_height
        } else if gap < SLIVER_FRACTION * k {
            t_c + 0.5 * (slab_height - t_c)
        } else {
            t_c + k
        };
        b.pitch_to(j, t_apex)?;
    }
    let front_min = b.times.iter().copied().fold(f64::INFINITY, f64::min);
    Err(Error::NoProgress { iterations: max_iterations, front_min })
}

/// The uniform stencil mesh: tents of width `h` and pole `k`, so spatial
/// vertices sit every `h/2` and time levels every `k/2`. Vertices alternate
/// between even and odd levels; interior tents are diamonds whose side
/// vertices sit at mid-pole. The first tents (even vertices) have flat
/// bottoms and pole `k/2`. Rounds continue until every vertex has reached
/// `t_final`.
pub fn uniform_stencil(length: f64, h: f64, k: f64, t_final: f64) -> Result<TentMesh> {
    let cells = (2.0 * length / h).round();
    if !(h > 0.0 && k > 0.0 && t_final > 0.0) || cells < 2.0 || ((2.0 * length / h) - cells).abs() > 1e-9 * cells {
        return Err(Error::InvalidMesh(format!(
            "uniform stencil needs 2 length/h to be an integer >= 2 (length={length}, h={h})"
        )));
    }
    let mesh = SpatialMesh::uniform(length, cells as usize)?;
    let n = mesh.n_vertices();
    let mut b = Builder::new(mesh);
    // vertex j next reaches lattice level `level[j]` (in units of k/2)
    let mut level: Vec<usize> = (0..n).map(|j| if j % 2 == 0 { 1 } else { 2 }).collect();
    let half = 0.5 * k;
    let mut parity = 0;
    loop {
        if b.times.iter().all(|&t| t >= t_final) {
            break;
        }
        for j in (parity..n).step_by(2) {
            b.pitch_to(j, level[j] as f64 * half)?;
            level[j] += 2;
        }
        parity = 1 - parity;
    }
    Ok(b.finish(f64::NAN))
}

impl TentMesh {
    pub fn spatial_mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn tents(&self) -> &[Tent] {
        &self.tents
    }

    pub fn tent_nodes(&self) -> &[TentNodes] {
        &self.nodes
    }

    pub fn vertices(&self) -> &[SpaceTimeVertex] {
        &self.vertices
    }

    pub fn n_tents(&self) -> usize {
        self.tents.len()
    }

    /// Height of one slab; NaN for meshes not produced by [`pitch_slab`].
    pub fn slab_height(&self) -> f64 {
        self.slab_height
    }

    pub fn final_front(&self) -> &[usize] {
        &self.final_front
    }

    pub fn final_times(&self) -> Vec<f64> {
        self.final_front.iter().map(|&v| self.vertices[v].t).collect()
    }

    /// Largest `t` such that `[0, S] x [0, t]` is covered by tents.
    pub fn covered_time(&self) -> f64 {
        self.final_times().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_final_front_flat(&self) -> bool {
        let t = self.final_times();
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo <= 1e-12 * hi.abs().max(1.0)
    }

    pub fn triangle_count(&self) -> usize {
        self.tents.iter().map(Tent::n_triangles).sum()
    }

    pub fn total_area(&self) -> f64 {
        self.tents.iter().map(Tent::area).sum()
    }

    /// Vertex-id triangles, counter-clockwise in (x, t).
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(self.triangle_count());
        for n in &self.nodes {
            if let Some(r) = n.right {
                out.push([n.bottom, r, n.apex]);
            }
            if let Some(l) = n.left {
                out.push([n.bottom, n.apex, l]);
            }
        }
        out
    }

    /// Smallest interior angle of any triangle, in degrees, measured in (x, t).
    pub fn min_angle_degrees(&self) -> f64 {
        let mut worst = 180.0f64;
        for tent in &self.tents {
            for tri in tent.triangles() {
                for i in 0..3 {
                    let a = tri[i];
                    let b = tri[(i + 1) % 3];
                    let c = tri[(i + 2) % 3];
                    let u = [b[0] - a[0], b[1] - a[1]];
                    let v = [c[0] - a[0], c[1] - a[1]];
                    let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                    worst = worst.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
                }
            }
        }
        worst
    }

    /// Replays the enumeration: every inflow vertex is either on the initial
    /// line or the apex of an earlier tent, and boundary tents only occur at
    /// the domain ends.
    pub fn check_causality(&self) -> Result<()> {
        let n = self.mesh.n_vertices();
        let mut resolved = vec![false; self.vertices.len()];
        resolved[..n].iter_mut().for_each(|r| *r = true);
        for (i, (tent, nodes)) in self.tents.iter().zip(&self.nodes).enumerate() {
            for v in nodes.inflow() {
                if !resolved[v] {
                    return Err(Error::OrderingViolation { tent: i, vertex: v });
                }
            }
            if resolved[nodes.apex] {
                return Err(Error::InvalidTent(format!("tent {i} re-resolves vertex {}", nodes.apex)));
            }
            let boundary_ok = match tent.tent_type {
                TentType::Left => tent.center == 0,
                TentType::Right => tent.center == n - 1,
                TentType::Interior => tent.center > 0 && tent.center < n - 1,
            };
            if !boundary_ok {
                return Err(Error::InvalidTent(format!("tent {i} has a vertical side away from the boundary")));
            }
            resolved[nodes.apex] = true;
        }
        Ok(())
    }

    /// Index of the first tent violating the CFL condition, if any.
    pub fn first_cfl_violation(&self, material: &Material, margin: f64) -> Result<Option<usize>> {
        for (i, tent) in self.tents.iter().enumerate() {
            let speeds = material.side_speeds(&self.mesh, tent.center);
            if !cfl_admissible(tent, speeds, margin)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }

    /// Concatenate `n_slabs` time-translated copies of a flat-topped slab.
    pub fn stack_slabs(&self, n_slabs: usize) -> Result<TentMesh> {
        if !self.is_final_front_flat() || !self.slab_height.is_finite() {
            let t = self.final_times();
            let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
            return Err(Error::NonFlatFront { spread: hi - lo });
        }
        if n_slabs == 0 {
            return Err(Error::InvalidTent("n_slabs must be at least 1".into()));
        }
        let n = self.mesh.n_vertices();
        let per = self.vertices.len() - n;
        let mut vertices = Vec::with_capacity(n + per * n_slabs);
        vertices.extend_from_slice(&self.vertices[..n]);
        let mut tents = Vec::with_capacity(self.tents.len() * n_slabs);
        let mut nodes = Vec::with_capacity(self.nodes.len() * n_slabs);
        let mut base: Vec<usize> = (0..n).collect();
        for s in 0..n_slabs {
            let dt = s as f64 * self.slab_height;
            let offset = vertices.len() - n;
            let map = |v: usize| if v < n { base[v] } else { v + offset };
            for v in &self.vertices[n..] {
                vertices.push(SpaceTimeVertex { spatial: v.spatial, t: v.t + dt });
            }
            for (tent, tn) in self.tents.iter().zip(&self.nodes) {
                tents.push(Tent { t_bottom: tent.t_bottom + dt, ..*tent });
                nodes.push(TentNodes {
                    bottom: map(tn.bottom),
                    left: tn.left.map(map),
                    right: tn.right.map(map),
                    apex: map(tn.apex),
                });
            }
            base = self.final_front.iter().map(|&v| map(v)).collect();
        }
        Ok(TentMesh {
            mesh: self.mesh.clone(),
            vertices,
            tents,
            nodes,
            slab_height: self.slab_height,
            final_front: base,
        })
    }

    pub fn to_export(&self) -> MeshExport {
        MeshExport {
            vertices: self.vertices.iter().map(|v| ExportVertex { x: self.mesh.x(v.spatial), t: v.t }).collect(),
            triangles: self.triangles(),
            tents: self
                .tents
                .iter()
                .enumerate()
                .map(|(order, t)| ExportTent {
                    tent_type: t.tent_type,
                    center: t.center,
                    k: t.k,
                    h_l: t.h_l,
                    h_r: t.h_r,
                    p_l: t.p_l,
                    p_r: t.p_r,
                    order,
                })
                .collect(),
            min_angle_degrees: self.min_angle_degrees(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ExportVertex {
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Serialize)]
pub struct ExportTent {
    #[serde(rename = "type")]
    pub tent_type: TentType,
    pub center: usize,
    pub k: f64,
    pub h_l: f64,
    pub h_r: f64,
    pub p_l: f64,
    pub p_r: f64,
    pub order: usize,
}

/// JSON shape of an exported mesh.
#[derive(Debug, Serialize)]
pub struct MeshExport {
    pub vertices: Vec<ExportVertex>,
    pub triangles: Vec<[usize; 3]>,
    pub tents: Vec<ExportTent>,
    pub min_angle_degrees: f64,
}
