//! JSON run configuration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ctcs_ref::{Bootstrap, CtcsProblem, UniformGrid};
use crate::error::{Error, Result};
use crate::marcher::{InitialData, MarchOptions, Problem, SolverChoice, SpaceTimeField};
use crate::mesh1d::{Material, Region, SpatialMesh, DEFAULT_MARGIN};
use crate::tent_pitcher::{pitch_slab, uniform_stencil, PitchOptions, TentMesh};
use crate::verify::Scheme;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub mesh: MeshSpec,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub bootstrap: Bootstrap,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Number of intervals of the error history, written when an exact solution is known.
    #[serde(default = "default_error_samples")]
    pub error_samples: usize,
    #[serde(default = "default_output_prefix")]
    pub output_prefix: String,
}

fn default_output_prefix() -> String {
    "tentwave".into()
}

fn default_scheme() -> Scheme {
    Scheme::Tp
}

fn default_error_samples() -> usize {
    100
}

fn default_c() -> f64 {
    1.0
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_c")]
    pub c: f64,
    pub regions: Vec<Region>,
    pub z_left: f64,
    pub z_right: f64,
    pub initial: InitialSpec,
    pub t_final: f64,
}

/// Initial data built from `g(x) = exp(-alpha (x - center)²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `u = (a1 g, a2 g)`.
    Gaussian { center: f64, alpha: f64, amplitude: [f64; 2] },
    /// `u1 = u2 = g`, moving left with exact solution `g(x + c t)`; needs
    /// a single unit region and `z = 1` at both ends.
    LeftPulse { center: f64, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    /// Greedy slab pitching, stacked up to `t_final`.
    Pitched {
        #[serde(default)]
        start: f64,
        cells: CellSpec,
        slab_height: f64,
        #[serde(default = "default_margin")]
        margin: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Uniform stencil with tent width `h` and pole `k`.
    UniformStencil { length: f64, h: f64, k: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellSpec {
    Pieces(Vec<Piece>),
    Explicit { vertices: Vec<f64>, regions: Vec<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub end: f64,
    pub h: f64,
    pub region: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverSpec {
    #[default]
    Auto,
    ClosedForm,
    Assembled,
}

impl From<SolverSpec> for SolverChoice {
    fn from(s: SolverSpec) -> Self {
        match s {
            SolverSpec::Auto => SolverChoice::Auto,
            SolverSpec::ClosedForm => SolverChoice::ClosedForm,
            SolverSpec::Assembled => SolverChoice::Assembled,
        }
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    /// Parse and validate. Parse errors carry the JSON path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        positive("problem.c", p.c)?;
        positive("problem.t_final", p.t_final)?;
        finite("problem.z_left", p.z_left)?;
        finite("problem.z_right", p.z_right)?;
        if p.regions.is_empty() {
            return Err(Error::config("problem.regions", "at least one region is required"));
        }
        for (i, r) in p.regions.iter().enumerate() {
            positive(&format!("problem.regions[{i}].kappa1"), r.kappa1)?;
            positive(&format!("problem.regions[{i}].kappa2"), r.kappa2)?;
        }
        match &p.initial {
            InitialSpec::Gaussian { center, alpha, amplitude } => {
                finite("problem.initial.center", *center)?;
                positive("problem.initial.alpha", *alpha)?;
                finite("problem.initial.amplitude[0]", amplitude[0])?;
                finite("problem.initial.amplitude[1]", amplitude[1])?;
            }
            InitialSpec::LeftPulse { center, alpha } => {
                finite("problem.initial.center", *center)?;
                positive("problem.initial.alpha", *alpha)?;
                if p.regions.len() != 1 || !p.regions[0].is_unit() {
                    return Err(Error::config("problem.initial", "left_pulse needs a single unit region"));
                }
                if p.z_left != 1.0 || p.z_right != 1.0 {
                    return Err(Error::config("problem.initial", "left_pulse needs z_left = z_right = 1"));
                }
            }
        }
        for (i, &t) in self.snapshot_times.iter().enumerate() {
            if !(t >= 0.0 && t <= p.t_final) {
                return Err(Error::config(
                    format!("snapshot_times[{i}]"),
                    format!("{t} is outside [0, {}]", p.t_final),
                ));
            }
        }
        if self.output_prefix.is_empty() {
            return Err(Error::config("output_prefix", "must not be empty"));
        }
        let material = self.material()?;
        match &self.mesh {
            MeshSpec::Pitched { start, slab_height, margin, .. } => {
                finite("mesh.start", *start)?;
                positive("mesh.slab_height", *slab_height)?;
                if !(*margin > 0.0 && *margin <= 1.0) {
                    return Err(Error::config("mesh.margin", format!("must lie in (0, 1], got {margin}")));
                }
                let mesh = self.spatial_mesh()?;
                material.check_mesh(&mesh).map_err(|e| Error::config("mesh.cells", e.to_string()))?;
                if self.scheme == Scheme::Ctcs {
                    return Err(Error::config("scheme", "ctcs needs a uniform_stencil mesh"));
                }
            }
            MeshSpec::UniformStencil { length, h, k } => {
                positive("mesh.length", *length)?;
                positive("mesh.h", *h)?;
                positive("mesh.k", *k)?;
                if p.regions.len() != 1 {
                    return Err(Error::config("problem.regions", "a uniform_stencil mesh uses a single region"));
                }
                let ac = material.wave_speed(0) * k / h;
                if ac >= 1.0 {
                    return Err(Error::config("mesh.k", format!("CFL infeasible: c k / h = {ac} must be below 1")));
                }
                if self.scheme == Scheme::Ctcs && !p.regions[0].is_unit() {
                    return Err(Error::config("problem.regions", "ctcs supports the unit region only"));
                }
            }
        }
        Ok(())
    }

    pub fn material(&self) -> Result<Material> {
        Material::new(self.problem.c, self.problem.regions.clone())
            .map_err(|e| Error::config("problem.regions", e.to_string()))
    }

    /// Spatial mesh of a pitched configuration.
    pub fn spatial_mesh(&self) -> Result<SpatialMesh> {
        match &self.mesh {
            MeshSpec::Pitched { start, cells: CellSpec::Pieces(pieces), .. } => {
                let segs: Vec<(f64, f64, usize)> = pieces.iter().map(|p| (p.end, p.h, p.region)).collect();
                SpatialMesh::piecewise_uniform(*start, &segs).map_err(|e| Error::config("mesh.cells", e.to_string()))
            }
            MeshSpec::Pitched { cells: CellSpec::Explicit { vertices, regions }, .. } => {
                SpatialMesh::new(vertices.clone(), regions.clone())
                    .map_err(|e| Error::config("mesh.cells", e.to_string()))
            }
            MeshSpec::UniformStencil { length, h, .. } => {
                let cells = (2.0 * length / h).round() as usize;
                SpatialMesh::uniform(*length, cells).map_err(|e| Error::config("mesh", e.to_string()))
            }
        }
    }

    /// Space-time mesh covering `[0, t_final]`.
    pub fn tent_mesh(&self) -> Result<TentMesh> {
        let t_final = self.problem.t_final;
        match &self.mesh {
            MeshSpec::Pitched { slab_height, margin, seed, .. } => {
                let mesh = self.spatial_mesh()?;
                let opts = PitchOptions { margin: *margin, seed: *seed, max_iterations: None };
                let slab = pitch_slab(&mesh, &self.material()?, *slab_height, &opts)?;
                let n = ((t_final / slab_height) - 1e-9).ceil().max(1.0) as usize;
                slab.stack_slabs(n)
            }
            MeshSpec::UniformStencil { length, h, k } => uniform_stencil(*length, *h, *k, t_final),
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let p = &self.problem;
        let material = self.material()?;
        Ok(match p.initial {
            InitialSpec::Gaussian { center, alpha, amplitude } => {
                let initial: InitialData = Arc::new(move |x| {
                    let g = (-alpha * (x - center) * (x - center)).exp();
                    [amplitude[0] * g, amplitude[1] * g]
                });
                Problem::new(material, p.z_left, p.z_right, initial)
            }
            InitialSpec::LeftPulse { center, alpha } => {
                Problem::left_pulse(p.c, move |y| (-alpha * (y - center) * (y - center)).exp())
            }
        })
    }

    pub fn march_options(&self) -> MarchOptions {
        MarchOptions { solver: self.solver.into(), ..MarchOptions::default() }
    }

    pub fn ctcs_grid(&self) -> Result<UniformGrid> {
        match &self.mesh {
            MeshSpec::UniformStencil { length, h, k } => UniformGrid::new(*length, *h, *k, self.problem.c),
            MeshSpec::Pitched { .. } => Err(Error::config("mesh", "ctcs needs a uniform_stencil mesh")),
        }
    }

    pub fn ctcs_problem(&self) -> Result<CtcsProblem> {
        let p = self.problem()?;
        let exact: Option<SpaceTimeField> = p.exact.clone();
        Ok(CtcsProblem { z_left: p.z_left, z_right: p.z_right, initial: p.initial, exact })
    }
}
