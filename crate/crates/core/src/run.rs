//! Drivers behind the command-line entry points.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::constraints::obstacle_volume;
use crate::derivcheck::{check_jacobian, probe_state, JacobianCheck};
use crate::error::Result;
use crate::fem::{FESpace, Field};
use crate::flow::{dissipation, inflow_values, solve_state, StateSolution};
use crate::kkt::{KKTState, KktParams, KktSystem};
use crate::mesh::{load_gmsh, mesh_quality, QualityReport, TriMesh};
use crate::output::{write_deformed_vtk, write_history, write_vtk, NewtonLog, VtkFields};
use crate::solver::{continuation, ContinuationLog};

pub const HISTORY_FILE: &str = "history.csv";
pub const NEWTON_FILE: &str = "newton.csv";
pub const SOLUTION_FILE: &str = "solution.vtk";
pub const DEFORMED_FILE: &str = "deformed.vtk";
pub const STATE_FILE: &str = "state.vtk";

/// Mesh, inflow data and assembled operators for one config.
pub struct Problem {
    pub config: RunConfig,
    pub g_in: Field,
    pub system: KktSystem,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mesh = load_gmsh(&config.mesh, &config.tags)?;
        Problem::from_mesh(config, &mesh)
    }

    pub fn from_mesh(config: &RunConfig, mesh: &TriMesh) -> Result<Self> {
        let g_in = inflow_values(mesh, &config.inflow);
        let system = KktSystem::new(mesh, config.setup(), &g_in)?;
        Ok(Problem {
            config: config.clone(),
            g_in,
            system,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.system.mesh()
    }
}

#[derive(Debug)]
pub struct OptimizeOutcome {
    pub log: ContinuationLog,
    pub history: PathBuf,
    pub newton_log: PathBuf,
    /// Written only when at least one problem was accepted.
    pub solution: Option<PathBuf>,
}

/// Runs the continuation and writes history, Newton log and final fields
/// into `out_dir`.
pub fn optimize(problem: &Problem, out_dir: &Path) -> Result<OptimizeOutcome> {
    let newton_path = out_dir.join(NEWTON_FILE);
    let mut newton = NewtonLog::create(&newton_path)?;
    let mut io_error = None;
    let log = continuation(
        &problem.system,
        &problem.config.continuation(),
        &mut |k, a, it| {
            if io_error.is_none() {
                io_error = newton.record(k, a, it).err();
            }
        },
    )?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let history = out_dir.join(HISTORY_FILE);
    write_history(&log, &history)?;
    let solution = match log.final_state() {
        Some(st) => {
            write_state(problem.mesh(), st, out_dir)?;
            Some(out_dir.join(SOLUTION_FILE))
        }
        None => None,
    };
    Ok(OptimizeOutcome {
        log,
        history,
        newton_log: newton_path,
        solution,
    })
}

fn write_state(mesh: &TriMesh, st: &KKTState, out_dir: &Path) -> Result<()> {
    let f = VtkFields {
        w: &st.w,
        v: &st.v,
        p: &st.p,
    };
    write_vtk(mesh, &f, out_dir.join(SOLUTION_FILE))?;
    write_deformed_vtk(mesh, &f, out_dir.join(DEFORMED_FILE))
}

#[derive(Debug, Clone, Serialize)]
pub struct StateSummary {
    pub dissipation: f64,
    pub obstacle_volume: f64,
    pub residual: f64,
    pub rhs_norm: f64,
}

/// Stokes solve on the undeformed mesh (`w = 0`).
pub fn reference_state(problem: &Problem) -> Result<(StateSolution, StateSummary)> {
    let mesh = problem.mesh();
    let degree = problem.config.quadrature_degree;
    let w = Field::zeros(FESpace::volume_p1_vector(mesh));
    let s = solve_state(mesh, &w, &problem.g_in, degree)?;
    let summary = StateSummary {
        dissipation: dissipation(mesh, &w, &s.v, degree)?,
        obstacle_volume: obstacle_volume(mesh)?,
        residual: s.residual,
        rhs_norm: s.rhs_norm,
    };
    Ok((s, summary))
}

pub fn solve_state_to(problem: &Problem, out_dir: &Path) -> Result<StateSummary> {
    let (s, summary) = reference_state(problem)?;
    let mesh = problem.mesh();
    let w = Field::zeros(FESpace::volume_p1_vector(mesh));
    let f = VtkFields {
        w: &w,
        v: &s.v,
        p: &s.p,
    };
    write_vtk(mesh, &f, out_dir.join(STATE_FILE))?;
    Ok(summary)
}

pub const CHECK_DIRECTIONS: usize = 20;
pub const CHECK_STEP: f64 = 1e-6;
const PROBE_SEED: u64 = 2024;
const PROBE_W_SCALE: f64 = 1e-3;

/// Jacobian checks at a fixed probe state, once with the configured `η`
/// (penalty inactive everywhere) and once with `η = 2` (active everywhere).
pub fn check_derivatives(problem: &Problem) -> Result<Vec<(KktParams, JacobianCheck)>> {
    let sys = &problem.system;
    let st = probe_state(sys, PROBE_SEED, PROBE_W_SCALE)?;
    let base = problem.config.params(problem.config.alpha_init);
    let mut out = Vec::new();
    for eta in [base.eta, 2.0] {
        let params = KktParams { eta, ..base };
        let c = check_jacobian(sys, &st, &params, CHECK_DIRECTIONS, CHECK_STEP)?;
        out.push((params, c));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshInfo {
    pub vertices: usize,
    pub triangles: usize,
    pub edges: usize,
    pub design_edges: usize,
    pub obstacle_volume: f64,
    pub quality: QualityReport,
}

pub fn mesh_info(mesh: &TriMesh) -> Result<MeshInfo> {
    let w = Field::zeros(FESpace::volume_p1_vector(mesh));
    Ok(MeshInfo {
        vertices: mesh.n_vertices(),
        triangles: mesh.n_triangles(),
        edges: mesh.n_edges(),
        design_edges: mesh.design_loop().len(),
        obstacle_volume: obstacle_volume(mesh)?,
        quality: mesh_quality(mesh, &w)?,
    })
}
