//! Demo runs with field export.
//!
//! `halfspace` runs a plane channel `{y < H}` with a parabolic inlet and a
//! traction-free outlet; any other geometry runs a lid-driven cavity with
//! no-slip walls on the embedded boundary.

use std::fmt::Write as _;
use std::path::Path;

use crate::assembly::{apply_mean_constraint, MeanConstraint, ProblemData};
use crate::geometry::{builtin_geometry, GeometryParams};
use crate::mesh::{BackgroundMesh, Neighbor};
use crate::quadrature::facet_rule;
use crate::Result;

use super::manufactured::{Channel, LidDriven};
use super::pipeline::{factorize_system, Discretization};
use super::{write_text, RunConfig};

pub const CHANNEL_HEIGHT: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoOptions {
    /// Peak inlet velocity (channel) or lid speed (cavity).
    pub amplitude: f64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self { amplitude: 1.0 }
    }
}

pub struct DemoResult {
    pub disc: Discretization,
    pub solution: Vec<f64>,
    pub inflow: f64,
    pub outflow: f64,
}

/// Net flux `∫ u·n` of the discrete velocity through one box face.
pub fn boundary_flux(
    disc: &Discretization,
    solution: &[f64],
    axis: usize,
    upper: bool,
    degree: usize,
) -> Result<f64> {
    let space = &disc.space;
    let full = space.interpolate_constrained(&solution[..space.num_velocity_dofs()])?;
    let sign = if upper { 1.0 } else { -1.0 };
    let mut flux = 0.0;
    for cell in disc.classification.active_cells() {
        let (facet, nb) = disc.mesh.cell_neighbors_through_facets(cell)?[2 * axis + upper as usize];
        if nb != Neighbor::Boundary {
            continue;
        }
        let rule = facet_rule(&disc.mesh, &disc.classification, facet, degree)?;
        for (x, &w) in rule.points.iter().zip(&rule.weights) {
            let (u, _, _) = space.velocity_at(&disc.mesh, cell, x, &full)?;
            flux += w * sign * u[axis];
        }
    }
    Ok(flux)
}

pub fn run_demo(cfg: &RunConfig, options: &DemoOptions) -> Result<DemoResult> {
    let m = cfg.levels.1;
    let mesh = BackgroundMesh::unit(cfg.dim, 1 << m)?;
    let params = cfg.form_parameters();
    let channel = cfg.geometry == "halfspace";
    let ls = if channel {
        builtin_geometry(
            "halfspace",
            &GeometryParams {
                axis: Some(1),
                offset: Some(CHANNEL_HEIGHT),
                ..Default::default()
            },
        )?
    } else {
        builtin_geometry(&cfg.geometry, &GeometryParams::default())?
    };
    let disc = Discretization::build(
        mesh,
        ls.as_ref(),
        cfg.space,
        cfg.extension,
        &params,
        cfg.eta0,
    )?;
    let data: Box<dyn ProblemData> = if channel {
        let h = CHANNEL_HEIGHT;
        Box::new(Channel {
            height: h,
            c: 4.0 * options.amplitude / (h * h),
        })
    } else {
        Box::new(LidDriven {
            speed: options.amplitude,
            top: 1.0,
        })
    };
    let mut system = disc.assemble(&params, data.as_ref())?;
    if !system.has_neumann {
        system = apply_mean_constraint(
            &system,
            &disc.mesh,
            &disc.classification,
            &disc.decomposition,
            &disc.space,
            MeanConstraint::LagrangeMultiplier,
            cfg.degree,
        )?;
    }
    let points = disc.space.dof_points();
    let (_, solution) = factorize_system(&system, Some(&points))?;
    let inflow = -boundary_flux(&disc, &solution, 0, false, cfg.degree)?;
    let outflow = boundary_flux(&disc, &solution, 0, true, cfg.degree)?;
    Ok(DemoResult {
        disc,
        solution,
        inflow,
        outflow,
    })
}

/// Legacy ASCII structured-grid file with velocity magnitude and pressure
/// sampled at the mesh vertices (zero outside the active cells).
pub fn vtk_text(disc: &Discretization, solution: &[f64]) -> Result<String> {
    let mesh = &disc.mesh;
    let space = &disc.space;
    let dim = mesh.dim();
    let nvel = space.num_velocity_dofs();
    let full = space.interpolate_constrained(&solution[..nvel])?;
    let pressure = &solution[nvel..nvel + space.num_pressure_dofs()];
    let n = mesh.cells_per_axis();
    let dims = [n[0] + 1, n[1] + 1, if dim == 3 { n[2] + 1 } else { 1 }];
    let total = dims[0] * dims[1] * dims[2];
    let mut points = String::new();
    let mut speed = String::new();
    let mut press = String::new();
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let c = [2 * i, 2 * j, 2 * k];
                let x = mesh.lattice_point(c);
                writeln!(points, "{} {} {}", x[0], x[1], x[2]).unwrap();
                let cell = mesh
                    .cells_around_lattice_point(c)
                    .into_iter()
                    .find(|&cell| disc.classification.is_active(cell));
                let (s, p) = match cell {
                    Some(cell) => {
                        let (u, _, _) = space.velocity_at(mesh, cell, &x, &full)?;
                        let (p, _) = space.pressure_at(cell, &x, pressure)?;
                        (u.iter().map(|v| v * v).sum::<f64>().sqrt(), p)
                    }
                    None => (0.0, 0.0),
                };
                writeln!(speed, "{s:.10e}").unwrap();
                writeln!(press, "{p:.10e}").unwrap();
            }
        }
    }
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0").unwrap();
    writeln!(out, "agfem stokes solution").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET STRUCTURED_GRID").unwrap();
    writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]).unwrap();
    writeln!(out, "POINTS {total} double").unwrap();
    out.push_str(&points);
    writeln!(out, "POINT_DATA {total}").unwrap();
    writeln!(
        out,
        "SCALARS velocity_magnitude double 1\nLOOKUP_TABLE default"
    )
    .unwrap();
    out.push_str(&speed);
    writeln!(out, "SCALARS pressure double 1\nLOOKUP_TABLE default").unwrap();
    out.push_str(&press);
    Ok(out)
}

pub fn write_vtk(disc: &Discretization, solution: &[f64], path: &Path) -> Result<()> {
    write_text(path, &vtk_text(disc, solution)?)
}
