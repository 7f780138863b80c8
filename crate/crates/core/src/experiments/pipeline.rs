//! One pass of the pipeline on a single mesh: geometry, spaces, assembly,
//! solve, errors and conditioning.

use crate::aggregation::{aggregate_cells, aggregate_statistics, AggregateMap};
use crate::assembly::{
    assemble, identify_improper_sets, FormParameters, ImproperSets, MixedSystem, ProblemData,
};
use crate::geometry::{
    builtin_geometry, classify, CellClass, Classification, GeometryParams, LevelSet,
};
use crate::linalg::{
    estimate_condition_1norm, nested_dissection, relative_residual, Factorization,
};
use crate::mesh::BackgroundMesh;
use crate::quadrature::CutDecomposition;
use crate::spaces::{Extension, MixedSpace, SpaceVariant};
use crate::{Point, Result};

use super::config::{Problem, RunConfig};
use super::manufactured::{ExactSolution, Patch, Swirl};

/// Everything that depends only on the mesh, the geometry and the space.
pub struct Discretization {
    pub mesh: BackgroundMesh,
    pub classification: Classification,
    pub decomposition: CutDecomposition,
    pub aggregates: AggregateMap,
    pub space: MixedSpace,
    pub improper: ImproperSets,
}

impl Discretization {
    pub fn build(
        mesh: BackgroundMesh,
        level_set: &dyn LevelSet,
        variant: SpaceVariant,
        extension: Extension,
        params: &FormParameters,
        eta0: f64,
    ) -> Result<Self> {
        let classification = classify(&mesh, level_set)?;
        let decomposition = CutDecomposition::build(&mesh, &classification)?;
        let aggregates = aggregate_cells(&mesh, &classification, &decomposition, eta0)?;
        let space = MixedSpace::build(&mesh, &classification, &aggregates, variant, extension)?;
        let improper =
            identify_improper_sets(&mesh, &classification, &aggregates, params.stabilization, 2)?;
        Ok(Self {
            mesh,
            classification,
            decomposition,
            aggregates,
            space,
            improper,
        })
    }

    pub fn assemble(&self, params: &FormParameters, data: &dyn ProblemData) -> Result<MixedSystem> {
        assemble(
            &self.mesh,
            &self.classification,
            &self.decomposition,
            &self.space,
            &self.improper,
            params,
            data,
        )
    }

    /// Smallest inside volume fraction over the cut cells (1 without cuts).
    pub fn eta_min(&self) -> f64 {
        self.classification
            .cells_of_class(CellClass::Cut)
            .into_iter()
            .map(|c| {
                self.decomposition
                    .inside_volume(&self.mesh, &self.classification, c)
                    / self.mesh.cell_volume()
            })
            .fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub h1_u: f64,
    pub l2_u: f64,
    pub l2_p: f64,
}

/// Velocity H1-seminorm, velocity L2 and pressure L2 errors over `Ω_h`.
pub fn compute_error_norms(
    disc: &Discretization,
    solution: &[f64],
    exact: &dyn ExactSolution,
    degree: usize,
) -> Result<ErrorNorms> {
    let space = &disc.space;
    let dim = space.dim();
    let nvel = space.num_velocity_dofs();
    let full = space.interpolate_constrained(&solution[..nvel])?;
    let pressure = &solution[nvel..nvel + space.num_pressure_dofs()];
    let (mut h1, mut l2u, mut l2p) = (0.0, 0.0, 0.0);
    for cell in disc.classification.active_cells() {
        let rule =
            disc.decomposition
                .volume_rule(&disc.mesh, &disc.classification, cell, degree)?;
        for (x, &w) in rule.points.iter().zip(&rule.weights) {
            let (u, g, _) = space.velocity_at(&disc.mesh, cell, x, &full)?;
            let (p, _) = space.pressure_at(cell, x, pressure)?;
            let ue = exact.velocity(x);
            let ge = exact.velocity_gradient(x);
            for i in 0..dim {
                l2u += w * (u[i] - ue[i]).powi(2);
                for j in 0..dim {
                    h1 += w * (g[i][j] - ge[i][j]).powi(2);
                }
            }
            l2p += w * (p - exact.pressure(x)).powi(2);
        }
    }
    Ok(ErrorNorms {
        h1_u: h1.sqrt(),
        l2_u: l2u.sqrt(),
        l2_p: l2p.sqrt(),
    })
}

/// Result of solving on one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutcome {
    pub m: u32,
    pub h: f64,
    pub n_dofs: usize,
    pub errors: ErrorNorms,
    pub kappa1: f64,
    pub max_agg_dist: usize,
    pub residual: f64,
    pub asymmetry: f64,
}

pub fn exact_solution(cfg: &RunConfig) -> Box<dyn ExactSolution> {
    match cfg.problem {
        Problem::Swirl => Box::new(Swirl::new(cfg.dim)),
        Problem::Patch => Box::new(Patch::new(cfg.dim)),
    }
}

pub fn level_set_for(cfg: &RunConfig, params: &GeometryParams) -> Result<Box<dyn LevelSet>> {
    builtin_geometry(&cfg.geometry, params)
}

/// Residual above which the regularized symmetric factorization is
/// abandoned in favour of pivoted LU.
const SYMMETRIC_RESIDUAL_TOL: f64 = 1e-10;

/// Factorizes `system` and solves it. Tries in turn a symmetric LDL^T with
/// velocity pivots kept positive and pressure pivots negative, the same
/// without sign control, a symmetric LBL^T with local pivoting, and
/// pivoted LU.
/// The ordering is nested dissection on `points` (one per unknown before
/// any multiplier) when given, minimum degree otherwise.
pub fn factorize_system(
    system: &MixedSystem,
    points: Option<&[Point]>,
) -> Result<(Factorization, Vec<f64>)> {
    let n = system.size();
    let signs: Vec<i8> = (0..n)
        .map(|i| if i < system.num_velocity { 1 } else { -1 })
        .collect();
    let ordering = points.map(|p| {
        let mut coords = p.to_vec();
        coords.resize(n, [0.0; 3]);
        let last: Vec<usize> = (p.len()..n).collect();
        nested_dissection(&system.matrix, &coords, &last)
    });
    let ordering = ordering.as_deref();
    let attempts: [(&str, &dyn Fn() -> Result<Factorization>); 3] = [
        ("signed LDL^T", &|| {
            Factorization::symmetric_indefinite(&system.matrix, Some(&signs), ordering)
        }),
        ("LDL^T", &|| {
            Factorization::symmetric_indefinite(&system.matrix, None, ordering)
        }),
        ("pivoted LBL^T", &|| {
            Factorization::symmetric_pivoted(&system.matrix, ordering)
        }),
    ];
    for (name, attempt) in attempts {
        match attempt().and_then(|f| f.solve(&system.rhs).map(|x| (f, x))) {
            Ok((f, x)) => {
                let residual = relative_residual(&system.matrix, &x, &system.rhs);
                if residual <= SYMMETRIC_RESIDUAL_TOL {
                    return Ok((f, x));
                }
                log::info!("{name}: residual {residual:e}");
            }
            Err(e) => log::info!("{name}: {e}"),
        }
    }
    let f = Factorization::new(&system.matrix)?;
    let x = f.solve(&system.rhs)?;
    Ok((f, x))
}

/// Solves `system` and estimates its condition number.
pub fn solve_with_condition(
    system: &MixedSystem,
    points: Option<&[Point]>,
) -> Result<(Vec<f64>, f64, f64)> {
    let (f, x) = factorize_system(system, points)?;
    let residual = relative_residual(&system.matrix, &x, &system.rhs);
    let report = estimate_condition_1norm(&system.matrix, &f)?;
    Ok((x, report.kappa1_estimate, residual))
}

pub fn run_level(cfg: &RunConfig, m: u32) -> Result<LevelOutcome> {
    let mesh = BackgroundMesh::unit(cfg.dim, 1 << m)?;
    let ls = level_set_for(cfg, &GeometryParams::default())?;
    let params = cfg.form_parameters();
    let disc = Discretization::build(
        mesh,
        ls.as_ref(),
        cfg.space,
        cfg.extension,
        &params,
        cfg.eta0,
    )?;
    let exact = exact_solution(cfg);
    let system = disc.assemble(&params, exact.as_ref())?;
    let points = disc.space.dof_points();
    let (x, kappa1, residual) = solve_with_condition(&system, Some(&points))?;
    let errors = compute_error_norms(&disc, &x, exact.as_ref(), cfg.degree)?;
    let asym = system.matrix.max_asymmetry() / system.matrix.max_abs().max(f64::MIN_POSITIVE);
    Ok(LevelOutcome {
        m,
        h: disc.mesh.cell_size(),
        n_dofs: system.size(),
        errors,
        kappa1,
        max_agg_dist: aggregate_statistics(&disc.aggregates).max_root_distance,
        residual,
        asymmetry: asym,
    })
}
