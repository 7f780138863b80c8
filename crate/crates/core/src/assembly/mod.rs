//! Assembly of the Nitsche-Stokes saddle-point system.
//!
//! With `a_h` the Nitsche-stabilized viscous form, `b_h` the divergence
//! form (with its boundary term on the unfitted boundary) and `j_h` the
//! pressure stabilization, the system reads
//!
//! ```text
//! | a_h   b_h | |u|   |l_u|
//! | b_h^T -j_h| |p| = |l_p|
//! ```
//!
//! Element matrices are computed on the full local Q2/P1 basis and then
//! pushed through the constraint expansion `T` of the cell (`T^T K T`), so
//! the global matrix only involves free velocity DOFs and pressures.

mod improper;

use std::collections::BTreeMap;

pub use improper::{identify_improper_sets, ImproperSets};

use crate::geometry::Classification;
use crate::linalg::SparseMatrix;
use crate::mesh::{BackgroundMesh, Neighbor};
use crate::quadrature::{facet_rule, CutDecomposition, DEFAULT_DEGREE};
use crate::spaces::MixedSpace;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stabilization {
    None,
    /// Pressure jumps on improper facets plus the residual term on
    /// non-trivial aggregates.
    Alg2,
    /// Pressure jumps only (serendipity extension).
    Alg3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormParameters {
    pub tau_nitsche: f64,
    pub tau_j1: f64,
    pub tau_j2: f64,
    pub stabilization: Stabilization,
    /// Polynomial degree of the quadrature rules.
    pub degree: usize,
}

impl Default for FormParameters {
    fn default() -> Self {
        Self {
            tau_nitsche: 40.0,
            tau_j1: 0.01,
            tau_j2: 0.01,
            stabilization: Stabilization::Alg3,
            degree: DEFAULT_DEGREE,
        }
    }
}

impl FormParameters {
    pub fn validate(&self) -> Result<()> {
        if self.tau_nitsche.is_nan() || self.tau_nitsche <= 0.0 {
            return Err(Error::Config(format!(
                "tau_nitsche must be positive, got {}",
                self.tau_nitsche
            )));
        }
        if [self.tau_j1, self.tau_j2]
            .iter()
            .any(|t| t.is_nan() || *t < 0.0)
        {
            return Err(Error::Config(
                "stabilization constants must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxFace {
    Neumann,
    Dirichlet,
}

/// Data of a Stokes problem on `Ω ⊂ box`.
pub trait ProblemData {
    fn body_force(&self, x: &Point) -> Point;
    /// Velocity prescribed on the unfitted boundary and Dirichlet box faces.
    fn dirichlet(&self, x: &Point) -> Point;
    /// Traction `∂_n u - p n` on Neumann box faces.
    fn traction(&self, x: &Point, normal: &Point) -> Point;
    fn box_face(&self, _axis: usize, _upper: bool) -> BoxFace {
        BoxFace::Neumann
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanConstraint {
    None,
    LagrangeMultiplier,
}

#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub num_velocity: usize,
    pub num_pressure: usize,
    pub has_multiplier: bool,
    /// Whether any box face carries a Neumann condition.
    pub has_neumann: bool,
}

impl MixedSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    /// Velocity and pressure parts of a solution vector.
    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let (u, rest) = x.split_at(self.num_velocity);
        (u, &rest[..self.num_pressure])
    }
}

struct Local {
    nv: usize,
    k: Vec<f64>,
    f: Vec<f64>,
    n: usize,
}

impl Local {
    fn new(nv: usize, np: usize) -> Self {
        let n = nv + np;
        Self {
            nv,
            k: vec![0.0; n * n],
            f: vec![0.0; n],
            n,
        }
    }

    fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.k[i * self.n + j] += v;
        if i != j {
            self.k[j * self.n + i] += v;
        }
    }
}

pub fn assemble(
    mesh: &BackgroundMesh,
    classification: &Classification,
    decomposition: &CutDecomposition,
    space: &MixedSpace,
    improper: &ImproperSets,
    params: &FormParameters,
    data: &dyn ProblemData,
) -> Result<MixedSystem> {
    params.validate()?;
    let dim = mesh.dim();
    let h = mesh.cell_size();
    let npb = space.pressure_block();
    let nn = space.basis().len();
    let nv = nn * dim;
    let degree = params.degree;
    let penalty = params.tau_nitsche / h;
    let active = classification.active_cells();
    if active.is_empty() {
        return Err(Error::InvalidMesh("no active cells".into()));
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; space.num_dofs()];
    let mut has_neumann = false;

    for &cell in &active {
        let mut loc = Local::new(nv, npb);
        let residual = params.stabilization == Stabilization::Alg2
            && space
                .pressure_group(cell)
                .is_some_and(|g| improper.aggregates.contains(&g));
        let c2 = -params.tau_j2 * h * h;

        let rule = decomposition.volume_rule(mesh, classification, cell, degree)?;
        for (x, &w) in rule.points.iter().zip(&rule.weights) {
            let s = space.shape(mesh, cell, x);
            let (pv, pg) = space.pressure_shape(cell, x)?;
            let f = data.body_force(x);
            let lap: Vec<f64> = s.second.iter().map(|d2| d2[..dim].iter().sum()).collect();
            for a in 0..nn {
                for b in a..nn {
                    let g: f64 = (0..dim)
                        .map(|j| s.gradients[a][j] * s.gradients[b][j])
                        .sum::<f64>()
                        * w;
                    let r = if residual {
                        c2 * w * lap[a] * lap[b]
                    } else {
                        0.0
                    };
                    for i in 0..dim {
                        loc.add_sym(a * dim + i, b * dim + i, g + r);
                    }
                }
                for i in 0..dim {
                    let row = a * dim + i;
                    loc.f[row] += w * f[i] * s.values[a];
                    for k in 0..npb {
                        let mut v = -w * s.gradients[a][i] * pv[k];
                        if residual {
                            v += c2 * w * (-lap[a]) * pg[k][i];
                        }
                        loc.add_sym(row, nv + k, v);
                    }
                    if residual {
                        loc.f[row] += c2 * w * f[i] * (-lap[a]);
                    }
                }
            }
            if residual {
                for k in 0..npb {
                    for l in k..npb {
                        let v: f64 = (0..dim).map(|j| pg[k][j] * pg[l][j]).sum();
                        loc.add_sym(nv + k, nv + l, c2 * w * v);
                    }
                    let fr: f64 = (0..dim).map(|j| f[j] * pg[k][j]).sum();
                    loc.f[nv + k] += c2 * w * fr;
                }
            }
        }

        let gamma = decomposition.boundary_rule(mesh, classification, cell, degree)?;
        for q in 0..gamma.len() {
            nitsche(
                &mut loc,
                space,
                mesh,
                cell,
                &gamma.points[q],
                gamma.weights[q],
                &gamma.normals[q],
                penalty,
                data,
            )?;
        }

        for (i, (facet, nb)) in mesh
            .cell_neighbors_through_facets(cell)?
            .into_iter()
            .enumerate()
        {
            if nb != Neighbor::Boundary {
                continue;
            }
            let (axis, upper) = (i / 2, i % 2 == 1);
            let mut n = [0.0; 3];
            n[axis] = if upper { 1.0 } else { -1.0 };
            let rule = facet_rule(mesh, classification, facet, degree)?;
            if rule.is_empty() {
                continue;
            }
            match data.box_face(axis, upper) {
                BoxFace::Dirichlet => {
                    for (x, &w) in rule.points.iter().zip(&rule.weights) {
                        nitsche(&mut loc, space, mesh, cell, x, w, &n, penalty, data)?;
                    }
                }
                BoxFace::Neumann => {
                    has_neumann = true;
                    for (x, &w) in rule.points.iter().zip(&rule.weights) {
                        let s = space.shape(mesh, cell, x);
                        let t = data.traction(x, &n);
                        for a in 0..nn {
                            for c in 0..dim {
                                loc.f[a * dim + c] += w * t[c] * s.values[a];
                            }
                        }
                    }
                }
            }
        }

        scatter(&loc, space, mesh, cell, &mut triplets, &mut rhs)?;
    }

    let cj = -params.tau_j1 * h;
    if params.stabilization != Stabilization::None && cj != 0.0 {
        for &(facet, lower, upper) in &improper.facets {
            let rule = facet_rule(mesh, classification, facet, degree)?;
            let (gl, gu) = (
                space.pressure_group(lower).expect("active"),
                space.pressure_group(upper).expect("active"),
            );
            for (x, &w) in rule.points.iter().zip(&rule.weights) {
                let (pl, _) = space.pressure_shape(lower, x)?;
                let (pu, _) = space.pressure_shape(upper, x)?;
                let mut jump = Vec::with_capacity(2 * npb);
                for k in 0..npb {
                    jump.push((space.pressure_dof(gl, k), pl[k]));
                }
                for k in 0..npb {
                    jump.push((space.pressure_dof(gu, k), -pu[k]));
                }
                for &(i, vi) in &jump {
                    for &(j, vj) in &jump {
                        triplets.push((i, j, cj * w * vi * vj));
                    }
                }
            }
        }
    }

    let n = space.num_dofs();
    Ok(MixedSystem {
        matrix: SparseMatrix::from_triplets(n, n, &triplets)?,
        rhs,
        num_velocity: space.num_velocity_dofs(),
        num_pressure: space.num_pressure_dofs(),
        has_multiplier: false,
        has_neumann,
    })
}

/// Symmetric Nitsche terms and the boundary part of `b_h` at one point.
#[allow(clippy::too_many_arguments)]
fn nitsche(
    loc: &mut Local,
    space: &MixedSpace,
    mesh: &BackgroundMesh,
    cell: usize,
    x: &Point,
    w: f64,
    n: &Point,
    penalty: f64,
    data: &dyn ProblemData,
) -> Result<()> {
    let dim = space.dim();
    let nn = space.basis().len();
    let nv = loc.nv;
    let s = space.shape(mesh, cell, x);
    let (pv, _) = space.pressure_shape(cell, x)?;
    let g = data.dirichlet(x);
    let dn: Vec<f64> = s
        .gradients
        .iter()
        .map(|gr| (0..dim).map(|j| gr[j] * n[j]).sum())
        .collect();
    let gn: f64 = (0..dim).map(|j| g[j] * n[j]).sum();
    for a in 0..nn {
        let (va, da) = (s.values[a], dn[a]);
        for b in a..nn {
            let v = w * (-dn[b] * va - da * s.values[b] + penalty * va * s.values[b]);
            for i in 0..dim {
                loc.add_sym(a * dim + i, b * dim + i, v);
            }
        }
        for i in 0..dim {
            let row = a * dim + i;
            loc.f[row] += w * g[i] * (penalty * va - da);
            for k in 0..pv.len() {
                loc.add_sym(row, nv + k, w * va * n[i] * pv[k]);
            }
        }
    }
    for k in 0..pv.len() {
        loc.f[nv + k] += w * gn * pv[k];
    }
    Ok(())
}

/// Applies `T^T K T` and `T^T f` for one cell and appends the result.
fn scatter(
    loc: &Local,
    space: &MixedSpace,
    mesh: &BackgroundMesh,
    cell: usize,
    triplets: &mut Vec<(usize, usize, f64)>,
    rhs: &mut [f64],
) -> Result<()> {
    let dim = space.dim();
    let nodes = space.cell_nodes(mesh, cell)?;
    let group = space.pressure_group(cell).expect("active cell");
    let mut expansion: Vec<Vec<(usize, f64)>> = Vec::with_capacity(loc.n);
    for &node in &nodes {
        let e = space.node_expansion(node);
        for i in 0..dim {
            expansion.push(
                e.iter()
                    .map(|&(f, c)| (space.velocity_dof(f, i), c))
                    .collect(),
            );
        }
    }
    for k in 0..loc.n - loc.nv {
        expansion.push(vec![(space.pressure_dof(group, k), 1.0)]);
    }
    let mut globals: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &expansion {
        for &(g, _) in e {
            let next = globals.len();
            globals.entry(g).or_insert(next);
        }
    }
    let ng = globals.len();
    let col: Vec<Vec<(usize, f64)>> = expansion
        .iter()
        .map(|e| e.iter().map(|&(g, c)| (globals[&g], c)).collect())
        .collect();
    // KT = K T  (n x ng)
    let mut kt = vec![0.0; loc.n * ng];
    for a in 0..loc.n {
        for b in 0..loc.n {
            let v = loc.k[a * loc.n + b];
            if v != 0.0 {
                for &(g, c) in &col[b] {
                    kt[a * ng + g] += v * c;
                }
            }
        }
    }
    let mut out = vec![0.0; ng * ng];
    let mut fo = vec![0.0; ng];
    for a in 0..loc.n {
        for &(g1, c) in &col[a] {
            fo[g1] += c * loc.f[a];
            let row = &kt[a * ng..(a + 1) * ng];
            for (g2, &v) in row.iter().enumerate() {
                out[g1 * ng + g2] += c * v;
            }
        }
    }
    let inverse: Vec<usize> = {
        let mut inv = vec![0; ng];
        for (&g, &l) in &globals {
            inv[l] = g;
        }
        inv
    };
    for l1 in 0..ng {
        rhs[inverse[l1]] += fo[l1];
        for l2 in 0..ng {
            let v = out[l1 * ng + l2];
            if v != 0.0 {
                triplets.push((inverse[l1], inverse[l2], v));
            }
        }
    }
    Ok(())
}

/// Adds a Lagrange multiplier enforcing `∫_Ω p = 0`.
pub fn apply_mean_constraint(
    system: &MixedSystem,
    mesh: &BackgroundMesh,
    classification: &Classification,
    decomposition: &CutDecomposition,
    space: &MixedSpace,
    mode: MeanConstraint,
    degree: usize,
) -> Result<MixedSystem> {
    if mode == MeanConstraint::None {
        return Ok(system.clone());
    }
    if system.has_neumann {
        log::warn!("mean-pressure multiplier refused: Neumann faces already fix the pressure");
        return Err(Error::Config(
            "a pressure multiplier is only allowed without Neumann faces".into(),
        ));
    }
    if system.has_multiplier {
        return Ok(system.clone());
    }
    let mut mean = vec![0.0; system.size()];
    for cell in classification.active_cells() {
        let g = space.pressure_group(cell).expect("active cell");
        let rule = decomposition.volume_rule(mesh, classification, cell, degree)?;
        for (x, &w) in rule.points.iter().zip(&rule.weights) {
            let (pv, _) = space.pressure_shape(cell, x)?;
            for (k, v) in pv.iter().enumerate() {
                mean[space.pressure_dof(g, k)] += w * v;
            }
        }
    }
    let n = system.size();
    let mut triplets = system.matrix.triplets();
    for (i, &v) in mean.iter().enumerate() {
        if v != 0.0 {
            triplets.push((i, n, v));
            triplets.push((n, i, v));
        }
    }
    let mut rhs = system.rhs.clone();
    rhs.push(0.0);
    Ok(MixedSystem {
        matrix: SparseMatrix::from_triplets(n + 1, n + 1, &triplets)?,
        rhs,
        num_velocity: system.num_velocity,
        num_pressure: system.num_pressure,
        has_multiplier: true,
        has_neumann: system.has_neumann,
    })
}
