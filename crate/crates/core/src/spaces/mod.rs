//! Mixed velocity/pressure spaces on the active cells.
//!
//! Velocities are continuous Q2 with one node per point of the doubled
//! lattice touched by an active cell. In the aggregated space the nodes on
//! outer entities are constrained: their value is the extrapolation of the
//! root cell polynomial of the owning aggregate, either with the full Q2
//! basis or with the serendipity basis built on the root's boundary nodes.
//! Constraint coefficients are shared by all velocity components.
//!
//! Pressures are discontinuous linear polynomials, one per aggregate (or
//! per active cell in the standard space), written in the scaled monomials
//! `1, (x - x_A)/h, ...` centered at the root cell center.

pub mod basis;

use std::collections::BTreeMap;

pub use basis::{node_point, Family, ScalarBasis, ShapeValues};

use crate::aggregation::AggregateMap;
use crate::geometry::Classification;
use crate::mesh::BackgroundMesh;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceVariant {
    /// Plain Q2/P1 on the active cells.
    Standard,
    Aggregated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Standard,
    Serendipity,
}

impl Extension {
    pub fn family(self) -> Family {
        match self {
            Extension::Standard => Family::Lagrange,
            Extension::Serendipity => Family::Serendipity,
        }
    }
}

/// Node-level constraints: each constrained node is a combination of free
/// nodes of its owner's root cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintTable {
    rows: BTreeMap<usize, Vec<(usize, f64)>>,
}

impl ConstraintTable {
    pub fn row(&self, node: usize) -> Option<&[(usize, f64)]> {
        self.rows.get(&node).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[(usize, f64)])> {
        self.rows.iter().map(|(&n, r)| (n, r.as_slice()))
    }

    pub fn row_sum(&self, node: usize) -> Option<f64> {
        self.row(node).map(|r| r.iter().map(|e| e.1).sum())
    }
}

#[derive(Debug, Clone)]
pub struct MixedSpace {
    dim: usize,
    variant: SpaceVariant,
    extension: Extension,
    h: [f64; 3],
    node_of_lattice: Vec<usize>,
    node_lattice: Vec<[usize; 3]>,
    node_points: Vec<Point>,
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    constraints: ConstraintTable,
    pressure_group: Vec<Option<usize>>,
    pressure_centers: Vec<Point>,
    pressure_scale: f64,
    basis: ScalarBasis,
}

impl MixedSpace {
    pub fn build(
        mesh: &BackgroundMesh,
        classification: &Classification,
        aggregates: &AggregateMap,
        variant: SpaceVariant,
        extension: Extension,
    ) -> Result<Self> {
        let dim = mesh.dim();
        let basis = ScalarBasis::lagrange(dim);
        let active = classification.active_cells();
        if active.is_empty() {
            return Err(Error::InvalidMesh("no active cells".into()));
        }

        let mut touched = vec![false; mesh.lattice_len()];
        for &cell in &active {
            let o = mesh.cell_lattice_origin(cell);
            for off in basis.node_offsets() {
                touched[mesh.lattice_index(add(o, off))] = true;
            }
        }
        let mut node_of_lattice = vec![usize::MAX; touched.len()];
        let mut node_lattice = Vec::new();
        let mut node_points = Vec::new();
        for (l, &t) in touched.iter().enumerate() {
            if t {
                node_of_lattice[l] = node_lattice.len();
                let c = mesh.lattice_coords(l);
                node_lattice.push(c);
                node_points.push(mesh.lattice_point(c));
            }
        }

        let mut owner_of_node: Vec<Option<usize>> = vec![None; node_lattice.len()];
        if variant == SpaceVariant::Aggregated {
            for (node, &c) in node_lattice.iter().enumerate() {
                owner_of_node[node] = aggregates.outer_owner(mesh.vef_at(c));
            }
        }
        let mut free_index = vec![None; node_lattice.len()];
        let mut free_nodes = Vec::new();
        for node in 0..node_lattice.len() {
            if owner_of_node[node].is_none() {
                free_index[node] = Some(free_nodes.len());
                free_nodes.push(node);
            }
        }

        let ext_basis = ScalarBasis::new(extension.family(), dim)?;
        let h = {
            let mut h = [1.0; 3];
            h[..dim].copy_from_slice(mesh.h());
            h
        };
        let mut rows = BTreeMap::new();
        for (node, owner) in owner_of_node.iter().enumerate() {
            let Some(agg) = *owner else { continue };
            let root = aggregates.root(agg);
            if !classification.is_active(root) {
                return Err(Error::Internal(format!("root cell {root} is not active")));
            }
            let (lo, _) = mesh.cell_bounds(root);
            let t = reference(&node_points[node], &lo, &h, dim);
            let o = mesh.cell_lattice_origin(root);
            let mut row = Vec::new();
            for (off, v) in ext_basis.node_offsets().iter().zip(ext_basis.values(&t)) {
                if v != 0.0 {
                    let master = node_of_lattice[mesh.lattice_index(add(o, off))];
                    if free_index[master].is_none() {
                        return Err(Error::Internal(format!(
                            "constraint master {master} of node {node} is itself constrained"
                        )));
                    }
                    row.push((master, v));
                }
            }
            rows.insert(node, row);
        }

        let mut pressure_group = vec![None; mesh.num_cells()];
        let mut pressure_centers = Vec::new();
        match variant {
            SpaceVariant::Standard => {
                for &cell in &active {
                    pressure_group[cell] = Some(pressure_centers.len());
                    pressure_centers.push(mesh.cell_center(cell));
                }
            }
            SpaceVariant::Aggregated => {
                for &cell in &active {
                    let agg = aggregates.aggregate_of_cell(cell).ok_or_else(|| {
                        Error::Internal(format!("active cell {cell} belongs to no aggregate"))
                    })?;
                    pressure_group[cell] = Some(agg);
                }
                for a in 0..aggregates.num_aggregates() {
                    pressure_centers.push(mesh.cell_center(aggregates.root(a)));
                }
            }
        }

        Ok(Self {
            dim,
            variant,
            extension,
            h,
            node_of_lattice,
            node_lattice,
            node_points,
            free_index,
            free_nodes,
            constraints: ConstraintTable { rows },
            pressure_group,
            pressure_centers,
            pressure_scale: mesh.cell_size(),
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> SpaceVariant {
        self.variant
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn basis(&self) -> &ScalarBasis {
        &self.basis
    }

    pub fn num_nodes(&self) -> usize {
        self.node_points.len()
    }

    pub fn num_free_nodes(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn num_velocity_dofs(&self) -> usize {
        self.free_nodes.len() * self.dim
    }

    pub fn pressure_block(&self) -> usize {
        self.dim + 1
    }

    pub fn num_pressure_groups(&self) -> usize {
        self.pressure_centers.len()
    }

    pub fn num_pressure_dofs(&self) -> usize {
        self.pressure_centers.len() * self.pressure_block()
    }

    pub fn num_dofs(&self) -> usize {
        self.num_velocity_dofs() + self.num_pressure_dofs()
    }

    pub fn node_point(&self, node: usize) -> Point {
        self.node_points[node]
    }

    pub fn node_lattice(&self, node: usize) -> [usize; 3] {
        self.node_lattice[node]
    }

    pub fn node_at_lattice(&self, mesh: &BackgroundMesh, c: [usize; 3]) -> Option<usize> {
        let n = self.node_of_lattice[mesh.lattice_index(c)];
        (n != usize::MAX).then_some(n)
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn constraints(&self) -> &ConstraintTable {
        &self.constraints
    }

    pub fn velocity_dof(&self, free_node: usize, component: usize) -> usize {
        free_node * self.dim + component
    }

    /// A representative point per unknown: the node for velocity components
    /// and the root cell center for pressure coefficients.
    pub fn dof_points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.num_dofs());
        for &node in &self.free_nodes {
            out.extend(std::iter::repeat_n(self.node_points[node], self.dim));
        }
        for &c in &self.pressure_centers {
            out.extend(std::iter::repeat_n(c, self.pressure_block()));
        }
        out
    }

    pub fn pressure_group(&self, cell: usize) -> Option<usize> {
        self.pressure_group.get(cell).copied().flatten()
    }

    pub fn pressure_dof(&self, group: usize, k: usize) -> usize {
        self.num_velocity_dofs() + group * self.pressure_block() + k
    }

    /// Q2 nodes of a cell in basis order.
    pub fn cell_nodes(&self, mesh: &BackgroundMesh, cell: usize) -> Result<Vec<usize>> {
        mesh.check_cell(cell)?;
        let o = mesh.cell_lattice_origin(cell);
        self.basis
            .node_offsets()
            .iter()
            .map(|off| {
                self.node_at_lattice(mesh, add(o, off))
                    .ok_or(Error::OutOfRange {
                        what: "active cell",
                        index: cell,
                        len: mesh.num_cells(),
                    })
            })
            .collect()
    }

    /// Expansion of a node in free nodes: itself, or its constraint row.
    pub fn node_expansion(&self, node: usize) -> Vec<(usize, f64)> {
        match self.free_index[node] {
            Some(f) => vec![(f, 1.0)],
            None => self
                .constraints
                .row(node)
                .unwrap_or(&[])
                .iter()
                .map(|&(m, c)| (self.free_index[m].expect("masters are free"), c))
                .collect(),
        }
    }

    /// Reference coordinates of `x` relative to a cell.
    pub fn reference_point(&self, mesh: &BackgroundMesh, cell: usize, x: &Point) -> Point {
        let (lo, _) = mesh.cell_bounds(cell);
        reference(x, &lo, &self.h, self.dim)
    }

    /// Shape values with gradients and second derivatives mapped to
    /// physical coordinates.
    pub fn shape(&self, mesh: &BackgroundMesh, cell: usize, x: &Point) -> ShapeValues {
        let mut s = self.basis.eval(&self.reference_point(mesh, cell, x));
        for b in 0..s.values.len() {
            for a in 0..self.dim {
                s.gradients[b][a] /= self.h[a];
                s.second[b][a] /= self.h[a] * self.h[a];
            }
        }
        s
    }

    /// Pressure basis values and gradients of the group of `cell` at `x`.
    pub fn pressure_shape(&self, cell: usize, x: &Point) -> Result<(Vec<f64>, Vec<[f64; 3]>)> {
        let g = self.pressure_group(cell).ok_or(Error::OutOfRange {
            what: "active cell",
            index: cell,
            len: self.pressure_group.len(),
        })?;
        let c = self.pressure_centers[g];
        let s = self.pressure_scale;
        let mut vals = vec![1.0];
        let mut grads = vec![[0.0; 3]];
        for a in 0..self.dim {
            vals.push((x[a] - c[a]) / s);
            let mut gr = [0.0; 3];
            gr[a] = 1.0 / s;
            grads.push(gr);
        }
        Ok((vals, grads))
    }

    /// Fills constrained nodes from free velocity values (`d` per node).
    pub fn interpolate_constrained(&self, free: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        if free.len() != self.num_velocity_dofs() {
            return Err(Error::SizeMismatch {
                what: "free velocity vector",
                expected: self.num_velocity_dofs(),
                got: free.len(),
            });
        }
        let mut full = vec![0.0; self.num_nodes() * d];
        for node in 0..self.num_nodes() {
            for (f, c) in self.node_expansion(node) {
                for i in 0..d {
                    full[node * d + i] += c * free[f * d + i];
                }
            }
        }
        Ok(full)
    }

    /// Nodal interpolation of a vector field on the free nodes.
    pub fn interpolate_velocity(&self, f: impl Fn(&Point) -> Point) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; self.num_velocity_dofs()];
        for (k, &node) in self.free_nodes.iter().enumerate() {
            let v = f(&self.node_points[node]);
            out[k * d..(k + 1) * d].copy_from_slice(&v[..d]);
        }
        out
    }

    /// Pressure coefficients reproducing an affine function exactly.
    pub fn interpolate_affine_pressure(
        &self,
        value: impl Fn(&Point) -> f64,
        gradient: Point,
    ) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_pressure_dofs());
        for c in &self.pressure_centers {
            out.push(value(c));
            for g in gradient.iter().take(self.dim) {
                out.push(g * self.pressure_scale);
            }
        }
        out
    }

    /// Velocity value, gradient (`grad[i][j] = du_i/dx_j`) and Laplacian on
    /// a cell from a full nodal vector.
    pub fn velocity_at(
        &self,
        mesh: &BackgroundMesh,
        cell: usize,
        x: &Point,
        full: &[f64],
    ) -> Result<(Point, [[f64; 3]; 3], Point)> {
        let nodes = self.cell_nodes(mesh, cell)?;
        let s = self.shape(mesh, cell, x);
        let d = self.dim;
        let mut u = [0.0; 3];
        let mut g = [[0.0; 3]; 3];
        let mut lap = [0.0; 3];
        for (b, &node) in nodes.iter().enumerate() {
            for i in 0..d {
                let v = full[node * d + i];
                u[i] += v * s.values[b];
                for j in 0..d {
                    g[i][j] += v * s.gradients[b][j];
                    lap[i] += v * s.second[b][j];
                }
            }
        }
        Ok((u, g, lap))
    }

    pub fn pressure_at(&self, cell: usize, x: &Point, pressure: &[f64]) -> Result<(f64, Point)> {
        let g = self.pressure_group(cell).ok_or(Error::OutOfRange {
            what: "active cell",
            index: cell,
            len: self.pressure_group.len(),
        })?;
        let (vals, grads) = self.pressure_shape(cell, x)?;
        let base = g * self.pressure_block();
        let mut p = 0.0;
        let mut gp = [0.0; 3];
        for k in 0..vals.len() {
            p += pressure[base + k] * vals[k];
            for a in 0..3 {
                gp[a] += pressure[base + k] * grads[k][a];
            }
        }
        Ok((p, gp))
    }
}

fn add(o: [usize; 3], off: &[usize; 3]) -> [usize; 3] {
    [o[0] + off[0], o[1] + off[1], o[2] + off[2]]
}

fn reference(x: &Point, lo: &Point, h: &[f64; 3], dim: usize) -> Point {
    let mut t = [0.0; 3];
    for a in 0..dim {
        t[a] = (x[a] - lo[a]) / h[a];
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::aggregate_cells;
    use crate::geometry::{builtin_geometry, classify, CellClass, GeometryParams};
    use crate::quadrature::CutDecomposition;

    fn circle_space(
        m: u32,
        ext: Extension,
    ) -> (BackgroundMesh, Classification, AggregateMap, MixedSpace) {
        let mesh = BackgroundMesh::unit(2, 1 << m).unwrap();
        let ls = builtin_geometry("circle_cavity", &GeometryParams::default()).unwrap();
        let cls = classify(&mesh, ls.as_ref()).unwrap();
        let dec = CutDecomposition::build(&mesh, &cls).unwrap();
        let agg = aggregate_cells(&mesh, &cls, &dec, 0.0).unwrap();
        let space = MixedSpace::build(&mesh, &cls, &agg, SpaceVariant::Aggregated, ext).unwrap();
        (mesh, cls, agg, space)
    }

    #[test]
    fn tensor_extrapolation_coefficient() {
        // outer node (1.5, 1.5) against root [0,1]^2: corner (1,1) gets 3 * 3
        let basis = ScalarBasis::lagrange(2);
        let v = basis.values(&[1.5, 1.5, 0.0]);
        assert_eq!(v[ScalarBasis::lagrange_index(&[2, 2, 0], 2)], 9.0);
        assert_eq!(v[ScalarBasis::lagrange_index(&[0, 0, 0], 2)], 1.0);
        assert_eq!(v[ScalarBasis::lagrange_index(&[1, 2, 0], 2)], -9.0);
    }

    #[test]
    fn constraint_rows_sum_to_one_and_use_free_masters() {
        for ext in [Extension::Standard, Extension::Serendipity] {
            let (_, _, _, space) = circle_space(4, ext);
            assert!(!space.constraints().is_empty());
            for (node, row) in space.constraints().iter() {
                assert!(space.free_index(node).is_none());
                assert!((space.constraints().row_sum(node).unwrap() - 1.0).abs() < 1e-12);
                for &(m, _) in row {
                    assert!(space.free_index(m).is_some());
                }
            }
        }
    }

    #[test]
    fn constrained_nodes_are_outer_nodes() {
        let (mesh, cls, _, space) = circle_space(3, Extension::Standard);
        for node in 0..space.num_nodes() {
            let vef = mesh.vef_at(space.node_lattice(node));
            let outer = cls.vef_class(vef) == crate::geometry::VefClass::Outer;
            assert_eq!(space.free_index(node).is_none(), outer);
        }
    }

    #[test]
    fn polynomial_reproduction() {
        let q2 = |x: &Point| -> Point {
            [
                1.0 + x[0] * x[0] * x[1] * x[1] - 2.0 * x[0] * x[1],
                x[1] * x[1] - 0.5 * x[0] * x[0] * x[1] + 0.3,
                0.0,
            ]
        };
        let ser = |x: &Point| -> Point {
            [
                x[0] * x[0] * x[1] - x[1],
                2.0 * x[0] * x[1] * x[1] + x[0] * x[0],
                0.0,
            ]
        };
        for (ext, f) in [
            (Extension::Standard, &q2 as &dyn Fn(&Point) -> Point),
            (Extension::Serendipity, &ser as &dyn Fn(&Point) -> Point),
        ] {
            let (_, _, _, space) = circle_space(4, ext);
            let full = space
                .interpolate_constrained(&space.interpolate_velocity(f))
                .unwrap();
            for node in 0..space.num_nodes() {
                let e = f(&space.node_point(node));
                for i in 0..2 {
                    assert!((full[node * 2 + i] - e[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn serendipity_extension_kills_bubbles() {
        let (mesh, cls, agg, space) = circle_space(4, Extension::Serendipity);
        // the Q2 bubble of a root cell is 1 at its center node and 0 at the others
        let mut free = vec![0.0; space.num_velocity_dofs()];
        for &r in agg.roots() {
            let mut c = mesh.cell_lattice_origin(r);
            c[0] += 1;
            c[1] += 1;
            let f = space
                .free_index(space.node_at_lattice(&mesh, c).unwrap())
                .unwrap();
            free[f * 2] = 1.0;
            free[f * 2 + 1] = -1.0;
        }
        let full = space.interpolate_constrained(&free).unwrap();
        for cell in cls.cells_of_class(CellClass::Cut) {
            for node in space.cell_nodes(&mesh, cell).unwrap() {
                if space.free_index(node).is_none() {
                    assert_eq!(full[node * 2], 0.0);
                    assert_eq!(full[node * 2 + 1], 0.0);
                }
            }
        }
    }

    #[test]
    fn pressure_basis_at_root_center() {
        let (mesh, _, agg, space) = circle_space(3, Extension::Standard);
        let r = agg.root(0);
        let (v, _) = space.pressure_shape(r, &mesh.cell_center(r)).unwrap();
        assert_eq!(v, vec![1.0, 0.0, 0.0]);
        let p = space.interpolate_affine_pressure(|x| 2.0 * x[0] - 1.0, [2.0, 0.0, 0.0]);
        for cell in 0..mesh.num_cells() {
            if space.pressure_group(cell).is_some() {
                let x = [0.3, 0.9, 0.0];
                let (val, g) = space.pressure_at(cell, &x, &p).unwrap();
                assert!((val - (2.0 * 0.3 - 1.0)).abs() < 1e-13);
                assert!((g[0] - 2.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let (_, _, _, space) = circle_space(3, Extension::Standard);
        assert!(space.interpolate_constrained(&[0.0; 3]).is_err());
    }
}
