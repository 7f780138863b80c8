//! Uniform Cartesian background meshes.
//!
//! Every geometric entity (vertex, edge, face, cell) is addressed through a
//! *doubled lattice*: an entity whose lower corner is the vertex `(i, j, k)`
//! and which extends along the axes in a bitmask `m` sits at doubled
//! coordinates `c_a = 2 i_a + m_a`. The doubled lattice is also exactly the
//! set of nodes of a Q2 Lagrangian space, so the owner entity of a Q2 node is
//! the entity sharing its doubled coordinates.
//!
//! Indexing formulas (x fastest everywhere):
//! - cell `(i, j, k)` -> `i + nx (j + ny k)`
//! - vertex `(i, j, k)` -> `i + (nx + 1) (j + (ny + 1) k)`
//! - an entity of dimension `k` is numbered inside its orientation class
//!   (classes ordered by ascending extent bitmask) lexicographically over the
//!   class grid, whose size along axis `a` is `n_a` if the entity extends
//!   along `a` and `n_a + 1` otherwise; classes are laid out one after another.

use crate::{Error, Point, Result};

/// Identifier of a vertex, edge, face (or cell) of the background mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VefId {
    pub dim: usize,
    pub index: usize,
}

/// What lies across a cell facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMesh {
    dim: usize,
    cells: [usize; 3],
    origin: Point,
    lengths: [f64; 3],
    h: [f64; 3],
}

impl BackgroundMesh {
    pub fn new(
        dim: usize,
        cells_per_axis: &[usize],
        origin: &[f64],
        box_lengths: &[f64],
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        if cells_per_axis.len() != dim || origin.len() != dim || box_lengths.len() != dim {
            return Err(Error::InvalidMesh(format!(
                "expected {dim} entries per axis argument"
            )));
        }
        let mut cells = [0; 3];
        let mut o = [0.0; 3];
        let mut lengths = [0.0; 3];
        let mut h = [0.0; 3];
        for a in 0..dim {
            if cells_per_axis[a] == 0 {
                return Err(Error::InvalidMesh(format!("axis {a} has zero cells")));
            }
            if !box_lengths[a].is_finite() || box_lengths[a] <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "axis {a} has non-positive length {}",
                    box_lengths[a]
                )));
            }
            if !origin[a].is_finite() {
                return Err(Error::InvalidMesh(format!("axis {a} origin is not finite")));
            }
            cells[a] = cells_per_axis[a];
            o[a] = origin[a];
            lengths[a] = box_lengths[a];
            h[a] = box_lengths[a] / cells_per_axis[a] as f64;
        }
        Ok(Self {
            dim,
            cells,
            origin: o,
            lengths,
            h,
        })
    }

    /// Unit square/cube split into `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![n; dim], &vec![0.0; dim], &vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells[..self.dim]
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn box_lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    /// Characteristic cell size (largest edge length).
    pub fn cell_size(&self) -> f64 {
        self.h().iter().cloned().fold(0.0, f64::max)
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis().iter().product()
    }

    pub fn num_vertices(&self) -> usize {
        self.cells_per_axis().iter().map(|n| n + 1).product()
    }

    pub fn num_facets(&self) -> usize {
        self.num_entities(self.dim - 1)
    }

    /// Number of entities of dimension `k` (`k = dim` gives the cells).
    pub fn num_entities(&self, k: usize) -> usize {
        classes(self.dim, k)
            .iter()
            .map(|&m| self.class_count(m))
            .sum()
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let mut rest = cell;
        let mut c = [0; 3];
        for a in 0..self.dim {
            c[a] = rest % self.cells[a];
            rest /= self.cells[a];
        }
        c
    }

    pub fn cell_index(&self, coords: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            idx = idx * self.cells[a] + coords[a];
        }
        idx
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.num_cells() {
            return Err(Error::OutOfRange {
                what: "cell",
                index: cell,
                len: self.num_cells(),
            });
        }
        Ok(())
    }

    /// Lower and upper corners of a cell.
    pub fn cell_bounds(&self, cell: usize) -> (Point, Point) {
        let c = self.cell_coords(cell);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..self.dim {
            lo[a] = self.origin[a] + c[a] as f64 * self.h[a];
            hi[a] = lo[a] + self.h[a];
        }
        (lo, hi)
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let (lo, hi) = self.cell_bounds(cell);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = 0.5 * (lo[a] + hi[a]);
        }
        x
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    /// Corner points of a cell, x fastest.
    pub fn cell_vertices(&self, cell: usize) -> Vec<Point> {
        let (lo, _) = self.cell_bounds(cell);
        (0..1usize << self.dim)
            .map(|corner| {
                let mut x = lo;
                for a in 0..self.dim {
                    if corner >> a & 1 == 1 {
                        x[a] += self.h[a];
                    }
                }
                x
            })
            .collect()
    }

    /// Global vertex indices of the corners of a cell, in the same order as
    /// [`Self::cell_vertices`].
    pub fn cell_vertex_ids(&self, cell: usize) -> Vec<usize> {
        let c = self.cell_coords(cell);
        (0..1usize << self.dim)
            .map(|corner| {
                let mut v = [0; 3];
                for a in 0..self.dim {
                    v[a] = c[a] + (corner >> a & 1);
                }
                self.vertex_index(v)
            })
            .collect()
    }

    pub fn vertex_index(&self, coords: [usize; 3]) -> usize {
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            idx = idx * (self.cells[a] + 1) + coords[a];
        }
        idx
    }

    pub fn vertex_point(&self, vertex: usize) -> Point {
        let mut rest = vertex;
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            let i = rest % (self.cells[a] + 1);
            rest /= self.cells[a] + 1;
            x[a] = self.origin[a] + i as f64 * self.h[a];
        }
        x
    }

    // ---- doubled lattice -------------------------------------------------

    /// Extent of the doubled lattice per axis (`2 n + 1`).
    pub fn lattice_dims(&self) -> [usize; 3] {
        let mut d = [1; 3];
        for a in 0..self.dim {
            d[a] = 2 * self.cells[a] + 1;
        }
        d
    }

    pub fn lattice_len(&self) -> usize {
        self.lattice_dims()[..self.dim].iter().product()
    }

    pub fn lattice_index(&self, c: [usize; 3]) -> usize {
        let d = self.lattice_dims();
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            idx = idx * d[a] + c[a];
        }
        idx
    }

    pub fn lattice_coords(&self, index: usize) -> [usize; 3] {
        let d = self.lattice_dims();
        let mut rest = index;
        let mut c = [0; 3];
        for a in 0..self.dim {
            c[a] = rest % d[a];
            rest /= d[a];
        }
        c
    }

    pub fn lattice_point(&self, c: [usize; 3]) -> Point {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + 0.5 * c[a] as f64 * self.h[a];
        }
        x
    }

    /// Doubled coordinates of the lower corner of a cell.
    pub fn cell_lattice_origin(&self, cell: usize) -> [usize; 3] {
        let c = self.cell_coords(cell);
        let mut o = [0; 3];
        for a in 0..self.dim {
            o[a] = 2 * c[a];
        }
        o
    }

    fn class_dims(&self, mask: usize) -> [usize; 3] {
        let mut d = [1; 3];
        for a in 0..self.dim {
            d[a] = if mask >> a & 1 == 1 {
                self.cells[a]
            } else {
                self.cells[a] + 1
            };
        }
        d
    }

    fn class_count(&self, mask: usize) -> usize {
        self.class_dims(mask)[..self.dim].iter().product()
    }

    fn class_offset(&self, k: usize, mask: usize) -> usize {
        classes(self.dim, k)
            .into_iter()
            .take_while(|&m| m != mask)
            .map(|m| self.class_count(m))
            .sum()
    }

    /// Entity located at doubled coordinates `c`.
    pub fn vef_at(&self, c: [usize; 3]) -> VefId {
        let mut mask = 0;
        for a in 0..self.dim {
            mask |= (c[a] & 1) << a;
        }
        let k = mask.count_ones() as usize;
        let dims = self.class_dims(mask);
        let mut idx = 0;
        for a in (0..self.dim).rev() {
            idx = idx * dims[a] + c[a] / 2;
        }
        VefId {
            dim: k,
            index: self.class_offset(k, mask) + idx,
        }
    }

    /// Doubled coordinates of an entity.
    pub fn vef_lattice(&self, vef: VefId) -> Result<[usize; 3]> {
        let mut rest = vef.index;
        for mask in classes(self.dim, vef.dim) {
            let count = self.class_count(mask);
            if rest < count {
                let dims = self.class_dims(mask);
                let mut c = [0; 3];
                for a in 0..self.dim {
                    c[a] = 2 * (rest % dims[a]) + (mask >> a & 1);
                    rest /= dims[a];
                }
                return Ok(c);
            }
            rest -= count;
        }
        Err(Error::OutOfRange {
            what: "vef",
            index: vef.index,
            len: self.num_entities(vef.dim.min(self.dim)),
        })
    }

    /// Cells whose closure contains the entity.
    pub fn cells_of_vef(&self, vef: VefId) -> Result<Vec<usize>> {
        let c = self.vef_lattice(vef)?;
        Ok(self.cells_around_lattice_point(c))
    }

    /// Cells whose closure contains the doubled-lattice point `c`.
    pub fn cells_around_lattice_point(&self, c: [usize; 3]) -> Vec<usize> {
        let mut ranges: [(usize, usize); 3] = [(0, 1); 3];
        for a in 0..self.dim {
            ranges[a] = if c[a] % 2 == 1 {
                ((c[a] - 1) / 2, (c[a] - 1) / 2 + 1)
            } else {
                let v = c[a] / 2;
                (v.saturating_sub(1), (v + 1).min(self.cells[a]))
            };
        }
        let mut out = Vec::new();
        for k in ranges[2].0..ranges[2].1 {
            for j in ranges[1].0..ranges[1].1 {
                for i in ranges[0].0..ranges[0].1 {
                    out.push(self.cell_index([i, j, k]));
                }
            }
        }
        out
    }

    /// All lower-dimensional entities of a cell grouped by dimension
    /// (vertices first), each group in lexicographic doubled-lattice order.
    pub fn vefs_of_cell(&self, cell: usize) -> Result<Vec<VefId>> {
        self.check_cell(cell)?;
        let o = self.cell_lattice_origin(cell);
        let mut out = Vec::new();
        for k in 0..self.dim {
            for local in 0..3usize.pow(self.dim as u32) {
                let mut c = o;
                let mut rest = local;
                let mut odd = 0;
                for a in 0..self.dim {
                    let off = rest % 3;
                    rest /= 3;
                    c[a] += off;
                    odd += off % 2;
                }
                if odd == k {
                    out.push(self.vef_at(c));
                }
            }
        }
        Ok(out)
    }

    /// Facet index (within dimension `dim - 1`) of the facet of `cell`
    /// normal to `axis` on side `upper`.
    pub fn cell_facet(&self, cell: usize, axis: usize, upper: bool) -> usize {
        let mut c = self.cell_lattice_origin(cell);
        for a in 0..self.dim {
            c[a] += 1;
        }
        c[axis] = c[axis] - 1 + 2 * upper as usize;
        self.vef_at(c).index
    }

    /// Facets of a cell with what lies across each, in the order
    /// `-x, +x, -y, +y[, -z, +z]`.
    pub fn cell_neighbors_through_facets(&self, cell: usize) -> Result<Vec<(usize, Neighbor)>> {
        self.check_cell(cell)?;
        let coords = self.cell_coords(cell);
        let mut out = Vec::with_capacity(2 * self.dim);
        for a in 0..self.dim {
            for upper in [false, true] {
                let facet = self.cell_facet(cell, a, upper);
                let neighbor = if upper {
                    if coords[a] + 1 < self.cells[a] {
                        let mut n = coords;
                        n[a] += 1;
                        Neighbor::Cell(self.cell_index(n))
                    } else {
                        Neighbor::Boundary
                    }
                } else if coords[a] > 0 {
                    let mut n = coords;
                    n[a] -= 1;
                    Neighbor::Cell(self.cell_index(n))
                } else {
                    Neighbor::Boundary
                };
                out.push((facet, neighbor));
            }
        }
        Ok(out)
    }

    /// Normal axis of a facet.
    pub fn facet_axis(&self, facet: usize) -> Result<usize> {
        let c = self.vef_lattice(VefId {
            dim: self.dim - 1,
            index: facet,
        })?;
        Ok((0..self.dim)
            .find(|&a| c[a] % 2 == 0)
            .expect("facet has one even axis"))
    }

    /// The cells below and above a facet along its normal axis.
    pub fn facet_cells(&self, facet: usize) -> Result<[Option<usize>; 2]> {
        let c = self.vef_lattice(VefId {
            dim: self.dim - 1,
            index: facet,
        })?;
        let axis = (0..self.dim).find(|&a| c[a] % 2 == 0).unwrap();
        let mut base = [0; 3];
        for a in 0..self.dim {
            base[a] = if a == axis { c[a] / 2 } else { (c[a] - 1) / 2 };
        }
        let lower = if base[axis] > 0 {
            let mut b = base;
            b[axis] -= 1;
            Some(self.cell_index(b))
        } else {
            None
        };
        let upper = if base[axis] < self.cells[axis] {
            Some(self.cell_index(base))
        } else {
            None
        };
        Ok([lower, upper])
    }

    /// Corner points of a facet: 2 in 2D, 4 in 3D ordered as a
    /// counter-clockwise loop in the facet's tangent axes.
    pub fn facet_vertices(&self, facet: usize) -> Result<Vec<Point>> {
        let c = self.vef_lattice(VefId {
            dim: self.dim - 1,
            index: facet,
        })?;
        let mut lo = [0.0; 3];
        for a in 0..self.dim {
            lo[a] = self.origin[a] + 0.5 * (c[a] - c[a] % 2) as f64 * self.h[a];
        }
        let tangents: Vec<usize> = (0..self.dim).filter(|&a| c[a] % 2 == 1).collect();
        let mut out = Vec::new();
        let offsets: &[(usize, usize)] = if self.dim == 2 {
            &[(0, 0), (1, 0)]
        } else {
            &[(0, 0), (1, 0), (1, 1), (0, 1)]
        };
        for &(s, t) in offsets {
            let mut x = lo;
            x[tangents[0]] += s as f64 * self.h[tangents[0]];
            if self.dim == 3 {
                x[tangents[1]] += t as f64 * self.h[tangents[1]];
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Vertex indices matching [`Self::facet_vertices`].
    pub fn facet_vertex_ids(&self, facet: usize) -> Result<Vec<usize>> {
        let c = self.vef_lattice(VefId {
            dim: self.dim - 1,
            index: facet,
        })?;
        let mut lo = c;
        for a in 0..self.dim {
            lo[a] -= c[a] % 2;
        }
        let tangents: Vec<usize> = (0..self.dim).filter(|&a| c[a] % 2 == 1).collect();
        let offsets: &[(usize, usize)] = if self.dim == 2 {
            &[(0, 0), (1, 0)]
        } else {
            &[(0, 0), (1, 0), (1, 1), (0, 1)]
        };
        Ok(offsets
            .iter()
            .map(|&(s, t)| {
                let mut v = lo;
                v[tangents[0]] += 2 * s;
                if self.dim == 3 {
                    v[tangents[1]] += 2 * t;
                }
                self.vef_at(v).index
            })
            .collect())
    }

    /// Box boundary side a facet lies on, as `(axis, upper)`.
    pub fn boundary_side(&self, facet: usize) -> Result<Option<(usize, bool)>> {
        let axis = self.facet_axis(facet)?;
        let [lower, upper] = self.facet_cells(facet)?;
        Ok(match (lower, upper) {
            (None, Some(_)) => Some((axis, false)),
            (Some(_), None) => Some((axis, true)),
            _ => None,
        })
    }
}

/// Orientation classes (extent bitmasks) of dimension `k`, ascending.
fn classes(dim: usize, k: usize) -> Vec<usize> {
    (0..1usize << dim)
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh_counts() {
        let m = BackgroundMesh::unit(2, 1).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_facets(), 4);
    }

    #[test]
    fn level_three_square() {
        let m = BackgroundMesh::unit(2, 8).unwrap();
        assert_eq!(m.num_cells(), 64);
        assert_eq!(m.num_vertices(), 81);
        assert_eq!(m.cell_size(), 0.125);
    }

    #[test]
    fn cube_counts_match_lattice_formulas() {
        for n in 1..5usize {
            let m = BackgroundMesh::unit(3, n).unwrap();
            assert_eq!(m.num_vertices(), (n + 1).pow(3));
            assert_eq!(m.num_facets(), 3 * n * n * (n + 1));
            assert_eq!(m.num_entities(1), 3 * n * (n + 1) * (n + 1));
            assert_eq!(m.num_entities(3), n.pow(3));
        }
        let m = BackgroundMesh::unit(3, 2).unwrap();
        assert_eq!(
            (m.num_cells(), m.num_vertices(), m.num_facets()),
            (8, 27, 36)
        );
    }

    #[test]
    fn invalid_dimensions_rejected() {
        assert!(BackgroundMesh::new(2, &[0, 2], &[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(BackgroundMesh::new(2, &[2, 2], &[0.0, 0.0], &[1.0, -1.0]).is_err());
        assert!(BackgroundMesh::new(4, &[2; 4], &[0.0; 4], &[1.0; 4]).is_err());
    }

    #[test]
    fn corner_cell_neighbors() {
        let m = BackgroundMesh::unit(2, 2).unwrap();
        let n: Vec<Neighbor> = m
            .cell_neighbors_through_facets(0)
            .unwrap()
            .into_iter()
            .map(|(_, n)| n)
            .collect();
        assert_eq!(
            n,
            vec![
                Neighbor::Boundary,
                Neighbor::Cell(1),
                Neighbor::Boundary,
                Neighbor::Cell(2)
            ]
        );
    }

    #[test]
    fn center_cell_neighbors() {
        let m = BackgroundMesh::unit(2, 3).unwrap();
        let mut n: Vec<usize> = m
            .cell_neighbors_through_facets(4)
            .unwrap()
            .into_iter()
            .filter_map(|(_, n)| match n {
                Neighbor::Cell(c) => Some(c),
                Neighbor::Boundary => None,
            })
            .collect();
        n.sort();
        assert_eq!(n, vec![1, 3, 5, 7]);
    }

    #[test]
    fn neighbors_3d_follow_index_arithmetic() {
        let n = 4;
        let m = BackgroundMesh::unit(3, n).unwrap();
        let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
        let got: Vec<Neighbor> = m
            .cell_neighbors_through_facets(idx(1, 1, 1))
            .unwrap()
            .into_iter()
            .map(|(_, n)| n)
            .collect();
        let expect: Vec<Neighbor> = [
            idx(0, 1, 1),
            idx(2, 1, 1),
            idx(1, 0, 1),
            idx(1, 2, 1),
            idx(1, 1, 0),
            idx(1, 1, 2),
        ]
        .into_iter()
        .map(Neighbor::Cell)
        .collect();
        assert_eq!(got, expect);
        assert!(m.cell_neighbors_through_facets(64).is_err());
    }

    #[test]
    fn vef_counts_per_cell() {
        let m2 = BackgroundMesh::unit(2, 3).unwrap();
        let v = m2.vefs_of_cell(4).unwrap();
        assert_eq!(v.iter().filter(|v| v.dim == 0).count(), 4);
        assert_eq!(v.iter().filter(|v| v.dim == 1).count(), 4);
        let m3 = BackgroundMesh::unit(3, 2).unwrap();
        let v = m3.vefs_of_cell(3).unwrap();
        assert_eq!(v.len(), 26);
        assert_eq!(v.iter().filter(|v| v.dim == 1).count(), 12);
        assert_eq!(v.iter().filter(|v| v.dim == 2).count(), 6);
    }

    #[test]
    fn shared_edge_has_same_id_from_both_cells() {
        let m = BackgroundMesh::unit(2, 3).unwrap();
        let a = m.cell_facet(4, 0, true);
        let b = m.cell_facet(5, 0, false);
        assert_eq!(a, b);
        let va: std::collections::HashSet<_> = m.vefs_of_cell(4).unwrap().into_iter().collect();
        let vb: std::collections::HashSet<_> = m.vefs_of_cell(5).unwrap().into_iter().collect();
        // one shared edge and its two vertices
        assert_eq!(va.intersection(&vb).count(), 3);
    }

    #[test]
    fn facet_incidence_is_symmetric() {
        for (dim, n) in [(2, 3), (3, 3)] {
            let m = BackgroundMesh::unit(dim, n).unwrap();
            let mut count = vec![0; m.num_facets()];
            for cell in 0..m.num_cells() {
                for (f, _) in m.cell_neighbors_through_facets(cell).unwrap() {
                    count[f] += 1;
                    let cells = m.facet_cells(f).unwrap();
                    assert!(cells.contains(&Some(cell)));
                }
            }
            for f in 0..m.num_facets() {
                let cells = m.facet_cells(f).unwrap();
                let expected = cells.iter().flatten().count();
                assert_eq!(count[f], expected);
                assert!(expected == 1 || expected == 2);
            }
        }
    }

    #[test]
    fn vef_lattice_roundtrip() {
        let m = BackgroundMesh::unit(3, 3).unwrap();
        for idx in 0..m.lattice_len() {
            let c = m.lattice_coords(idx);
            let v = m.vef_at(c);
            assert_eq!(m.vef_lattice(v).unwrap(), c);
        }
    }

    #[test]
    fn volumes_sum_to_box() {
        let m = BackgroundMesh::new(3, &[3, 4, 5], &[-1.0, 0.0, 2.0], &[0.3, 0.7, 1.1]).unwrap();
        let total = m.num_cells() as f64 * m.cell_volume();
        assert!((total - 0.3 * 0.7 * 1.1).abs() <= 1e-14 * total);
        let (lo, hi) = m.cell_bounds(m.num_cells() - 1);
        assert!((lo[2] - (2.0 + 4.0 * 0.22)).abs() < 1e-12);
        assert!((hi[0] - (-0.7)).abs() < 1e-12);
    }
}
