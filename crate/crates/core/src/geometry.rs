//! Implicit domains and cell classification.
//!
//! The physical domain is `{x : psi(x) < 0}`. Vertex values with
//! `|psi| <= ZERO_TOL` are treated as lying on the boundary; they count as
//! inside for cut-cell subdivision, but a cell whose only non-positive
//! vertices are such zeros touches the domain on a null set and is external.

use std::f64::consts::SQRT_2;

use crate::mesh::{BackgroundMesh, VefId};
use crate::quadrature::cut::{decompose_cut_cell, InterfaceElement};
use crate::{Error, Point, Result};

pub const ZERO_TOL: f64 = 1e-12;

/// A signed scalar field whose negative part is the physical domain.
pub trait LevelSet: Send + Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn name(&self) -> &str;
}

/// Complement of a ball: `psi = R - |x - c|`.
#[derive(Debug, Clone)]
pub struct BallCavity {
    pub dim: usize,
    pub center: Point,
    pub radius: f64,
    name: String,
}

impl BallCavity {
    pub fn new(dim: usize, center: Point, radius: f64, name: &str) -> Self {
        Self {
            dim,
            center,
            radius,
            name: name.to_string(),
        }
    }

    fn distance(&self, x: &Point) -> (f64, Point) {
        let mut d = [0.0; 3];
        for a in 0..self.dim {
            d[a] = x[a] - self.center[a];
        }
        (d.iter().map(|v| v * v).sum::<f64>().sqrt(), d)
    }
}

impl LevelSet for BallCavity {
    fn value(&self, x: &Point) -> f64 {
        self.radius - self.distance(x).0
    }

    fn gradient(&self, x: &Point) -> Point {
        let (r, d) = self.distance(x);
        if r == 0.0 {
            return [0.0; 3];
        }
        [-d[0] / r, -d[1] / r, -d[2] / r]
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Affine level set `psi = g . x + c`.
#[derive(Debug, Clone)]
pub struct Affine {
    pub gradient: Point,
    pub constant: f64,
    name: String,
}

impl Affine {
    pub fn new(gradient: Point, constant: f64) -> Self {
        Self {
            gradient,
            constant,
            name: "affine".into(),
        }
    }

    /// `psi = x_axis - offset`: the domain is the side below `offset`.
    pub fn halfspace(axis: usize, offset: f64) -> Self {
        let mut g = [0.0; 3];
        g[axis] = 1.0;
        Self {
            gradient: g,
            constant: -offset,
            name: "halfspace".into(),
        }
    }
}

impl LevelSet for Affine {
    fn value(&self, x: &Point) -> f64 {
        self.gradient[0] * x[0] + self.gradient[1] * x[1] + self.gradient[2] * x[2] + self.constant
    }

    fn gradient(&self, _x: &Point) -> Point {
        self.gradient
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Level set given by closures, for user-supplied shapes.
pub struct FnLevelSet<F, G> {
    pub value: F,
    pub gradient: G,
    pub name: String,
}

impl<F, G> LevelSet for FnLevelSet<F, G>
where
    F: Fn(&Point) -> f64 + Send + Sync,
    G: Fn(&Point) -> Point + Send + Sync,
{
    fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        (self.gradient)(x)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Optional parameters of the built-in shapes; unset fields take defaults.
#[derive(Debug, Clone, Default)]
pub struct GeometryParams {
    pub radius: Option<f64>,
    pub center: Option<Point>,
    /// Distance of the moving obstacle's center from the origin corner.
    pub ell: Option<f64>,
    pub axis: Option<usize>,
    pub offset: Option<f64>,
}

pub const BUILTIN_GEOMETRIES: [&str; 5] = [
    "circle_cavity",
    "sphere_cavity",
    "moving_circle",
    "moving_sphere",
    "halfspace",
];

/// Radius of the moving obstacle.
pub const MOVING_RADIUS: f64 = 0.225;

pub fn builtin_geometry(name: &str, params: &GeometryParams) -> Result<Box<dyn LevelSet>> {
    let ls: Box<dyn LevelSet> = match name {
        "circle_cavity" => Box::new(BallCavity::new(
            2,
            params.center.unwrap_or([0.5, 0.5, 0.0]),
            params.radius.unwrap_or(0.3),
            name,
        )),
        "sphere_cavity" => Box::new(BallCavity::new(
            3,
            params.center.unwrap_or([0.5; 3]),
            params.radius.unwrap_or(0.3),
            name,
        )),
        "moving_circle" => {
            let s = params.ell.unwrap_or(0.5 * SQRT_2) / SQRT_2;
            Box::new(BallCavity::new(
                2,
                [s, s, 0.0],
                params.radius.unwrap_or(MOVING_RADIUS),
                name,
            ))
        }
        "moving_sphere" => {
            let s = params.ell.unwrap_or(0.5 * 3f64.sqrt()) / 3f64.sqrt();
            Box::new(BallCavity::new(
                3,
                [s; 3],
                params.radius.unwrap_or(MOVING_RADIUS),
                name,
            ))
        }
        "halfspace" => Box::new(Affine::halfspace(
            params.axis.unwrap_or(0),
            params.offset.unwrap_or(0.5),
        )),
        _ => {
            return Err(Error::UnknownGeometry {
                name: name.to_string(),
                valid: BUILTIN_GEOMETRIES.join(", "),
            })
        }
    };
    Ok(ls)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    Internal,
    Cut,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VefClass {
    /// Belongs to at least one internal cell.
    Interior,
    /// Belongs to a cut cell and to no internal cell.
    Outer,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexSign {
    Inside,
    Zero,
    Outside,
}

impl VertexSign {
    pub fn of(value: f64) -> Self {
        if value < -ZERO_TOL {
            Self::Inside
        } else if value > ZERO_TOL {
            Self::Outside
        } else {
            Self::Zero
        }
    }
}

#[derive(Debug, Clone)]
pub struct Classification {
    dim: usize,
    cells: Vec<CellClass>,
    vertex_values: Vec<f64>,
    /// Indexed by entity dimension `0..=dim`.
    vefs: Vec<Vec<VefClass>>,
}

impl Classification {
    pub fn cell_class(&self, cell: usize) -> CellClass {
        self.cells[cell]
    }

    pub fn cell_classes(&self) -> &[CellClass] {
        &self.cells
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.cells[cell] != CellClass::External
    }

    pub fn active_cells(&self) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&c| self.is_active(c))
            .collect()
    }

    pub fn cells_of_class(&self, class: CellClass) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&c| self.cells[c] == class)
            .collect()
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cells.iter().filter(|&&c| c == class).count()
    }

    /// Level-set value at a mesh vertex, with near-zeros snapped to zero.
    pub fn vertex_value(&self, vertex: usize) -> f64 {
        self.vertex_values[vertex]
    }

    pub fn vertex_values(&self) -> &[f64] {
        &self.vertex_values
    }

    pub fn vef_class(&self, vef: VefId) -> VefClass {
        self.vefs[vef.dim][vef.index]
    }

    pub fn outer_vefs(&self) -> Vec<VefId> {
        let mut out = Vec::new();
        for (dim, flags) in self.vefs.iter().enumerate().take(self.dim + 1) {
            for (index, &f) in flags.iter().enumerate() {
                if f == VefClass::Outer {
                    out.push(VefId { dim, index });
                }
            }
        }
        out
    }

    pub fn cell_vertex_values(&self, mesh: &BackgroundMesh, cell: usize) -> Vec<f64> {
        mesh.cell_vertex_ids(cell)
            .into_iter()
            .map(|v| self.vertex_values[v])
            .collect()
    }
}

/// Classifies every background cell and every vertex/edge/face against the
/// domain.
pub fn classify(mesh: &BackgroundMesh, level_set: &dyn LevelSet) -> Result<Classification> {
    let dim = mesh.dim();
    let mut vertex_values = Vec::with_capacity(mesh.num_vertices());
    for v in 0..mesh.num_vertices() {
        let value = level_set.value(&mesh.vertex_point(v));
        if !value.is_finite() {
            return Err(Error::NonFiniteLevelSet { vertex: v, value });
        }
        vertex_values.push(if value.abs() <= ZERO_TOL { 0.0 } else { value });
    }

    let mut cells = Vec::with_capacity(mesh.num_cells());
    for cell in 0..mesh.num_cells() {
        let ids = mesh.cell_vertex_ids(cell);
        let signs: Vec<VertexSign> = ids
            .iter()
            .map(|&v| VertexSign::of(vertex_values[v]))
            .collect();
        let any_in = signs.contains(&VertexSign::Inside);
        let any_out = signs.contains(&VertexSign::Outside);
        let class = match (any_in, any_out) {
            (true, true) => CellClass::Cut,
            (_, false) => {
                if any_in || signs.iter().all(|&s| s == VertexSign::Zero) {
                    CellClass::Internal
                } else {
                    CellClass::External
                }
            }
            (false, true) => CellClass::External,
        };
        cells.push(class);
    }

    check_single_cuts(mesh, level_set, &vertex_values, &cells)?;

    let mut touches_internal: Vec<Vec<bool>> = (0..=dim)
        .map(|k| vec![false; mesh.num_entities(k)])
        .collect();
    let mut touches_cut = touches_internal.clone();
    for cell in 0..mesh.num_cells() {
        let target = match cells[cell] {
            CellClass::Internal => &mut touches_internal,
            CellClass::Cut => &mut touches_cut,
            CellClass::External => continue,
        };
        target[dim][cell] = true;
        for vef in mesh.vefs_of_cell(cell)? {
            target[vef.dim][vef.index] = true;
        }
    }
    let vefs = (0..=dim)
        .map(|k| {
            touches_internal[k]
                .iter()
                .zip(&touches_cut[k])
                .map(|(&i, &c)| {
                    if i {
                        VefClass::Interior
                    } else if c {
                        VefClass::Outer
                    } else {
                        VefClass::External
                    }
                })
                .collect()
        })
        .collect();

    Ok(Classification {
        dim,
        cells,
        vertex_values,
        vefs,
    })
}

/// Rejects edges whose endpoints agree in sign but whose midpoint does not.
fn check_single_cuts(
    mesh: &BackgroundMesh,
    level_set: &dyn LevelSet,
    values: &[f64],
    cells: &[CellClass],
) -> Result<()> {
    let dim = mesh.dim();
    for edge in 0..mesh.num_entities(1) {
        let c = mesh.vef_lattice(VefId {
            dim: 1,
            index: edge,
        })?;
        let axis = (0..dim).find(|&a| c[a] % 2 == 1).unwrap();
        let mut a = c;
        let mut b = c;
        a[axis] -= 1;
        b[axis] += 1;
        let va = values[mesh.vef_at(a).index];
        let vb = values[mesh.vef_at(b).index];
        let (sa, sb) = (VertexSign::of(va), VertexSign::of(vb));
        if sa != sb || sa == VertexSign::Zero {
            continue;
        }
        let mid = VertexSign::of(level_set.value(&mesh.lattice_point(c)));
        if mid != sa && mid != VertexSign::Zero {
            let cell = mesh
                .cells_around_lattice_point(c)
                .into_iter()
                .find(|&k| cells[k] != CellClass::External)
                .unwrap_or_else(|| mesh.cells_around_lattice_point(c)[0]);
            return Err(Error::DoubleCut { cell, edge });
        }
    }
    Ok(())
}

/// Piecewise-linear reconstruction of the boundary inside every cut cell.
pub fn reconstruct_interface(
    mesh: &BackgroundMesh,
    classification: &Classification,
) -> Result<Vec<(usize, Vec<InterfaceElement>)>> {
    let mut out = Vec::new();
    for cell in classification.cells_of_class(CellClass::Cut) {
        let values = classification.cell_vertex_values(mesh, cell);
        let piece = decompose_cut_cell(mesh, cell, &values)?;
        out.push((cell, piece.interface));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64) -> Affine {
        Affine::new([0.0; 3], v)
    }

    #[test]
    fn constant_level_sets() {
        let mesh = BackgroundMesh::unit(2, 4).unwrap();
        let inside = classify(&mesh, &constant(-1.0)).unwrap();
        assert_eq!(inside.count(CellClass::Internal), 16);
        assert!(inside.outer_vefs().is_empty());
        let outside = classify(&mesh, &constant(1.0)).unwrap();
        assert_eq!(outside.count(CellClass::External), 16);
    }

    #[test]
    fn circle_counts_match_sign_scan() {
        let mesh = BackgroundMesh::unit(2, 8).unwrap();
        let ls = builtin_geometry("circle_cavity", &GeometryParams::default()).unwrap();
        let cls = classify(&mesh, ls.as_ref()).unwrap();
        // independent scan: sample vertex signs directly
        let (mut internal, mut cut, mut external) = (0, 0, 0);
        for j in 0..8 {
            for i in 0..8 {
                let mut neg = 0;
                let mut pos = 0;
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let x = (i + di) as f64 / 8.0;
                    let y = (j + dj) as f64 / 8.0;
                    let v = 0.3 - ((x - 0.5f64).powi(2) + (y - 0.5f64).powi(2)).sqrt();
                    if v < 0.0 {
                        neg += 1
                    } else {
                        pos += 1
                    }
                }
                match (neg, pos) {
                    (4, 0) => internal += 1,
                    (0, 4) => external += 1,
                    _ => cut += 1,
                }
            }
        }
        assert_eq!(cls.count(CellClass::Internal), internal);
        assert_eq!(cls.count(CellClass::Cut), cut);
        assert_eq!(cls.count(CellClass::External), external);
        assert_eq!(internal + cut + external, 64);
    }

    #[test]
    fn outer_vefs_touch_no_internal_cell() {
        let mesh = BackgroundMesh::unit(2, 8).unwrap();
        let ls = builtin_geometry("circle_cavity", &GeometryParams::default()).unwrap();
        let cls = classify(&mesh, ls.as_ref()).unwrap();
        let outer = cls.outer_vefs();
        assert!(!outer.is_empty());
        for vef in outer {
            let cells = mesh.cells_of_vef(vef).unwrap();
            assert!(cells.iter().any(|&c| cls.cell_class(c) == CellClass::Cut));
            assert!(cells
                .iter()
                .all(|&c| cls.cell_class(c) != CellClass::Internal));
        }
    }

    #[test]
    fn nan_level_set_reports_vertex() {
        let mesh = BackgroundMesh::unit(2, 2).unwrap();
        let ls = FnLevelSet {
            value: |x: &Point| {
                if x[0] > 0.9 && x[1] > 0.9 {
                    f64::NAN
                } else {
                    -1.0
                }
            },
            gradient: |_: &Point| [0.0; 3],
            name: "nan".into(),
        };
        match classify(&mesh, &ls) {
            Err(Error::NonFiniteLevelSet { vertex, .. }) => assert_eq!(vertex, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn double_cut_edge_is_rejected() {
        let mesh = BackgroundMesh::unit(2, 1).unwrap();
        // a thin obstacle crossing the bottom edge only between its endpoints
        let ls = BallCavity::new(2, [0.5, 0.0, 0.0], 0.2, "thin");
        assert!(matches!(classify(&mesh, &ls), Err(Error::DoubleCut { .. })));
    }

    #[test]
    fn builtin_defaults() {
        let p = GeometryParams::default();
        let c = builtin_geometry("circle_cavity", &p).unwrap();
        assert!((c.value(&[0.5, 0.5, 0.0]) - 0.3).abs() < 1e-15);
        let m = builtin_geometry(
            "moving_circle",
            &GeometryParams {
                ell: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((m.value(&[0.0; 3]) - MOVING_RADIUS).abs() < 1e-15);
        let h = builtin_geometry(
            "halfspace",
            &GeometryParams {
                axis: Some(0),
                offset: Some(0.5),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((h.value(&[0.25, 0.7, 0.0]) + 0.25).abs() < 1e-15);
        let err = builtin_geometry("popcorn", &p).err().unwrap().to_string();
        assert!(err.contains("circle_cavity") && err.contains("halfspace"));
    }

    #[test]
    fn mesh_aligned_plane_produces_no_cut_cells() {
        let mesh = BackgroundMesh::unit(2, 4).unwrap();
        let cls = classify(&mesh, &Affine::halfspace(0, 0.5)).unwrap();
        assert_eq!(cls.count(CellClass::Cut), 0);
        assert_eq!(cls.count(CellClass::Internal), 8);
    }

    #[test]
    fn refinement_keeps_internal_children_inside() {
        let ls = builtin_geometry("circle_cavity", &GeometryParams::default()).unwrap();
        for m in 3..6 {
            let coarse = BackgroundMesh::unit(2, 1 << m).unwrap();
            let fine = BackgroundMesh::unit(2, 1 << (m + 1)).unwrap();
            let cc = classify(&coarse, ls.as_ref()).unwrap();
            let cf = classify(&fine, ls.as_ref()).unwrap();
            for cell in cc.cells_of_class(CellClass::Internal) {
                let [i, j, _] = coarse.cell_coords(cell);
                for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    let child = fine.cell_index([2 * i + di, 2 * j + dj, 0]);
                    assert_ne!(cf.cell_class(child), CellClass::External);
                }
            }
        }
    }
}
