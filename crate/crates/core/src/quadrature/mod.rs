//! Quadrature on full cells, cut cells, unfitted boundaries and clipped
//! facets.
//!
//! Full cells use tensor Gauss-Legendre rules. Simplices use conical product
//! rules (Gauss-Legendre in collapsed coordinates with the Duffy Jacobian
//! folded into the weights), which are exact for the requested total degree
//! and have strictly positive weights.

pub mod cut;

use std::sync::OnceLock;

use crate::geometry::{CellClass, Classification};
use crate::mesh::{BackgroundMesh, Neighbor};
use crate::{Error, Point, Result};

pub use cut::{decompose_cut_cell, CutCell, FacetPiece, InterfaceElement};

/// Highest polynomial degree the generated rules support.
pub const MAX_DEGREE: usize = 11;

/// Default integration degree for Q2/P1 integrands.
pub const DEFAULT_DEGREE: usize = 6;

#[derive(Debug, Clone, Default)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    fn extend(&mut self, other: QuadratureRule) {
        self.points.extend(other.points);
        self.weights.extend(other.weights);
    }
}

/// A surface rule whose points carry the outward unit normal of the domain.
#[derive(Debug, Clone, Default)]
pub struct BoundaryRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
}

impl BoundaryRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn push_rule(&mut self, rule: QuadratureRule, normal: Point) {
        for (x, w) in rule.points.into_iter().zip(rule.weights) {
            self.points.push(x);
            self.weights.push(w);
            self.normals.push(normal);
        }
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Tensor Gauss rule on an axis-aligned box, exact to `degree` per axis.
pub fn box_rule(dim: usize, lo: &Point, hi: &Point, degree: usize) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let (x, w) = gauss_legendre(points_for(degree));
    let n = x.len();
    let mut rule = QuadratureRule::default();
    let total = n.pow(dim as u32);
    for idx in 0..total {
        let mut rest = idx;
        let mut p = [0.0; 3];
        let mut weight = 1.0;
        for a in 0..dim {
            let k = rest % n;
            rest /= n;
            p[a] = lo[a] + x[k] * (hi[a] - lo[a]);
            weight *= w[k] * (hi[a] - lo[a]);
        }
        rule.points.push(p);
        rule.weights.push(weight);
    }
    Ok(rule)
}

/// Reference simplex rules (barycentric-free: points in the unit simplex
/// with vertices `0, e_1, ..., e_k`), cached per dimension and degree.
fn reference_simplex(k: usize, degree: usize) -> &'static QuadratureRule {
    static CACHE: OnceLock<Vec<Vec<QuadratureRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=3)
            .map(|k| {
                (0..=MAX_DEGREE)
                    .map(|d| build_reference_simplex(k, d))
                    .collect()
            })
            .collect()
    });
    &cache[k][degree]
}

fn build_reference_simplex(k: usize, degree: usize) -> QuadratureRule {
    let mut rule = QuadratureRule::default();
    match k {
        0 => {
            rule.points.push([0.0; 3]);
            rule.weights.push(1.0);
        }
        1 => {
            let (x, w) = gauss_legendre(points_for(degree));
            for (xi, wi) in x.into_iter().zip(w) {
                rule.points.push([xi, 0.0, 0.0]);
                rule.weights.push(wi);
            }
        }
        2 => {
            let (xu, wu) = gauss_legendre(points_for(degree + 1));
            let (xv, wv) = gauss_legendre(points_for(degree));
            for (u, a) in xu.iter().zip(&wu) {
                for (v, b) in xv.iter().zip(&wv) {
                    rule.points.push([*u, v * (1.0 - u), 0.0]);
                    rule.weights.push(a * b * (1.0 - u));
                }
            }
        }
        3 => {
            let (xu, wu) = gauss_legendre(points_for(degree + 2));
            let (xv, wv) = gauss_legendre(points_for(degree + 1));
            let (xw, ww) = gauss_legendre(points_for(degree));
            for (u, a) in xu.iter().zip(&wu) {
                for (v, b) in xv.iter().zip(&wv) {
                    for (w, c) in xw.iter().zip(&ww) {
                        rule.points
                            .push([*u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                        rule.weights
                            .push(a * b * c * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        _ => unreachable!("simplex dimension {k}"),
    }
    rule
}

/// Measure of a `k`-simplex embedded in 3D space (`k = vertices.len() - 1`).
pub fn simplex_measure(vertices: &[Point]) -> f64 {
    let e: Vec<Point> = vertices[1..].iter().map(|p| sub(p, &vertices[0])).collect();
    match e.len() {
        0 => 1.0,
        1 => norm(&e[0]),
        2 => 0.5 * norm(&cross(&e[0], &e[1])),
        3 => dot(&e[0], &cross(&e[1], &e[2])).abs() / 6.0,
        n => panic!("simplex with {n} edges"),
    }
}

/// Rule on a simplex given by its vertices, exact to total `degree`.
pub fn simplex_rule(vertices: &[Point], degree: usize) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let k = vertices.len() - 1;
    let reference = reference_simplex(k, degree);
    let scale = simplex_measure(vertices) * factorial(k);
    let mut rule = QuadratureRule {
        points: Vec::with_capacity(reference.len()),
        weights: Vec::with_capacity(reference.len()),
    };
    for (xi, w) in reference.points.iter().zip(&reference.weights) {
        let mut p = vertices[0];
        for (j, v) in vertices[1..].iter().enumerate() {
            for a in 0..3 {
                p[a] += xi[j] * (v[a] - vertices[0][a]);
            }
        }
        rule.points.push(p);
        rule.weights.push(w * scale);
    }
    Ok(rule)
}

fn factorial(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

/// A background facet that bounds the active region against an external
/// cell; it belongs to the unfitted boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GammaFacet {
    pub cell: usize,
    pub facet: usize,
    pub axis: usize,
    pub upper: bool,
}

/// Subdivision of all cut cells of a classified mesh.
#[derive(Debug, Clone)]
pub struct CutDecomposition {
    dim: usize,
    cuts: Vec<Option<CutCell>>,
    gamma_facets: Vec<Vec<GammaFacet>>,
}

impl CutDecomposition {
    pub fn build(mesh: &BackgroundMesh, classification: &Classification) -> Result<Self> {
        let mut cuts = vec![None; mesh.num_cells()];
        for cell in classification.cells_of_class(CellClass::Cut) {
            let values = classification.cell_vertex_values(mesh, cell);
            cuts[cell] = Some(decompose_cut_cell(mesh, cell, &values)?);
        }
        let mut gamma_facets = vec![Vec::new(); mesh.num_cells()];
        for cell in classification.active_cells() {
            for (i, (facet, neighbor)) in mesh
                .cell_neighbors_through_facets(cell)?
                .into_iter()
                .enumerate()
            {
                if let Neighbor::Cell(other) = neighbor {
                    if classification.cell_class(other) == CellClass::External
                        && clipped_facet_measure(mesh, classification, facet)? > 0.0
                    {
                        gamma_facets[cell].push(GammaFacet {
                            cell,
                            facet,
                            axis: i / 2,
                            upper: i % 2 == 1,
                        });
                    }
                }
            }
        }
        Ok(Self {
            dim: mesh.dim(),
            cuts,
            gamma_facets,
        })
    }

    pub fn cut_cell(&self, cell: usize) -> Option<&CutCell> {
        self.cuts[cell].as_ref()
    }

    pub fn cut_cells(&self) -> impl Iterator<Item = &CutCell> {
        self.cuts.iter().flatten()
    }

    pub fn gamma_facets(&self, cell: usize) -> &[GammaFacet] {
        &self.gamma_facets[cell]
    }

    /// `|K ∩ Ω_h|` for any cell.
    pub fn inside_volume(
        &self,
        mesh: &BackgroundMesh,
        classification: &Classification,
        cell: usize,
    ) -> f64 {
        match classification.cell_class(cell) {
            CellClass::Internal => mesh.cell_volume(),
            CellClass::External => 0.0,
            CellClass::Cut => self.cuts[cell].as_ref().map_or(0.0, |c| c.volume),
        }
    }

    /// Rule over `K ∩ Ω_h`.
    pub fn volume_rule(
        &self,
        mesh: &BackgroundMesh,
        classification: &Classification,
        cell: usize,
        degree: usize,
    ) -> Result<QuadratureRule> {
        check_degree(degree)?;
        mesh.check_cell(cell)?;
        match classification.cell_class(cell) {
            CellClass::Internal => {
                let (lo, hi) = mesh.cell_bounds(cell);
                box_rule(self.dim, &lo, &hi, degree)
            }
            CellClass::External => Ok(QuadratureRule::default()),
            CellClass::Cut => {
                let mut rule = QuadratureRule::default();
                if let Some(cut) = &self.cuts[cell] {
                    for s in &cut.simplices {
                        rule.extend(simplex_rule(s, degree)?);
                    }
                }
                Ok(rule)
            }
        }
    }

    /// Rule over `Γ_h ∩ K` with outward normals.
    pub fn boundary_rule(
        &self,
        mesh: &BackgroundMesh,
        classification: &Classification,
        cell: usize,
        degree: usize,
    ) -> Result<BoundaryRule> {
        check_degree(degree)?;
        mesh.check_cell(cell)?;
        let mut rule = BoundaryRule::default();
        if let Some(cut) = &self.cuts[cell] {
            for e in &cut.interface {
                rule.push_rule(simplex_rule(&e.vertices, degree)?, e.normal);
            }
        }
        for g in &self.gamma_facets[cell] {
            let mut n = [0.0; 3];
            n[g.axis] = if g.upper { 1.0 } else { -1.0 };
            rule.push_rule(facet_rule(mesh, classification, g.facet, degree)?, n);
        }
        Ok(rule)
    }
}

/// Clipped polygon (loop order) of a background facet: `F ∩ {psi_lin <= 0}`.
fn clipped_facet_polygon(
    mesh: &BackgroundMesh,
    classification: &Classification,
    facet: usize,
) -> Result<Vec<Point>> {
    let corners = mesh.facet_vertices(facet)?;
    let values: Vec<f64> = mesh
        .facet_vertex_ids(facet)?
        .into_iter()
        .map(|v| classification.vertex_value(v))
        .collect();
    Ok(if mesh.dim() == 2 {
        cut::clip_segment(&corners, &values)
    } else {
        cut::clip_polygon(&corners, &values)
    })
}

fn clipped_facet_measure(
    mesh: &BackgroundMesh,
    classification: &Classification,
    facet: usize,
) -> Result<f64> {
    let poly = clipped_facet_polygon(mesh, classification, facet)?;
    Ok(if mesh.dim() == 2 {
        if poly.len() == 2 {
            norm(&sub(&poly[1], &poly[0]))
        } else {
            0.0
        }
    } else {
        cut::fan(&poly).iter().map(|t| simplex_measure(t)).sum()
    })
}

/// Rule over the part of a background facet inside the domain.
pub fn facet_rule(
    mesh: &BackgroundMesh,
    classification: &Classification,
    facet: usize,
    degree: usize,
) -> Result<QuadratureRule> {
    check_degree(degree)?;
    let poly = clipped_facet_polygon(mesh, classification, facet)?;
    let mut rule = QuadratureRule::default();
    if mesh.dim() == 2 {
        if poly.len() == 2 && norm(&sub(&poly[1], &poly[0])) > 0.0 {
            rule.extend(simplex_rule(&poly, degree)?);
        }
    } else {
        for tri in cut::fan(&poly) {
            if simplex_measure(&tri) > 0.0 {
                rule.extend(simplex_rule(&tri, degree)?);
            }
        }
    }
    Ok(rule)
}

/// `|F ∩ Ω_h|` for a background facet.
pub fn facet_measure(
    mesh: &BackgroundMesh,
    classification: &Classification,
    facet: usize,
) -> Result<f64> {
    clipped_facet_measure(mesh, classification, facet)
}
