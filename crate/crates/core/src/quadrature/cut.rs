//! Subdivision of cut cells.
//!
//! Inside a cut cell the domain is approximated by the convex hull of the
//! non-positive corners and the points where edges change sign (linear
//! interpolation of the corner values). On every cell face this hull reduces
//! to the clipped face polygon, so neighboring cells see the same boundary.
//! In 2D the hull is obtained by walking the cell boundary; in 3D it is
//! computed directly from the at most 20 candidate points.

use log::debug;

use super::{cross, dot, norm, simplex_measure, sub};
use crate::mesh::BackgroundMesh;
use crate::{Error, Point, Result};

/// Piece of the reconstructed boundary inside one cell.
#[derive(Debug, Clone)]
pub struct InterfaceElement {
    /// Segment (2D) or triangle (3D) vertices.
    pub vertices: Vec<Point>,
    /// Outward unit normal (pointing away from the domain).
    pub normal: Point,
    pub measure: f64,
}

/// The part of one cell facet bounding the inside region.
#[derive(Debug, Clone)]
pub struct FacetPiece {
    pub axis: usize,
    pub upper: bool,
    pub simplices: Vec<Vec<Point>>,
}

#[derive(Debug, Clone)]
pub struct CutCell {
    pub cell: usize,
    /// Triangles (2D) or tetrahedra (3D) covering `K ∩ Ω_h`.
    pub simplices: Vec<Vec<Point>>,
    pub interface: Vec<InterfaceElement>,
    pub facet_pieces: Vec<FacetPiece>,
    pub volume: f64,
}

fn is_inside(v: f64) -> bool {
    v <= 0.0
}

fn crossing(a: &Point, b: &Point, va: f64, vb: f64) -> Option<Point> {
    if (va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0) {
        let t = va / (va - vb);
        Some([
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ])
    } else {
        None
    }
}

/// Inside part of a segment; empty when it has no length.
pub fn clip_segment(corners: &[Point], values: &[f64]) -> Vec<Point> {
    let (a, b) = (corners[0], corners[1]);
    let (va, vb) = (values[0], values[1]);
    match (is_inside(va), is_inside(vb)) {
        (true, true) => vec![a, b],
        (false, false) => vec![],
        _ => match crossing(&a, &b, va, vb) {
            Some(p) if is_inside(va) => vec![a, p],
            Some(p) => vec![p, b],
            None => vec![],
        },
    }
}

/// Inside part of a convex planar polygon given as a loop of corners.
pub fn clip_polygon(corners: &[Point], values: &[f64]) -> Vec<Point> {
    let n = corners.len();
    let scale = (0..n)
        .map(|i| norm(&sub(&corners[(i + 1) % n], &corners[i])))
        .fold(0.0, f64::max);
    let tol = 1e-14 * scale;
    let mut out: Vec<Point> = Vec::with_capacity(2 * n);
    let push = |p: Point, out: &mut Vec<Point>| {
        if out.last().is_none_or(|q| norm(&sub(&p, q)) > tol) {
            out.push(p);
        }
    };
    for i in 0..n {
        let j = (i + 1) % n;
        if is_inside(values[i]) {
            push(corners[i], &mut out);
        }
        if let Some(p) = crossing(&corners[i], &corners[j], values[i], values[j]) {
            push(p, &mut out);
        }
    }
    while out.len() > 1 && norm(&sub(&out[0], out.last().unwrap())) <= tol {
        out.pop();
    }
    if out.len() < 3 {
        out.clear();
    }
    out
}

/// Fan triangulation of a convex polygon from its first vertex.
pub fn fan(poly: &[Point]) -> Vec<Vec<Point>> {
    if poly.len() < 3 {
        return Vec::new();
    }
    (1..poly.len() - 1)
        .map(|k| vec![poly[0], poly[k], poly[k + 1]])
        .collect()
}

/// Subdivides a cut cell given its corner level-set values (x-fastest).
pub fn decompose_cut_cell(mesh: &BackgroundMesh, cell: usize, values: &[f64]) -> Result<CutCell> {
    mesh.check_cell(cell)?;
    if values.iter().all(|&v| v <= 0.0) || values.iter().all(|&v| v >= 0.0) {
        return Err(Error::DegenerateCut {
            cell,
            reason: "corner values do not change sign".into(),
        });
    }
    if mesh.dim() == 2 {
        decompose_2d(mesh, cell, values)
    } else {
        decompose_3d(mesh, cell, values)
    }
}

/// Side of the cell boundary containing the whole segment/polygon, if any.
fn boundary_side(
    points: &[Point],
    lo: &Point,
    hi: &Point,
    dim: usize,
    tol: f64,
) -> Option<(usize, bool)> {
    for a in 0..dim {
        if points.iter().all(|p| (p[a] - lo[a]).abs() <= tol) {
            return Some((a, false));
        }
        if points.iter().all(|p| (p[a] - hi[a]).abs() <= tol) {
            return Some((a, true));
        }
    }
    None
}

fn add_facet_piece(pieces: &mut Vec<FacetPiece>, axis: usize, upper: bool, simplex: Vec<Point>) {
    match pieces
        .iter_mut()
        .find(|p| p.axis == axis && p.upper == upper)
    {
        Some(p) => p.simplices.push(simplex),
        None => pieces.push(FacetPiece {
            axis,
            upper,
            simplices: vec![simplex],
        }),
    }
}

fn decompose_2d(mesh: &BackgroundMesh, cell: usize, values: &[f64]) -> Result<CutCell> {
    let corners = mesh.cell_vertices(cell);
    let order = [0, 1, 3, 2];
    let loop_pts: Vec<Point> = order.iter().map(|&i| corners[i]).collect();
    let loop_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let poly = clip_polygon(&loop_pts, &loop_vals);
    if poly.len() < 3 {
        return Err(Error::DegenerateCut {
            cell,
            reason: "inside polygon has fewer than 3 distinct points".into(),
        });
    }
    let (lo, hi) = mesh.cell_bounds(cell);
    let h = mesh.cell_size();
    let tol = 1e-12 * h;
    let min_volume = 1e-15 * mesh.cell_volume();

    let n = poly.len() as f64;
    let mut c = [0.0; 3];
    for p in &poly {
        for a in 0..2 {
            c[a] += p[a] / n;
        }
    }
    let mut simplices = Vec::new();
    let mut interface = Vec::new();
    let mut facet_pieces = Vec::new();
    let mut volume = 0.0;
    for k in 0..poly.len() {
        let (p, q) = (poly[k], poly[(k + 1) % poly.len()]);
        let tri = vec![c, p, q];
        let area = simplex_measure(&tri);
        if area > min_volume {
            volume += area;
            simplices.push(tri);
        }
        match boundary_side(&[p, q], &lo, &hi, 2, tol) {
            Some((axis, upper)) => add_facet_piece(&mut facet_pieces, axis, upper, vec![p, q]),
            None => {
                let d = sub(&q, &p);
                let len = norm(&d);
                if len < 1e-12 * h {
                    debug!("dropping degenerate interface segment in cell {cell} (length {len:e})");
                    continue;
                }
                interface.push(InterfaceElement {
                    vertices: vec![p, q],
                    normal: [d[1] / len, -d[0] / len, 0.0],
                    measure: len,
                });
            }
        }
    }
    Ok(CutCell {
        cell,
        simplices,
        interface,
        facet_pieces,
        volume,
    })
}

struct HullFace {
    normal: Point,
    vertices: Vec<usize>,
}

/// Faces of the convex hull of a small point set, each with its vertices
/// ordered counter-clockwise around the outward normal.
fn convex_hull_faces(q: &[Point]) -> Vec<HullFace> {
    const PLANE_TOL: f64 = 1e-10;
    const MIN_CROSS: f64 = 1e-8;
    let n = q.len();
    let supporting = |i: usize, j: usize, k: usize| -> Option<(Point, f64)> {
        let nrm = cross(&sub(&q[j], &q[i]), &sub(&q[k], &q[i]));
        let len = norm(&nrm);
        if len < MIN_CROSS {
            return None;
        }
        let unit = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
        let off = dot(&unit, &q[i]);
        let (mut max_s, mut min_s) = (f64::NEG_INFINITY, f64::INFINITY);
        for p in q {
            let s = dot(&unit, p) - off;
            max_s = max_s.max(s);
            min_s = min_s.min(s);
        }
        if max_s <= PLANE_TOL {
            Some((unit, off))
        } else if min_s >= -PLANE_TOL {
            Some(([-unit[0], -unit[1], -unit[2]], -off))
        } else {
            None
        }
    };
    let on_plane = |normal: &Point, off: f64| -> Vec<usize> {
        (0..n)
            .filter(|&l| (dot(normal, &q[l]) - off).abs() <= PLANE_TOL)
            .collect()
    };

    let mut faces: Vec<HullFace> = Vec::new();
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some((normal, off)) = supporting(i, j, k) else {
                    continue;
                };
                let verts = on_plane(&normal, off);
                // refit the plane on its best-conditioned triple
                let mut best = (0.0, (i, j, k));
                for a in 0..verts.len() {
                    for b in a + 1..verts.len() {
                        for c in b + 1..verts.len() {
                            let (va, vb, vc) = (verts[a], verts[b], verts[c]);
                            let area = norm(&cross(&sub(&q[vb], &q[va]), &sub(&q[vc], &q[va])));
                            if area > best.0 {
                                best = (area, (va, vb, vc));
                            }
                        }
                    }
                }
                let (a, b, c) = best.1;
                let Some((normal, off)) = supporting(a, b, c) else {
                    continue;
                };
                let verts = on_plane(&normal, off);
                if verts.len() < 3 || seen.contains(&verts) {
                    continue;
                }
                seen.push(verts.clone());
                let m = verts.len() as f64;
                let mut center = [0.0; 3];
                for &v in &verts {
                    for d in 0..3 {
                        center[d] += q[v][d] / m;
                    }
                }
                let e1 = {
                    let d = sub(&q[verts[0]], &center);
                    let l = norm(&d);
                    [d[0] / l, d[1] / l, d[2] / l]
                };
                let e2 = cross(&normal, &e1);
                let mut ordered: Vec<(f64, usize)> = verts
                    .iter()
                    .map(|&v| {
                        let d = sub(&q[v], &center);
                        (dot(&d, &e2).atan2(dot(&d, &e1)), v)
                    })
                    .collect();
                ordered.sort_by(|x, y| x.0.total_cmp(&y.0));
                faces.push(HullFace {
                    normal,
                    vertices: ordered.into_iter().map(|(_, v)| v).collect(),
                });
            }
        }
    }
    faces
}

fn decompose_3d(mesh: &BackgroundMesh, cell: usize, values: &[f64]) -> Result<CutCell> {
    let corners = mesh.cell_vertices(cell);
    let (lo, hi) = mesh.cell_bounds(cell);
    let h = mesh.h();
    let mut points: Vec<Point> = Vec::with_capacity(20);
    for (i, c) in corners.iter().enumerate() {
        if is_inside(values[i]) {
            points.push(*c);
        }
    }
    for i in 0..8usize {
        for a in 0..3 {
            if i >> a & 1 == 0 {
                let j = i | 1 << a;
                if let Some(p) = crossing(&corners[i], &corners[j], values[i], values[j]) {
                    points.push(p);
                }
            }
        }
    }
    // reference coordinates in the unit cube
    let mut q: Vec<Point> = Vec::with_capacity(points.len());
    let mut phys: Vec<Point> = Vec::with_capacity(points.len());
    for p in &points {
        let r = [
            (p[0] - lo[0]) / h[0],
            (p[1] - lo[1]) / h[1],
            (p[2] - lo[2]) / h[2],
        ];
        if q.iter().all(|s| norm(&sub(s, &r)) > 1e-14) {
            q.push(r);
            phys.push(*p);
        }
    }
    if q.len() < 4 {
        return Err(Error::DegenerateCut {
            cell,
            reason: format!("only {} distinct hull points", q.len()),
        });
    }
    let faces = convex_hull_faces(&q);
    if faces.len() < 4 {
        return Err(Error::DegenerateCut {
            cell,
            reason: "inside region has no volume".into(),
        });
    }

    let m = phys.len() as f64;
    let mut center = [0.0; 3];
    for p in &phys {
        for d in 0..3 {
            center[d] += p[d] / m;
        }
    }
    let hmax = mesh.cell_size();
    let tol = 1e-12 * hmax;
    let min_volume = 1e-15 * mesh.cell_volume();
    let mut simplices = Vec::new();
    let mut interface = Vec::new();
    let mut facet_pieces = Vec::new();
    let mut volume = 0.0;
    for face in &faces {
        let poly: Vec<Point> = face.vertices.iter().map(|&v| phys[v]).collect();
        let mut normal = [
            face.normal[0] / h[0],
            face.normal[1] / h[1],
            face.normal[2] / h[2],
        ];
        let len = norm(&normal);
        normal = [normal[0] / len, normal[1] / len, normal[2] / len];
        let side = boundary_side(&poly, &lo, &hi, 3, tol);
        for tri in fan(&poly) {
            let tet = vec![center, tri[0], tri[1], tri[2]];
            let vol = simplex_measure(&tet);
            if vol > min_volume {
                volume += vol;
                simplices.push(tet);
            }
            match side {
                Some((axis, upper)) => add_facet_piece(&mut facet_pieces, axis, upper, tri),
                None => {
                    let area = simplex_measure(&tri);
                    if area < 1e-12 * hmax * hmax {
                        debug!(
                            "dropping degenerate interface triangle in cell {cell} (area {area:e})"
                        );
                        continue;
                    }
                    interface.push(InterfaceElement {
                        vertices: tri,
                        normal,
                        measure: area,
                    });
                }
            }
        }
    }
    Ok(CutCell {
        cell,
        simplices,
        interface,
        facet_pieces,
        volume,
    })
}
