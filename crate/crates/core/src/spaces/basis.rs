//! Nodal Q2 and serendipity bases on the reference cell `[0,1]^d`.
//!
//! Nodes are identified by their offset in the cell's doubled lattice
//! (`0`, `1` or `2` per axis). Evaluation works at any point, not only
//! inside the cell, since extrapolation is how constraints are built.

use nalgebra::DMatrix;

use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Lagrange,
    Serendipity,
}

/// Values, reference gradients and the reference second derivatives
/// `d²/dt_a²` of all shape functions at one point.
#[derive(Debug, Clone, Default)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 3]>,
    pub second: Vec<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct ScalarBasis {
    family: Family,
    dim: usize,
    nodes: Vec<[usize; 3]>,
    /// Monomial exponents and the coefficient matrix (monomial x node)
    /// for the serendipity family.
    monomials: Vec<[u32; 3]>,
    coeffs: Option<DMatrix<f64>>,
}

fn lagrange_1d(t: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
    (
        [
            2.0 * (t - 0.5) * (t - 1.0),
            -4.0 * t * (t - 1.0),
            2.0 * t * (t - 0.5),
        ],
        [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0],
        [4.0, -8.0, 4.0],
    )
}

fn offsets(dim: usize, keep: impl Fn(&[usize; 3]) -> bool) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for local in 0..3usize.pow(dim as u32) {
        let mut o = [0; 3];
        let mut rest = local;
        for a in o.iter_mut().take(dim) {
            *a = rest % 3;
            rest /= 3;
        }
        if keep(&o) {
            out.push(o);
        }
    }
    out
}

fn mono_eval(e: &[u32; 3], t: &Point, dim: usize) -> (f64, [f64; 3], [f64; 3]) {
    let pw = |x: f64, k: i32| if k < 0 { 0.0 } else { x.powi(k) };
    let mut v = 1.0;
    let mut g = [0.0; 3];
    let mut s = [0.0; 3];
    for a in 0..dim {
        v *= pw(t[a], e[a] as i32);
    }
    for a in 0..dim {
        let mut ga = e[a] as f64 * pw(t[a], e[a] as i32 - 1);
        let mut sa = (e[a] * e[a].saturating_sub(1)) as f64 * pw(t[a], e[a] as i32 - 2);
        for b in 0..dim {
            if b != a {
                let f = pw(t[b], e[b] as i32);
                ga *= f;
                sa *= f;
            }
        }
        g[a] = ga;
        s[a] = sa;
    }
    (v, g, s)
}

impl ScalarBasis {
    /// Tensor-product Q2 basis, nodes ordered x-fastest.
    pub fn lagrange(dim: usize) -> Self {
        Self {
            family: Family::Lagrange,
            dim,
            nodes: offsets(dim, |_| true),
            monomials: Vec::new(),
            coeffs: None,
        }
    }

    /// Serendipity basis of superlinear degree 2: corner and edge-midpoint
    /// nodes, monomials with at most one squared variable.
    pub fn serendipity(dim: usize) -> Result<Self> {
        let nodes = offsets(dim, |o| o.iter().filter(|&&k| k == 1).count() <= 1);
        let monomials: Vec<[u32; 3]> = offsets(dim, |o| o.iter().filter(|&&k| k == 2).count() <= 1)
            .into_iter()
            .map(|o| [o[0] as u32, o[1] as u32, o[2] as u32])
            .collect();
        let n = nodes.len();
        let vander = DMatrix::from_fn(n, n, |i, j| {
            let t = node_point(&nodes[i]);
            mono_eval(&monomials[j], &t, dim).0
        });
        let coeffs = vander
            .try_inverse()
            .ok_or_else(|| Error::Internal("serendipity nodes are not unisolvent".into()))?;
        Ok(Self {
            family: Family::Serendipity,
            dim,
            nodes,
            monomials,
            coeffs: Some(coeffs),
        })
    }

    pub fn new(family: Family, dim: usize) -> Result<Self> {
        match family {
            Family::Lagrange => Ok(Self::lagrange(dim)),
            Family::Serendipity => Self::serendipity(dim),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Doubled-lattice offsets of the nodes within the cell.
    pub fn node_offsets(&self) -> &[[usize; 3]] {
        &self.nodes
    }

    /// Position of a node with the given offset among the Q2 nodes.
    pub fn lagrange_index(offset: &[usize; 3], dim: usize) -> usize {
        (0..dim).rev().fold(0, |acc, a| acc * 3 + offset[a])
    }

    pub fn values(&self, t: &Point) -> Vec<f64> {
        self.eval(t).values
    }

    pub fn eval(&self, t: &Point) -> ShapeValues {
        let dim = self.dim;
        match &self.coeffs {
            None => {
                let f: Vec<_> = (0..dim).map(|a| lagrange_1d(t[a])).collect();
                let mut out = ShapeValues::default();
                for o in &self.nodes {
                    let mut v = 1.0;
                    for a in 0..dim {
                        v *= f[a].0[o[a]];
                    }
                    let mut g = [0.0; 3];
                    let mut s = [0.0; 3];
                    for a in 0..dim {
                        let mut ga = f[a].1[o[a]];
                        let mut sa = f[a].2[o[a]];
                        for b in 0..dim {
                            if b != a {
                                ga *= f[b].0[o[b]];
                                sa *= f[b].0[o[b]];
                            }
                        }
                        g[a] = ga;
                        s[a] = sa;
                    }
                    out.values.push(v);
                    out.gradients.push(g);
                    out.second.push(s);
                }
                out
            }
            Some(c) => {
                let n = self.nodes.len();
                let mut out = ShapeValues {
                    values: vec![0.0; n],
                    gradients: vec![[0.0; 3]; n],
                    second: vec![[0.0; 3]; n],
                };
                for (j, e) in self.monomials.iter().enumerate() {
                    let (v, g, s) = mono_eval(e, t, dim);
                    for b in 0..n {
                        let w = c[(j, b)];
                        out.values[b] += w * v;
                        for a in 0..dim {
                            out.gradients[b][a] += w * g[a];
                            out.second[b][a] += w * s[a];
                        }
                    }
                }
                out
            }
        }
    }
}

/// Reference coordinates of a node offset.
pub fn node_point(offset: &[usize; 3]) -> Point {
    [
        0.5 * offset[0] as f64,
        0.5 * offset[1] as f64,
        0.5 * offset[2] as f64,
    ]
}
