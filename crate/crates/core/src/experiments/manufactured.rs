//! Closed-form Stokes solutions used to drive and check the solver.

use crate::assembly::{BoxFace, ProblemData};
use crate::Point;

/// Exact velocity/pressure pair with derivatives.
pub trait ExactSolution: ProblemData {
    fn velocity(&self, x: &Point) -> Point;
    /// `grad[i][j] = du_i/dx_j`.
    fn velocity_gradient(&self, x: &Point) -> [[f64; 3]; 3];
    fn pressure(&self, x: &Point) -> f64;
}

fn traction_from(grad: &[[f64; 3]; 3], p: f64, n: &Point) -> Point {
    let mut t = [0.0; 3];
    for i in 0..3 {
        t[i] = (0..3).map(|j| grad[i][j] * n[j]).sum::<f64>() - p * n[i];
    }
    t
}

/// Unit-speed swirl around an axis outside the box with `p = x^3 y^3`.
#[derive(Debug, Clone, Copy)]
pub struct Swirl {
    pub dim: usize,
}

impl Swirl {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// Unnormalized field `u*` and its (constant) Jacobian.
    fn raw(&self, x: &Point) -> (Point, [[f64; 3]; 3]) {
        if self.dim == 2 {
            (
                [0.5 - x[1], x[0] + 0.3, 0.0],
                [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]],
            )
        } else {
            (
                [x[1] - 0.5, -x[0] - x[2] - 0.3, x[1] - 0.5],
                [[0.0, 1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
            )
        }
    }

    fn pressure_gradient(&self, x: &Point) -> Point {
        let (a, b) = (x[0], x[1]);
        [3.0 * a * a * b * b * b, 3.0 * a * a * a * b * b, 0.0]
    }
}

impl ExactSolution for Swirl {
    fn velocity(&self, x: &Point) -> Point {
        let (u, _) = self.raw(x);
        let s = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        [u[0] / s, u[1] / s, u[2] / s]
    }

    fn velocity_gradient(&self, x: &Point) -> [[f64; 3]; 3] {
        let (u, jac) = self.raw(x);
        let s2: f64 = u.iter().map(|v| v * v).sum();
        let s = s2.sqrt();
        let mut g = [[0.0; 3]; 3];
        for j in 0..3 {
            let uj: f64 = (0..3).map(|k| u[k] * jac[k][j]).sum();
            for i in 0..3 {
                g[i][j] = jac[i][j] / s - u[i] * uj / (s2 * s);
            }
        }
        g
    }

    fn pressure(&self, x: &Point) -> f64 {
        (x[0] * x[1]).powi(3)
    }
}

impl ProblemData for Swirl {
    fn body_force(&self, x: &Point) -> Point {
        // -Δ(u*/|u*|) = k u / |u*|^2 with k = 1 in 2D and 2 in 3D
        let (u, _) = self.raw(x);
        let s2: f64 = u.iter().map(|v| v * v).sum();
        let k = if self.dim == 2 { 1.0 } else { 2.0 };
        let v = self.velocity(x);
        let gp = self.pressure_gradient(x);
        [
            k * v[0] / s2 + gp[0],
            k * v[1] / s2 + gp[1],
            k * v[2] / s2 + gp[2],
        ]
    }

    fn dirichlet(&self, x: &Point) -> Point {
        self.velocity(x)
    }

    fn traction(&self, x: &Point, normal: &Point) -> Point {
        traction_from(&self.velocity_gradient(x), self.pressure(x), normal)
    }
}

/// `u = (y, x, 0)`, `p = 2x - 1`: lies in every discrete space.
#[derive(Debug, Clone, Copy)]
pub struct Patch {
    pub dim: usize,
    /// Constant added to the pressure.
    pub shift: f64,
    pub dirichlet_box: bool,
}

impl Patch {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            shift: 0.0,
            dirichlet_box: false,
        }
    }
}

impl ExactSolution for Patch {
    fn velocity(&self, x: &Point) -> Point {
        [x[1], x[0], 0.0]
    }

    fn velocity_gradient(&self, _x: &Point) -> [[f64; 3]; 3] {
        [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]]
    }

    fn pressure(&self, x: &Point) -> f64 {
        2.0 * x[0] - 1.0 + self.shift
    }
}

impl ProblemData for Patch {
    fn body_force(&self, _x: &Point) -> Point {
        [2.0, 0.0, 0.0]
    }

    fn dirichlet(&self, x: &Point) -> Point {
        self.velocity(x)
    }

    fn traction(&self, x: &Point, normal: &Point) -> Point {
        traction_from(&self.velocity_gradient(x), self.pressure(x), normal)
    }

    fn box_face(&self, _axis: usize, _upper: bool) -> BoxFace {
        if self.dirichlet_box {
            BoxFace::Dirichlet
        } else {
            BoxFace::Neumann
        }
    }
}

/// Plane Poiseuille flow `u = (c y (H - y), 0)`, `p = -2c (x - 1)`, with a
/// prescribed inlet at `x = 0`, wall at `y = 0` and traction-free outlet.
#[derive(Debug, Clone, Copy)]
pub struct Channel {
    pub height: f64,
    pub c: f64,
}

impl ExactSolution for Channel {
    fn velocity(&self, x: &Point) -> Point {
        [self.c * x[1] * (self.height - x[1]), 0.0, 0.0]
    }

    fn velocity_gradient(&self, x: &Point) -> [[f64; 3]; 3] {
        [
            [0.0, self.c * (self.height - 2.0 * x[1]), 0.0],
            [0.0; 3],
            [0.0; 3],
        ]
    }

    fn pressure(&self, x: &Point) -> f64 {
        -2.0 * self.c * (x[0] - 1.0)
    }
}

impl ProblemData for Channel {
    fn body_force(&self, _x: &Point) -> Point {
        [0.0; 3]
    }

    fn dirichlet(&self, x: &Point) -> Point {
        self.velocity(x)
    }

    fn traction(&self, x: &Point, normal: &Point) -> Point {
        traction_from(&self.velocity_gradient(x), self.pressure(x), normal)
    }

    fn box_face(&self, axis: usize, upper: bool) -> BoxFace {
        if axis == 0 && upper {
            BoxFace::Neumann
        } else {
            BoxFace::Dirichlet
        }
    }
}

/// Lid-driven cavity: unit tangential velocity on the top face, no slip
/// elsewhere, no body force.
#[derive(Debug, Clone, Copy)]
pub struct LidDriven {
    pub speed: f64,
    pub top: f64,
}

impl ProblemData for LidDriven {
    fn body_force(&self, _x: &Point) -> Point {
        [0.0; 3]
    }

    fn dirichlet(&self, x: &Point) -> Point {
        if (x[1] - self.top).abs() < 1e-12 {
            [self.speed, 0.0, 0.0]
        } else {
            [0.0; 3]
        }
    }

    fn traction(&self, _x: &Point, _normal: &Point) -> Point {
        [0.0; 3]
    }

    fn box_face(&self, _axis: usize, _upper: bool) -> BoxFace {
        BoxFace::Dirichlet
    }
}
