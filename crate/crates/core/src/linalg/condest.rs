//! Hager–Higham estimate of `||A^{-1}||_1` (block size 1).

use super::{Factorization, SparseMatrix};
use crate::Result;

const MAX_SWEEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub kappa1_estimate: f64,
    pub norm1: f64,
    pub inv_norm1_estimate: f64,
    pub n: usize,
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn sign(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| if x >= 0.0 { 1.0 } else { -1.0 })
        .collect()
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// Lower bound of `||A^{-1}||_1`; every candidate is `||A^{-1} x||_1 / ||x||_1`.
fn inverse_norm1(f: &Factorization) -> Result<f64> {
    let n = f.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let x = vec![1.0 / n as f64; n];
    let y = f.solve(&x)?;
    let mut est = norm1(&y);
    if n == 1 {
        return Ok(est);
    }
    let mut xi = sign(&y);
    let z = f.solve_transpose(&xi)?;
    let mut j = argmax_abs(&z);
    for _ in 1..MAX_SWEEPS {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let y = f.solve(&e)?;
        let previous = est;
        est = norm1(&y);
        let xi_new = sign(&y);
        if xi_new == xi || est <= previous {
            est = est.max(previous);
            break;
        }
        xi = xi_new;
        let z = f.solve_transpose(&xi)?;
        let last = j;
        j = argmax_abs(&z);
        if z[last].abs() == z[j].abs() {
            break;
        }
    }
    let alt: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n - 1) as f64)
        })
        .collect();
    let y = f.solve(&alt)?;
    Ok(est.max(norm1(&y) / norm1(&alt)))
}

/// Condition number estimate in the 1-norm.
pub fn estimate_condition_1norm(
    matrix: &SparseMatrix,
    factorization: &Factorization,
) -> Result<ConditionReport> {
    let norm1 = matrix.norm1();
    let inv = inverse_norm1(factorization)?;
    Ok(ConditionReport {
        kappa1_estimate: norm1 * inv,
        norm1,
        inv_norm1_estimate: inv,
        n: matrix.nrows(),
    })
}
