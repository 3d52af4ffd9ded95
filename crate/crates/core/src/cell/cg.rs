//! Jacobi-preconditioned conjugate gradients for graph Laplacians given as
//! edge lists.

use crate::error::{Error, Result};

/// Symmetric positive semidefinite operator `x ↦ Dᵀ D x`, where each edge
/// `(p, q)` contributes the difference `x_q − x_p`.
pub struct EdgeLaplacian {
    pub n: usize,
    pub edges: Vec<(u32, u32)>,
    diag: Vec<f64>,
}

impl EdgeLaplacian {
    pub fn new(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut diag = vec![0.0; n];
        for &(p, q) in &edges {
            diag[p as usize] += 1.0;
            diag[q as usize] += 1.0;
        }
        Self { n, edges, diag }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(p, q) in &self.edges {
            let d = x[q as usize] - x[p as usize];
            out[q as usize] += d;
            out[p as usize] -= d;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solve `K x = b` for a connected edge Laplacian `K` and `b` with zero sum.
/// The returned solution has zero mean. Stops at `‖r‖ ≤ rel_tol ‖b‖`.
pub fn solve(k: &EdgeLaplacian, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = k.n;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    remove_mean(&mut r);
    let bnorm = dot(&r, &r).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let inv: Vec<f64> = k.diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut kp = vec![0.0; n];
    for it in 1..=max_iter {
        k.apply(&p, &mut kp);
        let alpha = rz / dot(&p, &kp);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * kp[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            remove_mean(&mut x);
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence(format!("conjugate gradients did not reach {rel_tol:e} in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph() {
        // 0 - 1 - 2 with b = (-1, 0, 1): x = (-1, 0, 1)
        let k = EdgeLaplacian::new(3, vec![(0, 1), (1, 2)]);
        let (x, _) = solve(&k, &[-1.0, 0.0, 1.0], 1e-14, 100).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12 && x[1].abs() < 1e-12 && (x[2] - 1.0).abs() < 1e-12);
    }
}
