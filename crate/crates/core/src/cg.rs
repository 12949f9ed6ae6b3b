//! Jacobi-preconditioned conjugate gradients for symmetric positive
//! definite systems given as a matrix-free operator.

use alloc::vec;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final `||b - A x|| / ||b||` (absolute if `b = 0`).
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// Stops when `||b - A x|| <= tol * ||b||` or after `max_iter` iterations.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgReport {
    let n = b.len();
    let b_norm = math::sqrt(math::dot(b, b));
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let mut res = math::sqrt(math::dot(&r, &r));
    if res <= tol * scale {
        return CgReport { iterations: 0, relative_residual: res / scale, converged: true };
    }
    let mut z: alloc::vec::Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = math::dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = math::dot(&p, &ap);
        if !(pap > 0.0) {
            return CgReport { iterations: it, relative_residual: res / scale, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = math::sqrt(math::dot(&r, &r));
        if res <= tol * scale {
            return CgReport { iterations: it, relative_residual: res / scale, converged: true };
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = math::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgReport { iterations: max_iter, relative_residual: res / scale, converged: false }
}
