//! Dense-matrix reference implementations shared by the integration tests.
//! Nothing here calls into the crate's simulator.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(+1, -1)` eigenvalue of `Z_q` on basis state `i`; qubit `q` is bit `q`.
pub fn z_sign(i: usize, q: usize) -> f64 {
    if (i >> q) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Dense `exp(-i H / 2)` for a real symmetric `H`.
pub fn expm_half(h: &DMatrix<f64>) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let dim = h.nrows();
    let v = eig.eigenvectors.map(c);
    let mut scaled = v.clone();
    for (k, &e) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -0.5 * e);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    debug_assert_eq!(scaled.nrows(), dim);
    scaled * v.adjoint()
}

/// Dense `exp(-i H / 2)` for a diagonal `H`.
pub fn expm_half_diagonal(h: &DMatrix<f64>) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        h.nrows(),
        h.diagonal().iter().map(|&e| Complex64::from_polar(1.0, -0.5 * e)),
    ))
}

/// `H_X = sum_i b_i X_i` as a dense real matrix.
pub fn h_x(bx: &[f64]) -> DMatrix<f64> {
    let dim = 1 << bx.len();
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for (q, &b) in bx.iter().enumerate() {
            h[(i ^ (1 << q), i)] += b;
        }
    }
    h
}

/// `H_Z = J sum_edges Z_i Z_j + B_Z sum_i Z_i` as a dense real matrix.
pub fn h_z(n: usize, edges: &[(usize, usize)], j: f64, bz: f64) -> DMatrix<f64> {
    let dim = 1 << n;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let zz: f64 = edges.iter().map(|&(a, b)| z_sign(i, a) * z_sign(i, b)).sum();
        let z: f64 = (0..n).map(|q| z_sign(i, q)).sum();
        h[(i, i)] = j * zz + bz * z;
    }
    h
}

/// Floquet operator `exp(-i H_Z / 2) exp(-i H_X / 2)`.
pub fn floquet(n: usize, edges: &[(usize, usize)], j: f64, bz: f64, bx: &[f64]) -> CMat {
    assert_eq!(bx.len(), n);
    expm_half_diagonal(&h_z(n, edges, j, bz)) * expm_half(&h_x(bx))
}

pub fn pauli_x(n: usize, q: usize) -> CMat {
    let dim = 1 << n;
    CMat::from_fn(dim, dim, |r, col| if r == col ^ (1 << q) { c(1.0) } else { c(0.0) })
}

pub fn zero_state(n: usize) -> CVec {
    let mut v = CVec::zeros(1 << n);
    v[0] = c(1.0);
    v
}

pub fn expect_z(psi: &CVec, m: usize) -> f64 {
    psi.iter().enumerate().map(|(i, a)| z_sign(i, m) * a.norm_sqr()).sum()
}

/// `<Z_m>` for every `m` in `U^dag^n X_b U^n |0>`, or with the identity in
/// place of `X_b` when `butterfly` is `None`.
pub fn otoc_all(u: &CMat, n_qubits: usize, steps: usize, butterfly: Option<usize>) -> Vec<f64> {
    let mut psi = zero_state(n_qubits);
    for _ in 0..steps {
        psi = u * psi;
    }
    if let Some(b) = butterfly {
        psi = CVec::from_fn(psi.len(), |i, _| psi[i ^ (1 << b)]);
    }
    let ud = u.adjoint();
    for _ in 0..steps {
        psi = &ud * psi;
    }
    (0..n_qubits).map(|m| expect_z(&psi, m)).collect()
}

/// Distance between two unitaries up to a global phase: `1 - |tr(A^dag B)| / d`.
pub fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    1.0 - (a.adjoint() * b).trace().norm() / a.nrows() as f64
}
