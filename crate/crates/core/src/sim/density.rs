//! Small-system density-matrix evolution with exact noise channels.
//!
//! Used as a reference for the trajectory sampler; memory grows as `4^N`, so
//! it is limited to [`MAX_DENSITY_QUBITS`].

use num_complex::Complex64;

use super::noisy::{NoiseMode, NoiseModel};
use crate::circuit::{BlockKind, Circuit, Gate};
use crate::error::{Error, Result};

pub const MAX_DENSITY_QUBITS: usize = 8;

const PAULIS: [[Complex64; 4]; 4] = {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mi = Complex64::new(0.0, -1.0);
    [[l, o, o, l], [o, l, l, o], [o, mi, i, o], [l, o, o, Complex64::new(-1.0, 0.0)]]
};

/// `rho[r * dim + c]`; as a `2N`-qubit vector the column index occupies the
/// low `N` bits and the row index the high `N` bits.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    n_qubits: usize,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_DENSITY_QUBITS {
            return Err(Error::MemoryCap {
                num_qubits: n_qubits,
                cap: MAX_DENSITY_QUBITS,
            });
        }
        let mut rho = vec![Complex64::new(0.0, 0.0); 1 << (2 * n_qubits)];
        rho[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, rho })
    }

    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.rho[i * self.dim() + i]).sum()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.rho[row * self.dim() + col]
    }

    /// `rho -> M rho M^dag` for a 1- or 2-qubit matrix `m` on `qubits`.
    pub fn conjugate(&mut self, qubits: &[usize], m: &[Complex64]) {
        let n = self.n_qubits;
        let row_bits: Vec<usize> = qubits.iter().map(|q| q + n).collect();
        apply_matrix(&mut self.rho, &row_bits, m, false);
        apply_matrix(&mut self.rho, qubits, m, true);
    }

    pub fn apply_gate(&mut self, gate: &Gate) {
        if matches!(gate, Gate::Idle { .. }) {
            return;
        }
        self.conjugate(&gate.qubits(), &gate.matrix());
    }

    /// Exact two-qubit depolarizing channel: with probability `p` one of the
    /// 15 non-identity Paulis, uniformly.
    pub fn depolarize_pair(&mut self, a: usize, b: usize, p: f64) {
        let original = self.rho.clone();
        let mut acc: Vec<Complex64> = original.iter().map(|v| v * (1.0 - p)).collect();
        for k in 1..16 {
            let mut term = DensityMatrix {
                n_qubits: self.n_qubits,
                rho: original.clone(),
            };
            term.conjugate(&[a, b], &kron(&PAULIS[k & 3], &PAULIS[k >> 2]));
            for (dst, src) in acc.iter_mut().zip(&term.rho) {
                *dst += src * (p / 15.0);
            }
        }
        self.rho = acc;
    }

    /// `rho -> (1 - q) rho + q I / 2^N`.
    pub fn reset_to_mixed(&mut self, q: f64) {
        let dim = self.dim();
        for v in self.rho.iter_mut() {
            *v *= 1.0 - q;
        }
        for i in 0..dim {
            self.rho[i * dim + i] += q / dim as f64;
        }
    }

    pub fn expectation_z(&self, m: usize) -> f64 {
        (0..self.dim())
            .map(|i| {
                let sign = if (i >> m) & 1 == 0 { 1.0 } else { -1.0 };
                sign * self.rho[i * self.dim() + i].re
            })
            .sum()
    }

    /// Evolves `|0..0><0..0|` through `circ` with the channels of `noise`
    /// and returns `<Z_m>` for every qubit.
    pub fn run(circ: &Circuit, noise: &NoiseModel) -> Result<Vec<f64>> {
        noise.validate()?;
        let mut dm = DensityMatrix::zero(circ.n_qubits())?;
        for block in circ.blocks() {
            for g in block.layers.iter().flat_map(|l| l.gates()) {
                dm.apply_gate(g);
                if let (NoiseMode::LocalDepolarizing, Gate::Rzz { qubits: [a, b], .. }) = (noise.mode, g) {
                    dm.depolarize_pair(*a, *b, noise.p2);
                }
            }
            if noise.mode == NoiseMode::GlobalDepolarizing && block.kind == BlockKind::FloquetStep {
                dm.reset_to_mixed(noise.q_global);
            }
        }
        Ok((0..circ.n_qubits()).map(|m| dm.expectation_z(m)).collect())
    }
}

/// `a (x) b` with `a` acting on the low bit.
fn kron(low: &[Complex64; 4], high: &[Complex64; 4]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); 16];
    for r in 0..4 {
        for c in 0..4 {
            out[r * 4 + c] = low[(r & 1) * 2 + (c & 1)] * high[(r >> 1) * 2 + (c >> 1)];
        }
    }
    out
}

/// Multiplies the vector by `m` (or its complex conjugate) on the given bits.
/// Local index bit `j` corresponds to `bits[j]`.
fn apply_matrix(v: &mut [Complex64], bits: &[usize], m: &[Complex64], conj: bool) {
    let k = bits.len();
    let local = 1usize << k;
    let mask: usize = bits.iter().map(|b| 1usize << b).sum();
    let mut buf = vec![Complex64::new(0.0, 0.0); local];
    for base in 0..v.len() {
        if base & mask != 0 {
            continue;
        }
        let index = |l: usize| -> usize {
            bits.iter()
                .enumerate()
                .fold(base, |acc, (j, b)| acc | (((l >> j) & 1) << b))
        };
        for (l, slot) in buf.iter_mut().enumerate() {
            *slot = v[index(l)];
        }
        for r in 0..local {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, x) in buf.iter().enumerate() {
                let e = m[r * local + c];
                acc += if conj { e.conj() } else { e } * x;
            }
            v[index(r)] = acc;
        }
    }
}
