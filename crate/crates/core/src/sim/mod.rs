//! Exact statevector evolution and noisy trajectory sampling.

pub mod density;
mod noisy;

use num_complex::Complex64;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::lattice::Qubit;

pub use noisy::{run_noisy, run_noisy_folded, NoiseMode, NoiseModel, Shots, TrajectoryOptions, ZEstimates};

/// Default cap on simulated qubits (2^26 amplitudes, 1 GiB).
pub const DEFAULT_MAX_QUBITS: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub(crate) fn from_index(i: usize) -> Pauli {
        [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][i & 3]
    }
}

/// `2^N` complex amplitudes; bit `q` of the basis index is qubit `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits`, refusing to allocate beyond `max_qubits`.
    pub fn zero(n_qubits: usize, max_qubits: usize) -> Result<Self> {
        if n_qubits > max_qubits {
            return Err(Error::MemoryCap {
                num_qubits: n_qubits,
                cap: max_qubits,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid("amplitudes", format!("length {len} is not a power of two")));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    /// Overwrites the state with the computational basis state `index`.
    pub fn set_basis_state(&mut self, index: usize) {
        self.amps.fill(Complex64::new(0.0, 0.0));
        self.amps[index] = Complex64::new(1.0, 0.0);
    }

    fn check(&self, q: Qubit) -> Result<()> {
        if q < self.n_qubits {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange {
                qubit: q,
                num_qubits: self.n_qubits,
            })
        }
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        for q in gate.qubits() {
            self.check(q)?;
        }
        self.apply_unchecked(gate);
        debug_assert!(
            (self.norm_sqr() - 1.0).abs() < 1e-10 || self.n_qubits > 16,
            "norm drifted after {gate:?}"
        );
        Ok(())
    }

    pub fn apply_circuit(&mut self, circ: &Circuit) -> Result<()> {
        if circ.n_qubits() != self.n_qubits {
            return Err(Error::SizeMismatch {
                what: "circuit",
                got: circ.n_qubits(),
                expected: self.n_qubits,
            });
        }
        for g in circ.gates() {
            self.apply_unchecked(g);
        }
        debug_assert!((self.norm_sqr() - 1.0).abs() < 1e-10);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Rx { qubit, angle } => {
                let c = Complex64::new((angle / 2.0).cos(), 0.0);
                let s = Complex64::new(0.0, -(angle / 2.0).sin());
                self.for_pairs(qubit, |a0, a1| {
                    let (x, y) = (*a0, *a1);
                    *a0 = c * x + s * y;
                    *a1 = s * x + c * y;
                });
            }
            Gate::Rz { qubit, angle } => {
                let lo = Complex64::from_polar(1.0, -angle / 2.0);
                let hi = lo.conj();
                self.for_pairs(qubit, |a0, a1| {
                    *a0 *= lo;
                    *a1 *= hi;
                });
            }
            Gate::Rzz { qubits: [a, b], angle } => {
                let even = Complex64::from_polar(1.0, -angle / 2.0);
                let odd = even.conj();
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    *amp *= if (i & mask).count_ones().is_multiple_of(2) { even } else { odd };
                }
            }
            Gate::X { qubit } => self.for_pairs(qubit, std::mem::swap),
            Gate::Idle { .. } => {}
        }
    }

    pub(crate) fn apply_pauli(&mut self, qubit: Qubit, pauli: Pauli) {
        let i = Complex64::new(0.0, 1.0);
        match pauli {
            Pauli::I => {}
            Pauli::X => self.for_pairs(qubit, std::mem::swap),
            Pauli::Y => self.for_pairs(qubit, |a0, a1| {
                let (x, y) = (*a0, *a1);
                *a0 = -i * y;
                *a1 = i * x;
            }),
            Pauli::Z => self.for_pairs(qubit, |_, a1| *a1 = -*a1),
        }
    }

    #[inline]
    fn for_pairs(&mut self, qubit: Qubit, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << qubit;
        for chunk in self.amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi) {
                f(a0, a1);
            }
        }
    }

    /// `<psi| Z_m |psi>`.
    pub fn expectation_z(&self, m: Qubit) -> Result<f64> {
        self.check(m)?;
        let mut acc = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if (i >> m) & 1 == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        Ok(acc)
    }

    /// `<Z_m>` for every qubit from one pass over the amplitudes. Each entry
    /// is accumulated in the same order as [`Self::expectation_z`], so the
    /// two agree bit for bit.
    pub fn expectation_z_all(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_qubits];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (m, slot) in acc.iter_mut().enumerate() {
                if (i >> m) & 1 == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        acc
    }
}

/// Noiseless `<Z_m>` for all `m` after running `circ` on `|0...0>`.
pub fn simulate_z(circ: &Circuit, max_qubits: usize) -> Result<Vec<f64>> {
    let mut state = StateVector::zero(circ.n_qubits(), max_qubits)?;
    state.apply_circuit(circ)?;
    Ok(state.expectation_z_all())
}
