use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Pauli, StateVector, DEFAULT_MAX_QUBITS};
use crate::circuit::{fold_gates, BlockKind, Circuit, Gate};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;

/// Where depolarizing noise enters the circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    None,
    /// A uniformly random non-identity two-qubit Pauli after a two-qubit
    /// gate, with probability `p2`.
    LocalDepolarizing,
    /// With probability `q_global` after each Floquet step, the state is
    /// replaced by a uniformly random computational basis state.
    GlobalDepolarizing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    pub p2: f64,
    #[serde(default)]
    pub q_global: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            mode: NoiseMode::LocalDepolarizing,
            p2: 3.7e-3,
            q_global: 0.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            mode: NoiseMode::None,
            p2: 0.0,
            q_global: 0.0,
        }
    }

    pub fn local(p2: f64) -> Self {
        Self {
            mode: NoiseMode::LocalDepolarizing,
            p2,
            q_global: 0.0,
        }
    }

    pub fn global(q_global: f64) -> Self {
        Self {
            mode: NoiseMode::GlobalDepolarizing,
            p2: 0.0,
            q_global,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p2) {
            return Err(Error::invalid("p2", format!("{} not in [0, 1)", self.p2)));
        }
        if !(0.0..1.0).contains(&self.q_global) {
            return Err(Error::invalid("q_global", format!("{} not in [0, 1)", self.q_global)));
        }
        Ok(())
    }

    /// Whether every trajectory is the ideal one.
    pub fn is_trivial(&self) -> bool {
        match self.mode {
            NoiseMode::None => true,
            NoiseMode::LocalDepolarizing => self.p2 == 0.0,
            NoiseMode::GlobalDepolarizing => self.q_global == 0.0,
        }
    }
}

/// Readout model: exact expectation values or binomial sampling of `Z_m`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    #[default]
    Exact,
    PerTrajectory(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryOptions {
    pub trajectories: usize,
    pub shots: Shots,
    pub seed: u64,
    pub max_qubits: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            trajectories: 1000,
            shots: Shots::Exact,
            seed: 0,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

/// Trajectory-averaged `<Z_m>` and its standard error for every qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct ZEstimates {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trajectories: usize,
}

#[derive(Clone, Copy, Debug)]
enum Fault {
    /// Two-qubit Pauli index in 1..16 after the `gate`-th gate of the block.
    Pauli { block: usize, gate: usize, index: usize },
    /// Reset to a basis state at the end of the block.
    Reset { block: usize, basis: usize },
}

impl Fault {
    fn block(&self) -> usize {
        match *self {
            Fault::Pauli { block, .. } | Fault::Reset { block, .. } => block,
        }
    }
}

/// Ideal states at block boundaries; every block preserves its unitary under
/// folding, so they are shared by all folded variants of the circuit.
struct Checkpoints {
    stride: usize,
    states: Vec<StateVector>,
    ideal_z: Vec<f64>,
}

const CHECKPOINT_BUDGET_BYTES: usize = 256 << 20;

impl Checkpoints {
    fn new(circ: &Circuit, max_qubits: usize) -> Result<Self> {
        let mut state = StateVector::zero(circ.n_qubits(), max_qubits)?;
        let nblocks = circ.blocks().len().max(1);
        let bytes = (16usize << circ.n_qubits()).saturating_mul(nblocks);
        let stride = bytes.div_ceil(CHECKPOINT_BUDGET_BYTES).max(1);
        let mut states = Vec::new();
        for (b, block) in circ.blocks().iter().enumerate() {
            if b % stride == 0 {
                states.push(state.clone());
            }
            for g in block.layers.iter().flat_map(|l| l.gates()) {
                state.apply_unchecked(g);
            }
        }
        if states.is_empty() {
            states.push(state.clone());
        }
        Ok(Self {
            stride,
            ideal_z: state.expectation_z_all(),
            states,
        })
    }
}

fn draw_faults(circ: &Circuit, noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Vec<Fault> {
    let mut faults = Vec::new();
    let dim = 1usize << circ.n_qubits();
    for (b, block) in circ.blocks().iter().enumerate() {
        if noise.mode == NoiseMode::LocalDepolarizing {
            for (k, g) in block.layers.iter().flat_map(|l| l.gates()).enumerate() {
                if g.is_two_qubit() && rng.gen::<f64>() < noise.p2 {
                    faults.push(Fault::Pauli {
                        block: b,
                        gate: k,
                        index: rng.gen_range(1..16),
                    });
                }
            }
        }
        if noise.mode == NoiseMode::GlobalDepolarizing
            && block.kind == BlockKind::FloquetStep
            && rng.gen::<f64>() < noise.q_global
        {
            faults.push(Fault::Reset {
                block: b,
                basis: rng.gen_range(0..dim),
            });
        }
    }
    faults
}

fn run_trajectory(circ: &Circuit, checkpoints: &Checkpoints, faults: &[Fault]) -> Vec<f64> {
    let Some(first) = faults.first() else {
        return checkpoints.ideal_z.clone();
    };
    let slot = first.block() / checkpoints.stride;
    let mut state = checkpoints.states[slot].clone();
    let mut pending = faults.iter().peekable();
    for (b, block) in circ.blocks().iter().enumerate().skip(slot * checkpoints.stride) {
        for (k, g) in block.layers.iter().flat_map(|l| l.gates()).enumerate() {
            state.apply_unchecked(g);
            while let Some(&&Fault::Pauli { block, gate, index }) = pending.peek() {
                if block != b || gate != k {
                    break;
                }
                if let Gate::Rzz { qubits: [qa, qb], .. } = *g {
                    state.apply_pauli(qa, Pauli::from_index(index));
                    state.apply_pauli(qb, Pauli::from_index(index >> 2));
                }
                pending.next();
            }
        }
        if let Some(&&Fault::Reset { block, basis }) = pending.peek() {
            if block == b {
                state.set_basis_state(basis);
                pending.next();
            }
        }
    }
    debug_assert!((state.norm_sqr() - 1.0).abs() < 1e-9);
    state.expectation_z_all()
}

fn sample_shots(z: &mut [f64], shots: Shots, rng: &mut ChaCha8Rng) -> Result<()> {
    if let Shots::PerTrajectory(s) = shots {
        for v in z.iter_mut() {
            let p_up = ((1.0 + *v) / 2.0).clamp(0.0, 1.0);
            let dist = Binomial::new(s, p_up).map_err(|e| Error::invalid("shots", e.to_string()))?;
            let ups = dist.sample(rng) as f64;
            *v = 2.0 * ups / s as f64 - 1.0;
        }
    }
    Ok(())
}

fn trajectory_rng(seed: u64, traj: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj as u64);
    rng
}

fn reduce(samples: &[Vec<f64>], n_qubits: usize, shots: Shots) -> ZEstimates {
    let t = samples.len();
    let mut mean = vec![0.0; n_qubits];
    for s in samples {
        for (m, v) in s.iter().enumerate() {
            mean[m] += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= t as f64);
    let stderr = if t > 1 {
        let mut var = vec![0.0; n_qubits];
        for s in samples {
            for (m, v) in s.iter().enumerate() {
                var[m] += (v - mean[m]).powi(2);
            }
        }
        var.iter().map(|v| (v / (t - 1) as f64 / t as f64).sqrt()).collect()
    } else {
        match shots {
            Shots::Exact => vec![0.0; n_qubits],
            Shots::PerTrajectory(s) => mean.iter().map(|z| ((1.0 - z * z).max(0.0) / s as f64).sqrt()).collect(),
        }
    };
    ZEstimates {
        mean,
        stderr,
        trajectories: t,
    }
}

fn validate(noise: &NoiseModel, opts: &TrajectoryOptions) -> Result<()> {
    noise.validate()?;
    if opts.trajectories == 0 {
        return Err(Error::invalid("trajectories", "need at least one trajectory"));
    }
    if opts.shots == Shots::PerTrajectory(0) {
        return Err(Error::invalid("shots", "need at least one shot"));
    }
    Ok(())
}

/// Runs `circ` on `|0...0>` under `noise` and averages `<Z_m>` over
/// trajectories.
///
/// Trajectory `t` draws from a ChaCha8 stream `t` keyed by `opts.seed`, and
/// the reduction runs in trajectory order, so the output does not depend on
/// the worker count. Trajectories without faults reuse the ideal result, and
/// faulty ones resume from the last ideal checkpoint before their first
/// fault.
pub fn run_noisy(circ: &Circuit, noise: &NoiseModel, opts: &TrajectoryOptions) -> Result<ZEstimates> {
    validate(noise, opts)?;
    let checkpoints = Checkpoints::new(circ, opts.max_qubits)?;
    if noise.is_trivial() && opts.shots == Shots::Exact {
        return Ok(ZEstimates {
            stderr: vec![0.0; circ.n_qubits()],
            mean: checkpoints.ideal_z,
            trajectories: opts.trajectories,
        });
    }
    let samples = (0..opts.trajectories)
        .into_par_iter()
        .map(|t| {
            let mut rng = trajectory_rng(opts.seed, t);
            let faults = draw_faults(circ, noise, &mut rng);
            let mut z = run_trajectory(circ, &checkpoints, &faults);
            sample_shots(&mut z, opts.shots, &mut rng)?;
            Ok(z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(&samples, circ.n_qubits(), opts.shots))
}

/// Like [`run_noisy`], but every trajectory runs its own folding of `circ` to
/// noise factor `f`, with fold seed derived from `fold_seed` and the
/// trajectory index. Averaging over foldings realizes the mean noise scaling
/// exactly rather than for one fixed fold pattern.
pub fn run_noisy_folded(
    circ: &Circuit,
    f: f64,
    fold_seed: u64,
    noise: &NoiseModel,
    opts: &TrajectoryOptions,
) -> Result<ZEstimates> {
    if f == 1.0 {
        return run_noisy(circ, noise, opts);
    }
    fold_gates(circ, f, fold_seed)?;
    validate(noise, opts)?;
    let checkpoints = Checkpoints::new(circ, opts.max_qubits)?;
    if noise.is_trivial() && opts.shots == Shots::Exact {
        return Ok(ZEstimates {
            stderr: vec![0.0; circ.n_qubits()],
            mean: checkpoints.ideal_z,
            trajectories: opts.trajectories,
        });
    }
    let samples = (0..opts.trajectories)
        .into_par_iter()
        .map(|t| {
            let folded = fold_gates(circ, f, derive_seed(fold_seed, &[t as u64]))?;
            let mut rng = trajectory_rng(opts.seed, t);
            let faults = draw_faults(&folded, noise, &mut rng);
            let mut z = run_trajectory(&folded, &checkpoints, &faults);
            sample_shots(&mut z, opts.shots, &mut rng)?;
            Ok(z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(&samples, circ.n_qubits(), opts.shots))
}
