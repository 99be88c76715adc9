//! OTOC measurements per disorder realization and Trotter step count.
//!
//! With `|0^N>` as the reference state, `O_D = X_b` and `O_A = Z_m`, the OTOC
//! is `<Z_m>` in the state `U^dag^n X_b U^n |0^N>`; every site `m` is read off
//! one simulated state. The same circuit with the identity in place of `X_b`
//! gives the denominator of the normalized OTOC, which under depolarizing
//! noise is the fidelity `F = (1 - p)^V_eff`.

use serde::{Deserialize, Serialize};

use crate::circuit::{build_floquet_step, build_otoc_circuit, prune_causal_cone};
use crate::error::{Error, Result};
use crate::lattice::{CouplingGraph, Qubit};
use crate::model::{DisorderRealization, ModelParams};
use crate::sim::{run_noisy_folded, NoiseMode, NoiseModel, TrajectoryOptions};

/// One measured site for one `(w, realization, n, f)` task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocRecord {
    pub w: f64,
    pub realization: u64,
    pub n: usize,
    pub m: Qubit,
    pub x: usize,
    pub f: f64,
    pub numerator: f64,
    pub err_num: f64,
    pub denominator: f64,
    pub err_den: f64,
    pub normalized: Option<f64>,
    pub veff: Option<f64>,
    pub discarded: bool,
}

impl OtocRecord {
    /// Standard error of `numerator / denominator` by first-order propagation.
    pub fn err_normalized(&self) -> Option<f64> {
        let r = self.normalized?;
        Some((self.err_num.powi(2) + (r * self.err_den).powi(2)).sqrt() / self.denominator.abs())
    }

    pub fn err_veff(&self, p: f64) -> Option<f64> {
        self.veff?;
        Some(self.err_den / (self.denominator * (1.0 - p).ln().abs()))
    }
}

/// Seeds for one measurement. Numerator and denominator circuits get
/// independent trajectory streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasureSeeds {
    pub numerator: u64,
    pub denominator: u64,
    pub fold: u64,
}

/// Fixed inputs shared by every measurement of an experiment.
#[derive(Clone, Debug)]
pub struct OtocSetup<'a> {
    pub graph: &'a CouplingGraph,
    pub params: ModelParams,
    pub butterfly: Qubit,
    pub noise: NoiseModel,
    pub trajectories: TrajectoryOptions,
}

/// Simulates the pruned butterfly and identity circuits for `n` steps at
/// noise factor `f` and returns one record per site, ordered by `m`.
///
/// Records whose denominator is not positive are flagged `discarded` and
/// carry no normalized value or effective volume.
pub fn measure_otoc(
    setup: &OtocSetup<'_>,
    realization: &DisorderRealization,
    n: usize,
    f: f64,
    seeds: MeasureSeeds,
) -> Result<Vec<OtocRecord>> {
    let graph = setup.graph;
    let step = build_floquet_step(graph, &setup.params, realization)?;
    let butterfly = prune_causal_cone(&build_otoc_circuit(&step, n, setup.butterfly, true)?)?;
    let identity = prune_causal_cone(&build_otoc_circuit(&step, n, setup.butterfly, false)?)?;

    let run = |circ, seed| {
        let opts = TrajectoryOptions {
            seed,
            ..setup.trajectories
        };
        run_noisy_folded(circ, f, seeds.fold, &setup.noise, &opts)
    };
    let num = run(&butterfly, seeds.numerator)?;
    let den = run(&identity, seeds.denominator)?;

    let dist = graph.distances_from(setup.butterfly)?;
    let p2 = match setup.noise.mode {
        NoiseMode::LocalDepolarizing if setup.noise.p2 > 0.0 => Some(setup.noise.p2),
        _ => None,
    };
    (0..graph.num_qubits())
        .map(|m| {
            let x = dist[m].ok_or(Error::Disconnected(setup.butterfly, m))?;
            let (numerator, denominator) = (num.mean[m], den.mean[m]);
            let discarded = denominator <= 0.0;
            Ok(OtocRecord {
                w: setup.params.w,
                realization: realization.realization_index,
                n,
                m,
                x,
                f,
                numerator,
                err_num: num.stderr[m],
                denominator,
                err_den: den.stderr[m],
                normalized: (!discarded).then(|| numerator / denominator),
                veff: match (discarded, p2) {
                    (false, Some(p)) => Some(effective_quantum_volume(denominator, p)?),
                    _ => None,
                },
                discarded,
            })
        })
        .collect()
}

/// `log F / log(1 - p)`: the number of two-qubit gates at error rate `p`
/// whose combined fidelity is `F`.
pub fn effective_quantum_volume(fidelity: f64, p: f64) -> Result<f64> {
    if fidelity.is_nan() || fidelity <= 0.0 {
        return Err(Error::invalid("fidelity", format!("{fidelity} is not positive")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("{p} not in (0, 1)")));
    }
    Ok(fidelity.ln() / (1.0 - p).ln())
}
