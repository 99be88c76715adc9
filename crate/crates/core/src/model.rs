//! Kicked Ising model parameters and disorder sampling.
//!
//! All couplings are dimensionless angles with the drive period set to one,
//! so `jt` is the ZZ coupling times the period, and so on.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// ZZ coupling angle.
    pub jt: f64,
    /// Longitudinal field angle.
    pub bzt: f64,
    /// Center of the transverse field distribution.
    pub bx0t: f64,
    /// Half-width of the transverse field distribution.
    pub w: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            jt: FRAC_PI_2,
            bzt: 1.3,
            bx0t: FRAC_PI_2,
            w: 0.0,
        }
    }
}

impl ModelParams {
    pub fn with_disorder(self, w: f64) -> Self {
        Self { w, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("jt", self.jt), ("bzt", self.bzt), ("bx0t", self.bx0t), ("w", self.w)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("{v} is not finite")));
            }
        }
        if self.w < 0.0 {
            return Err(Error::invalid("w", format!("disorder half-width {} is negative", self.w)));
        }
        Ok(())
    }
}

/// One draw of the site-dependent transverse field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub bxt: Vec<f64>,
    pub seed: u64,
    pub realization_index: u64,
}

/// Draws i.i.d. uniform fields in `[bx0t - w, bx0t + w]`.
///
/// The generator is ChaCha8 keyed by `seed` with `realization_index` as the
/// stream id, so every realization can be generated on its own. The same
/// `(seed, realization_index)` pair yields the same underlying uniforms for
/// every `w`.
pub fn sample_disorder(
    params: &ModelParams,
    n_qubits: usize,
    seed: u64,
    realization_index: u64,
) -> Result<DisorderRealization> {
    params.validate()?;
    if n_qubits == 0 {
        return Err(Error::invalid("n_qubits", "need at least one qubit"));
    }
    let (lo, hi) = (params.bx0t - params.w, params.bx0t + params.w);
    let bxt = if params.w == 0.0 {
        vec![params.bx0t; n_qubits]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(realization_index);
        (0..n_qubits)
            .map(|_| rng.gen_range(lo..=hi).clamp(lo, hi))
            .collect()
    };
    Ok(DisorderRealization {
        bxt,
        seed,
        realization_index,
    })
}
