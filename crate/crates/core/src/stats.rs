//! Disorder and site averaging, zero-noise extrapolation and crossover
//! estimation.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::otoc::OtocRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Normalized,
    Veff,
    Numerator,
    Denominator,
    /// Zero-noise extrapolated bare OTOC; stored with `f = 0`.
    Zne,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Normalized => "normalized",
            Quantity::Veff => "veff",
            Quantity::Numerator => "numerator",
            Quantity::Denominator => "denominator",
            Quantity::Zne => "zne",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Quantity::Normalized,
            Quantity::Veff,
            Quantity::Numerator,
            Quantity::Denominator,
            Quantity::Zne,
        ]
        .into_iter()
        .find(|q| q.name() == s)
    }
}

/// Grouping key: disorder strength, Trotter steps, distance from the
/// butterfly, noise factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupKey {
    pub w: f64,
    pub n: usize,
    pub x: usize,
    pub f: f64,
}

impl GroupKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.w
            .total_cmp(&other.w)
            .then(self.n.cmp(&other.n))
            .then(self.x.cmp(&other.x))
            .then(self.f.total_cmp(&other.f))
    }
}

/// One value entering an average. `value == None` marks a discarded record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub key: GroupKey,
    pub realization: u64,
    pub m: usize,
    pub value: Option<f64>,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub quantity: Quantity,
    pub key: GroupKey,
    /// `None` when every record in the group was discarded.
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub n_used: usize,
    pub n_discarded: usize,
}

/// Extracts the per-record values of `quantity`. `p` is the two-qubit error
/// rate used for the effective-volume error bars.
///
/// Discarded records drop out of the normalized OTOC and effective volume;
/// bare numerators and denominators are averaged over every record.
pub fn samples(records: &[OtocRecord], quantity: Quantity, p: Option<f64>) -> Result<Vec<Sample>> {
    records
        .iter()
        .map(|r| {
            let key = GroupKey {
                w: r.w,
                n: r.n,
                x: r.x,
                f: r.f,
            };
            let (value, sigma) = match quantity {
                Quantity::Normalized => (r.normalized, r.err_normalized().unwrap_or(0.0)),
                Quantity::Veff => {
                    let sigma = match (r.veff, p) {
                        (Some(_), Some(p)) => r.err_veff(p).unwrap_or(0.0),
                        (Some(_), None) => {
                            return Err(Error::invalid("p", "error rate needed to weight effective volumes"));
                        }
                        (None, _) => 0.0,
                    };
                    (r.veff.filter(|_| !r.discarded), sigma)
                }
                Quantity::Numerator => (Some(r.numerator), r.err_num),
                Quantity::Denominator => (Some(r.denominator), r.err_den),
                Quantity::Zne => {
                    return Err(Error::invalid("quantity", "ZNE samples come from zne_samples"));
                }
            };
            Ok(Sample {
                key,
                realization: r.realization,
                m: r.m,
                value: value.filter(|_| !(r.discarded && matches!(quantity, Quantity::Normalized))),
                sigma,
            })
        })
        .collect()
}

/// Inverse-variance weighted mean of `(value, sigma)` pairs.
///
/// With every `sigma > 0` the weights are `1 / sigma^2` and the standard
/// error is `(sum w)^(-1/2)`. If any `sigma` is zero (exact, shot-free
/// values) the mean is unweighted and the standard error is the sample
/// standard deviation over `sqrt(k)`.
pub fn weighted_mean(values: &[(f64, f64)]) -> Option<(f64, f64)> {
    let k = values.len();
    if k == 0 {
        return None;
    }
    if values.iter().all(|&(_, s)| s > 0.0) {
        let (mut sw, mut swy) = (0.0, 0.0);
        for &(y, s) in values {
            let w = 1.0 / (s * s);
            sw += w;
            swy += w * y;
        }
        Some((swy / sw, sw.powf(-0.5)))
    } else {
        let mean = values.iter().map(|v| v.0).sum::<f64>() / k as f64;
        let stderr = if k > 1 {
            let var = values.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Some((mean, stderr))
    }
}

/// Pools every site at equal distance together with the disorder average, in
/// one weighted pass per `(w, n, x, f)` group. Inputs are sorted first, so
/// the result does not depend on record order.
pub fn aggregate_samples(quantity: Quantity, samples: &[Sample]) -> Result<Vec<EnsembleStats>> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no records to aggregate".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| {
        a.key
            .cmp(&b.key)
            .then(a.realization.cmp(&b.realization))
            .then(a.m.cmp(&b.m))
    });
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| a.key.cmp(&b.key) == Ordering::Equal) {
        let used: Vec<(f64, f64)> = group.iter().filter_map(|s| s.value.map(|v| (v, s.sigma))).collect();
        let stats = weighted_mean(&used);
        out.push(EnsembleStats {
            quantity,
            key: group[0].key,
            mean: stats.map(|s| s.0),
            stderr: stats.map(|s| s.1),
            n_used: used.len(),
            n_discarded: group.len() - used.len(),
        });
    }
    Ok(out)
}

pub fn aggregate(records: &[OtocRecord], quantity: Quantity, p: Option<f64>) -> Result<Vec<EnsembleStats>> {
    aggregate_samples(quantity, &samples(records, quantity, p)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZneEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Fitted decay rate `b` of `a exp(-b f)`.
    pub rate: f64,
}

/// Fits `y = a exp(-b f)` and returns `a`, the value at zero noise.
///
/// Two points are inverted in closed form; more points use a weighted least
/// squares fit of `ln|y|` against `f`. Errors are propagated to first order.
pub fn zne_extrapolate(points: &[(f64, f64, f64)]) -> Result<ZneEstimate> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("ZNE needs at least two noise factors".into()));
    }
    let sign = points[0].1.signum();
    if points.iter().any(|p| p.1 == 0.0 || !p.1.is_finite() || p.1.signum() != sign) {
        return Err(Error::NotExtrapolable("values must be nonzero with one sign".into()));
    }
    let distinct = {
        let mut fs: Vec<f64> = points.iter().map(|p| p.0).collect();
        fs.sort_by(f64::total_cmp);
        fs.dedup();
        fs.len()
    };
    if distinct < 2 {
        return Err(Error::NotExtrapolable("noise factors must differ".into()));
    }

    if let [(f1, y1, s1), (f2, y2, s2)] = *points {
        let rate = (y1 / y2).ln() / (f2 - f1);
        let estimate = y1 * (rate * f1).exp();
        // a = y1^(1+r) * y2^(-r) with r = f1 / (f2 - f1)
        let r = f1 / (f2 - f1);
        let stderr = ((1.0 + r) * estimate * s1 / y1).hypot(r * estimate * s2 / y2);
        return Ok(ZneEstimate {
            estimate,
            stderr: stderr.abs(),
            rate,
        });
    }

    let weighted = points.iter().all(|p| p.2 > 0.0);
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(f, y, s) in points {
        let w = if weighted { (y / s).powi(2) } else { 1.0 };
        let ly = y.abs().ln();
        sw += w;
        swx += w * f;
        swy += w * ly;
        swxx += w * f * f;
        swxy += w * f * ly;
    }
    let det = sw * swxx - swx * swx;
    let slope = (sw * swxy - swx * swy) / det;
    let intercept = (swxx * swy - swx * swxy) / det;
    let estimate = sign * intercept.exp();
    let var_intercept = if weighted { swxx / det } else { 0.0 };
    Ok(ZneEstimate {
        estimate,
        stderr: estimate.abs() * var_intercept.sqrt(),
        rate: -slope,
    })
}

/// Extrapolates the bare OTOC of every `(w, realization, n, m)` over the
/// available noise factors. Sites whose values cannot be extrapolated come
/// back with `value == None`.
pub fn zne_samples(records: &[OtocRecord]) -> Vec<Sample> {
    let mut sorted: Vec<&OtocRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.w.total_cmp(&b.w)
            .then(a.realization.cmp(&b.realization))
            .then(a.n.cmp(&b.n))
            .then(a.m.cmp(&b.m))
            .then(a.f.total_cmp(&b.f))
    });
    sorted
        .chunk_by(|a, b| a.w == b.w && a.realization == b.realization && a.n == b.n && a.m == b.m)
        .filter(|g| g.len() >= 2)
        .map(|g| {
            let points: Vec<_> = g.iter().map(|r| (r.f, r.numerator, r.err_num)).collect();
            let fit = zne_extrapolate(&points).ok();
            Sample {
                key: GroupKey {
                    w: g[0].w,
                    n: g[0].n,
                    x: g[0].x,
                    f: 0.0,
                },
                realization: g[0].realization,
                m: g[0].m,
                value: fit.map(|z| z.estimate),
                sigma: fit.map_or(0.0, |z| z.stderr),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverEstimate {
    pub w_c: f64,
    pub uncertainty: f64,
    /// The steepest slope was shared by several grid points.
    pub low_confidence: bool,
    pub slopes: Vec<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossoverOptions {
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for CrossoverOptions {
    fn default() -> Self {
        Self {
            bootstrap: 1000,
            seed: 0,
        }
    }
}

fn central_slopes(ws: &[f64], ys: &[f64]) -> Vec<f64> {
    (1..ws.len() - 1)
        .map(|i| (ys[i + 1] - ys[i - 1]) / (ws[i + 1] - ws[i - 1]))
        .collect()
}

/// Index of the steepest interior point (into `ws`), sub-grid `W_c`, and
/// whether the maximum was tied.
fn steepest(ws: &[f64], ys: &[f64]) -> (usize, f64, bool) {
    let slopes = central_slopes(ws, ys);
    let max = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * max.abs().max(f64::MIN_POSITIVE);
    let k = slopes.iter().position(|&s| s >= max - tol).unwrap_or(0);
    let tied = slopes.iter().filter(|&&s| s >= max - tol).count() > 1;
    let i = k + 1;
    let mut w_c = ws[i];
    if !tied && k > 0 && k + 1 < slopes.len() {
        // parabola through the neighbouring slopes, vertex kept within half a cell
        let (l, c, r) = (slopes[k - 1], slopes[k], slopes[k + 1]);
        let curvature = l - 2.0 * c + r;
        if curvature < 0.0 {
            let delta = (0.5 * (l - r) / curvature).clamp(-0.5, 0.5);
            let h = if delta >= 0.0 { ws[i + 1] - ws[i] } else { ws[i] - ws[i - 1] };
            w_c += delta * h;
        }
    }
    (i, w_c, tied)
}

/// Disorder strength of steepest ascent of an OTOC-versus-W curve.
///
/// Slopes are central differences at interior grid points; the maximum is
/// refined by a parabola through the neighbouring slopes. Ties go to the
/// smallest W and are flagged. The uncertainty combines half the local grid
/// spacing with the spread of the estimate over a parametric bootstrap that
/// redraws each mean from a normal with its standard error.
pub fn estimate_crossover(curve: &[(f64, f64, f64)], opts: &CrossoverOptions) -> Result<CrossoverEstimate> {
    if curve.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "crossover needs at least 3 points, got {}",
            curve.len()
        )));
    }
    if curve.windows(2).any(|p| p[1].0.partial_cmp(&p[0].0) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::invalid("curve", "W values must be strictly increasing"));
    }
    let ws: Vec<f64> = curve.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.1).collect();
    let (i, w_c, tied) = steepest(&ws, &ys);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draws: Vec<f64> = (0..opts.bootstrap)
        .map(|_| {
            let resampled: Vec<f64> = curve
                .iter()
                .map(|&(_, y, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    y + s * z
                })
                .collect();
            steepest(&ws, &resampled).1 - ws[0]
        })
        .collect();
    let spread = if draws.len() > 1 {
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half_cell = 0.25 * (ws[i + 1] - ws[i - 1]);

    Ok(CrossoverEstimate {
        w_c,
        uncertainty: half_cell.hypot(spread),
        low_confidence: tied,
        slopes: ws[1..ws.len() - 1]
            .iter()
            .copied()
            .zip(central_slopes(&ws, &ys))
            .collect(),
    })
}
