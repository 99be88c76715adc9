//! End-to-end pipeline: simulate every `(w, realization, n, f)` task, persist
//! the records, then aggregate them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{check_schema_version, RunConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::model::sample_disorder;
use crate::otoc::{measure_otoc, MeasureSeeds, OtocRecord, OtocSetup};
use crate::seeds::derive_seed;
use crate::sim::{NoiseMode, TrajectoryOptions};
use crate::stats::{
    aggregate, aggregate_samples, estimate_crossover, zne_samples, CrossoverEstimate, CrossoverOptions,
    EnsembleStats, Quantity,
};

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

const TAG_DISORDER: u64 = 1;
const TAG_NUMERATOR: u64 = 2;
const TAG_DENOMINATOR: u64 = 3;
const TAG_FOLD: u64 = 4;
const TAG_BOOTSTRAP: u64 = 5;

/// Seed of the disorder stream. It does not depend on `w`, so every disorder
/// strength reuses the same uniform draws rescaled to its width.
pub fn disorder_seed(base: u64) -> u64 {
    derive_seed(base, &[TAG_DISORDER])
}

fn measure_seeds(base: u64, w: f64, realization: u64, n: usize, f: f64) -> MeasureSeeds {
    let tags = |tag| derive_seed(base, &[tag, w.to_bits(), realization, n as u64, f.to_bits()]);
    MeasureSeeds {
        numerator: tags(TAG_NUMERATOR),
        denominator: tags(TAG_DENOMINATOR),
        fold: tags(TAG_FOLD),
    }
}

/// Runs every task and returns the records sorted by `(w, realization, n, m, f)`.
///
/// Tasks are spread over the current rayon pool; each draws only from its
/// own seeded streams, so the output does not depend on the worker count.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<OtocRecord>> {
    cfg.validate()?;
    let (graph, butterfly) = cfg.resolve()?;
    let n_qubits = graph.num_qubits();
    let trajectories = TrajectoryOptions {
        trajectories: cfg.trajectories,
        shots: cfg.shots.per_trajectory(cfg.trajectories),
        seed: 0,
        max_qubits: cfg.max_qubits,
    };

    let mut tasks = Vec::new();
    for &w in &cfg.w_list {
        for r in 0..cfg.realizations {
            for n in 1..=cfg.n_max {
                for &f in &cfg.noise_factors {
                    tasks.push((w, r, n, f));
                }
            }
        }
    }
    let chunks = tasks
        .par_iter()
        .map(|&(w, r, n, f)| {
            let params = cfg.params.with_disorder(w);
            let real = sample_disorder(&params, n_qubits, disorder_seed(cfg.seed), r)?;
            let setup = OtocSetup {
                graph: &graph,
                params,
                butterfly,
                noise: cfg.noise,
                trajectories,
            };
            measure_otoc(&setup, &real, n, f, measure_seeds(cfg.seed, w, r, n, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records: Vec<OtocRecord> = chunks.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

pub fn sort_records(records: &mut [OtocRecord]) {
    records.sort_by(|a, b| {
        a.w.total_cmp(&b.w)
            .then(a.realization.cmp(&b.realization))
            .then(a.n.cmp(&b.n))
            .then(a.m.cmp(&b.m))
            .then(a.f.total_cmp(&b.f))
    });
}

/// Inputs of the analysis that are not in the records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Two-qubit error rate, needed for effective-volume error bars.
    pub p2: Option<f64>,
    pub bootstrap: usize,
    pub seed: u64,
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
}

impl AnalysisOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            p2: (cfg.noise.mode == NoiseMode::LocalDepolarizing && cfg.noise.p2 > 0.0).then_some(cfg.noise.p2),
            bootstrap: cfg.bootstrap,
            seed: derive_seed(cfg.seed, &[TAG_BOOTSTRAP]),
            w_min: None,
            w_max: None,
        }
    }
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            p2: None,
            bootstrap: 1000,
            seed: derive_seed(0, &[TAG_BOOTSTRAP]),
            w_min: None,
            w_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverSummary {
    pub quantity: Quantity,
    pub f: f64,
    pub w_c: Option<f64>,
    pub uncertainty: Option<f64>,
    pub low_confidence: bool,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub n: usize,
    pub x: usize,
    pub w_values: Vec<f64>,
    pub crossover: Vec<CrossoverSummary>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub aggregates: Vec<EnsembleStats>,
    pub summary: Summary,
}

/// Aggregates every quantity and locates the crossover of the normalized
/// (lowest noise factor) and zero-noise-extrapolated OTOC at the largest
/// step count and `x = n / 2`.
pub fn analyze(records: &[OtocRecord], opts: &AnalysisOptions) -> Result<Analysis> {
    let records: Vec<OtocRecord> = records
        .iter()
        .filter(|r| opts.w_min.is_none_or(|lo| r.w >= lo) && opts.w_max.is_none_or(|hi| r.w <= hi))
        .cloned()
        .collect();
    if records.is_empty() {
        return Err(Error::InsufficientData("no records in the selected W range".into()));
    }
    let mut diagnostics = Vec::new();
    let mut aggregates = Vec::new();
    for q in [Quantity::Normalized, Quantity::Numerator, Quantity::Denominator] {
        aggregates.extend(aggregate(&records, q, None)?);
    }
    let has_veff = records.iter().any(|r| r.veff.is_some());
    match (has_veff, opts.p2) {
        (true, Some(p)) => aggregates.extend(aggregate(&records, Quantity::Veff, Some(p))?),
        (true, None) => diagnostics.push("effective volume skipped: error rate unknown".to_string()),
        _ => {}
    }
    let zne = zne_samples(&records);
    if !zne.is_empty() {
        let failed = zne.iter().filter(|s| s.value.is_none()).count();
        if failed > 0 {
            diagnostics.push(format!("{failed} sites could not be extrapolated"));
        }
        aggregates.extend(aggregate_samples(Quantity::Zne, &zne)?);
    }
    for a in aggregates.iter().filter(|a| a.mean.is_none()) {
        diagnostics.push(format!(
            "{} at w={} n={} x={} f={}: every record discarded",
            a.quantity.name(),
            a.key.w,
            a.key.n,
            a.key.x,
            a.key.f
        ));
    }

    let n = records.iter().map(|r| r.n).max().unwrap_or(0);
    let x = n / 2;
    let f_min = records.iter().map(|r| r.f).fold(f64::INFINITY, f64::min);
    let mut w_values: Vec<f64> = records.iter().map(|r| r.w).collect();
    w_values.sort_by(f64::total_cmp);
    w_values.dedup();

    let crossover_of = |quantity: Quantity, f: f64| -> CrossoverSummary {
        let curve: Vec<(f64, f64, f64)> = aggregates
            .iter()
            .filter(|a| a.quantity == quantity && a.key.n == n && a.key.x == x && a.key.f == f)
            .filter_map(|a| Some((a.key.w, a.mean?, a.stderr?)))
            .collect();
        let est: Result<CrossoverEstimate> = estimate_crossover(
            &curve,
            &CrossoverOptions {
                bootstrap: opts.bootstrap,
                seed: opts.seed,
            },
        );
        match est {
            Ok(e) => CrossoverSummary {
                quantity,
                f,
                w_c: Some(e.w_c),
                uncertainty: Some(e.uncertainty),
                low_confidence: e.low_confidence,
                diagnostic: None,
            },
            Err(e) => CrossoverSummary {
                quantity,
                f,
                w_c: None,
                uncertainty: None,
                low_confidence: false,
                diagnostic: Some(e.to_string()),
            },
        }
    };
    let mut crossover = vec![crossover_of(Quantity::Normalized, f_min)];
    if !zne.is_empty() {
        crossover.push(crossover_of(Quantity::Zne, 0.0));
    }

    Ok(Analysis {
        aggregates,
        summary: Summary {
            schema_version: SCHEMA_VERSION,
            n,
            x,
            w_values,
            crossover,
            diagnostics,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub version: String,
    /// The run's config with the butterfly resolved, loadable as a config.
    pub config: RunConfig,
    pub num_qubits: usize,
    pub disorder_seed: u64,
    pub analysis: AnalysisOptions,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        check_schema_version(&value, path)?;
        Ok(serde_json::from_value(value)?)
    }
}

/// Full `run`: simulate, write records, analyze, write the rest.
pub fn run(cfg: &RunConfig) -> Result<Analysis> {
    let (graph, butterfly) = cfg.resolve()?;
    let mut resolved = cfg.clone();
    resolved.butterfly_qubit = Some(butterfly);
    let records = simulate(&resolved)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join(RECORDS_FILE), &records)?;
    let analysis_opts = AnalysisOptions::from_config(cfg);
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: resolved,
        num_qubits: graph.num_qubits(),
        disorder_seed: disorder_seed(cfg.seed),
        analysis: analysis_opts.clone(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;

    let analysis = analyze(&records, &analysis_opts)?;
    write_analysis(dir, &analysis)?;
    Ok(analysis)
}

/// `analyze`: re-reads records (and the manifest next to them, if present)
/// and writes aggregates and summary into `out_dir`.
pub fn reanalyze(records_path: &Path, out_dir: &Path, w_min: Option<f64>, w_max: Option<f64>) -> Result<Analysis> {
    let records = read_records(records_path)?;
    let manifest_path = records_path.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE);
    let mut opts = if manifest_path.exists() {
        Manifest::load(&manifest_path)?.analysis
    } else {
        AnalysisOptions::default()
    };
    opts.w_min = w_min;
    opts.w_max = w_max;
    let analysis = analyze(&records, &opts)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_analysis(out_dir, &analysis)?;
    Ok(analysis)
}

fn write_analysis(dir: &Path, analysis: &Analysis) -> Result<()> {
    write_aggregates(&dir.join(AGGREGATES_FILE), &analysis.aggregates)?;
    write_json(&dir.join(SUMMARY_FILE), &analysis.summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn schema_line() -> String {
    format!("#schema_version={SCHEMA_VERSION}\n")
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = schema_line().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Splits off and checks the schema line of a CSV file.
fn read_versioned(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let schema = |reason: String| Error::Schema {
        path: path.to_path_buf(),
        reason,
    };
    let version = first
        .trim()
        .strip_prefix("#schema_version=")
        .ok_or_else(|| schema("missing #schema_version line".into()))?;
    match version.parse::<u32>() {
        Ok(SCHEMA_VERSION) => Ok(rest.to_string()),
        Ok(v) => Err(schema(format!("unsupported schema_version {v}, this build reads {SCHEMA_VERSION}"))),
        Err(_) => Err(schema(format!("bad schema_version `{version}`"))),
    }
}

const RECORD_COLUMNS: [&str; 13] = [
    "w",
    "realization",
    "n",
    "m",
    "x",
    "f",
    "numerator",
    "err_num",
    "denominator",
    "err_den",
    "normalized",
    "veff",
    "discarded",
];

pub fn write_records(path: &Path, records: &[OtocRecord]) -> Result<()> {
    write_csv(path, records)
}

pub fn read_records(path: &Path) -> Result<Vec<OtocRecord>> {
    let body = read_versioned(path)?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != RECORD_COLUMNS {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            reason: format!("expected columns {}, found {}", RECORD_COLUMNS.join(","), header.join(",")),
        });
    }
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e| Error::Schema {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct AggregateRow {
    quantity: String,
    w: f64,
    n: usize,
    x: usize,
    f: f64,
    mean: Option<f64>,
    stderr: Option<f64>,
    n_used: usize,
    n_discarded: usize,
}

pub fn write_aggregates(path: &Path, stats: &[EnsembleStats]) -> Result<()> {
    write_csv(
        path,
        stats.iter().map(|s| AggregateRow {
            quantity: s.quantity.name().to_string(),
            w: s.key.w,
            n: s.key.n,
            x: s.key.x,
            f: s.key.f,
            mean: s.mean,
            stderr: s.stderr,
            n_used: s.n_used,
            n_discarded: s.n_discarded,
        }),
    )
}

pub fn read_aggregates(path: &Path) -> Result<Vec<EnsembleStats>> {
    let body = read_versioned(path)?;
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    reader
        .deserialize::<AggregateRow>()
        .map(|row| {
            let row = row?;
            let quantity = Quantity::parse(&row.quantity).ok_or_else(|| Error::Schema {
                path: path.to_path_buf(),
                reason: format!("unknown quantity `{}`", row.quantity),
            })?;
            Ok(EnsembleStats {
                quantity,
                key: crate::stats::GroupKey {
                    w: row.w,
                    n: row.n,
                    x: row.x,
                    f: row.f,
                },
                mean: row.mean,
                stderr: row.stderr,
                n_used: row.n_used,
                n_discarded: row.n_discarded,
            })
        })
        .collect()
}

/// Default location for `analyze` output: next to the records.
pub fn default_analysis_dir(records_path: &Path) -> PathBuf {
    records_path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}
