//! JSON run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_heavy_hex, color_edges, load_graph, CouplingGraph, Qubit};
use crate::model::ModelParams;
use crate::sim::{NoiseModel, Shots, DEFAULT_MAX_QUBITS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeSpec {
    HeavyHex { rows: usize, cols: usize },
    /// Path to an "i j" edge list, relative to the working directory.
    EdgeList(PathBuf),
}

impl LatticeSpec {
    /// Builds the coupling graph with its edges split into matchings.
    pub fn build(&self) -> Result<CouplingGraph> {
        match self {
            LatticeSpec::HeavyHex { rows, cols } => build_heavy_hex(*rows, *cols),
            LatticeSpec::EdgeList(path) => color_edges(&load_graph(path)?),
        }
    }
}

/// Floquet angles; the disorder width comes from `w_list`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Angles {
    pub jt: f64,
    pub bzt: f64,
    pub bx0t: f64,
}

impl Default for Angles {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            jt: p.jt,
            bzt: p.bzt,
            bx0t: p.bx0t,
        }
    }
}

impl Angles {
    pub fn with_disorder(&self, w: f64) -> ModelParams {
        ModelParams {
            jt: self.jt,
            bzt: self.bzt,
            bx0t: self.bx0t,
            w,
        }
    }
}

/// Total shots per circuit, or exact expectation values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotBudget {
    Count(u64),
    Keyword(ExactKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactKeyword {
    Exact,
}

impl ShotBudget {
    /// Splits the budget evenly over trajectories, rounding up.
    pub fn per_trajectory(&self, trajectories: usize) -> Shots {
        match *self {
            ShotBudget::Count(total) => Shots::PerTrajectory(total.div_ceil(trajectories.max(1) as u64)),
            ShotBudget::Keyword(ExactKeyword::Exact) => Shots::Exact,
        }
    }
}

fn default_w_list() -> Vec<f64> {
    (1..=25).map(|i| f64::from(i) * 0.02).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    /// Defaults to the lowest-index graph center.
    #[serde(default)]
    pub butterfly_qubit: Option<Qubit>,
    #[serde(default)]
    pub params: Angles,
    #[serde(default = "default_w_list")]
    pub w_list: Vec<f64>,
    /// Steps `1..=n_max` are simulated.
    #[serde(default = "RunConfig::default_n_max")]
    pub n_max: usize,
    #[serde(default = "RunConfig::default_realizations")]
    pub realizations: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default = "RunConfig::default_noise_factors")]
    pub noise_factors: Vec<f64>,
    #[serde(default = "RunConfig::default_trajectories")]
    pub trajectories: usize,
    #[serde(default = "RunConfig::default_shots")]
    pub shots: ShotBudget,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunConfig::default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "RunConfig::default_max_qubits")]
    pub max_qubits: usize,
    /// Bootstrap resamples for the crossover uncertainty.
    #[serde(default = "RunConfig::default_bootstrap")]
    pub bootstrap: usize,
}

impl RunConfig {
    fn default_n_max() -> usize {
        10
    }
    fn default_realizations() -> u64 {
        25
    }
    fn default_noise_factors() -> Vec<f64> {
        vec![1.0, 1.5]
    }
    fn default_trajectories() -> usize {
        1000
    }
    fn default_shots() -> ShotBudget {
        ShotBudget::Count(16_000)
    }
    fn default_output_dir() -> PathBuf {
        PathBuf::from("out")
    }
    fn default_max_qubits() -> usize {
        DEFAULT_MAX_QUBITS
    }
    fn default_bootstrap() -> usize {
        1000
    }

    /// Config with every optional field at its default.
    pub fn new(lattice: LatticeSpec) -> Self {
        Self {
            lattice,
            butterfly_qubit: None,
            params: Angles::default(),
            w_list: default_w_list(),
            n_max: Self::default_n_max(),
            realizations: Self::default_realizations(),
            noise: NoiseModel::default(),
            noise_factors: Self::default_noise_factors(),
            trajectories: Self::default_trajectories(),
            shots: Self::default_shots(),
            seed: 0,
            output_dir: Self::default_output_dir(),
            max_qubits: Self::default_max_qubits(),
            bootstrap: Self::default_bootstrap(),
        }
    }

    /// Parses a config, or the `config` member of a run manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = match value.get("config") {
            Some(inner) if value.get("schema_version").is_some() => {
                check_schema_version(&value, Path::new("manifest"))?;
                RunConfig::deserialize(inner)
            }
            // parse the text itself so errors carry line numbers
            _ => serde_json::from_str(text),
        };
        let cfg: RunConfig = parsed.map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks everything that does not need the graph.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("field `{field}`: {why}")));
        for (name, v) in [("jt", self.params.jt), ("bzt", self.params.bzt), ("bx0t", self.params.bx0t)] {
            if !v.is_finite() {
                return bad(&format!("params.{name}"), "must be finite".into());
            }
        }
        if self.w_list.is_empty() {
            return bad("w_list", "must not be empty".into());
        }
        if let Some(w) = self.w_list.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return bad("w_list", format!("{w} is not a finite non-negative width"));
        }
        let mut ws = self.w_list.clone();
        ws.sort_by(f64::total_cmp);
        if ws.windows(2).any(|p| p[0] == p[1]) {
            return bad("w_list", "contains duplicates".into());
        }
        if self.realizations == 0 {
            return bad("realizations", "must be at least 1".into());
        }
        if self.noise_factors.is_empty() {
            return bad("noise_factors", "must not be empty".into());
        }
        if let Some(f) = self.noise_factors.iter().find(|f| !(f.is_finite() && **f >= 1.0)) {
            return bad("noise_factors", format!("{f} is below 1"));
        }
        let mut fs = self.noise_factors.clone();
        fs.sort_by(f64::total_cmp);
        if fs.windows(2).any(|p| p[0] == p[1]) {
            return bad("noise_factors", "contains duplicates".into());
        }
        if self.trajectories == 0 {
            return bad("trajectories", "must be at least 1".into());
        }
        if self.shots == ShotBudget::Count(0) {
            return bad("shots", "must be positive or \"exact\"".into());
        }
        self.noise.validate().map_err(|e| Error::Config(format!("field `noise`: {e}")))?;
        if let LatticeSpec::HeavyHex { rows, cols } = self.lattice {
            if rows == 0 || cols == 0 {
                return bad("lattice.heavy_hex", "rows and cols must be positive".into());
            }
        }
        Ok(())
    }

    /// Builds the graph and resolves the butterfly, refusing graphs above
    /// the qubit cap before any state is allocated.
    pub fn resolve(&self) -> Result<(CouplingGraph, Qubit)> {
        let graph = self.lattice.build()?;
        if graph.num_qubits() > self.max_qubits {
            return Err(Error::MemoryCap {
                num_qubits: graph.num_qubits(),
                cap: self.max_qubits,
            });
        }
        if !graph.is_connected() {
            return Err(Error::Config("lattice: coupling graph is not connected".into()));
        }
        let butterfly = match self.butterfly_qubit {
            Some(b) if b >= graph.num_qubits() => {
                return Err(Error::Config(format!(
                    "field `butterfly_qubit`: {b} out of range for {} qubits",
                    graph.num_qubits()
                )));
            }
            Some(b) => b,
            None => graph.center()?,
        };
        Ok((graph, butterfly))
    }
}

/// Rejects JSON documents written by a newer schema.
pub fn check_schema_version(value: &serde_json::Value, path: &Path) -> Result<()> {
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => Ok(()),
        Some(v) => Err(Error::Schema {
            path: path.to_path_buf(),
            reason: format!("unsupported schema_version {v}, this build reads {SCHEMA_VERSION}"),
        }),
        None => Err(Error::Schema {
            path: path.to_path_buf(),
            reason: "missing schema_version".into(),
        }),
    }
}
