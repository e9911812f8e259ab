use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Scenario selected by the subcommand or the `scenario` key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Recurrence,
    Hitting,
    Perturb,
    Correlations,
    Dimension,
    #[serde(alias = "bc")]
    BorelCantelli,
    #[serde(alias = "mapdist")]
    MapDistance,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Recurrence => "recurrence",
            Scenario::Hitting => "hitting",
            Scenario::Perturb => "perturb",
            Scenario::Correlations => "correlations",
            Scenario::Dimension => "dimension",
            Scenario::BorelCantelli => "borel-cantelli",
            Scenario::MapDistance => "map-distance",
        })
    }
}

/// Whole configuration file. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub seed: u64,
    pub samples: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub system: Option<SystemConfig>,
    pub observable: Option<ObservableConfig>,
    pub rate: Option<RateConfig>,
    pub recurrence: Option<RecurrenceConfig>,
    pub hitting: Option<HittingConfig>,
    pub perturb: Option<PerturbConfig>,
    pub correlations: Option<CorrelationsConfig>,
    pub dimension: Option<DimensionConfig>,
    pub bc: Option<BorelCantelliConfig>,
    pub mapdist: Option<MapDistanceConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Identity,
    Rotation,
    Automorphism,
    Cat,
    Permutation,
}

/// A map, optionally discretized onto a torus grid and towerized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    /// Torus dimension for `identity`.
    pub dim: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub matrix: Option<Vec<Vec<i64>>>,
    /// GPRM file for `permutation`.
    pub path: Option<PathBuf>,
    /// Replace the map by its nearest grid permutation at this level.
    pub level: Option<u32>,
    pub towerize: Option<TowerConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerConfig {
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    Identity,
    Cos,
    Trig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    pub kind: ObservableKind,
    /// Coordinate for `cos`.
    pub axis: Option<usize>,
    pub frequencies: Option<Vec<Vec<i64>>>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    Pow,
    Powlog,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub kind: RateKind,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceConfig {
    /// Horizon `N`.
    pub horizon: u64,
    /// First index of the minimum; defaults to 1.
    pub start: Option<u64>,
    /// Window union `⋃_{n=m}^{l} X_{n,k}`, emitted when all three are set.
    pub m: Option<u64>,
    pub l: Option<u64>,
    pub k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingConfig {
    pub y: Vec<f64>,
    pub horizon: u64,
    pub start: Option<u64>,
    pub p: u64,
    pub m: u64,
    pub l: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub delta: f64,
    pub epsilon: f64,
    /// Assert `fraction(check_period) >= check_fraction` when both are set.
    pub check_period: Option<u64>,
    pub check_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationsConfig {
    /// Explicit horizons. Exactly one of `horizons`, `max_power`
    /// (`1, 2, 4, …, 2^max_power`) and `linear` (`1, 2, …, linear`) is set.
    pub horizons: Option<Vec<u64>>,
    pub max_power: Option<u32>,
    pub linear: Option<u64>,
    /// Multiply every horizon by the towerized map's common period.
    #[serde(default)]
    pub period_multiples: bool,
    pub scheme: SchemeKind,
    /// Grid level for the full-grid scheme and the Lipschitz norms.
    pub level: u32,
    pub p_list: Vec<f64>,
    /// Second observable; defaults to the first.
    pub psi: Option<ObservableConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionScheme {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    pub dim: usize,
    pub level: u32,
    pub scheme: DimensionScheme,
    pub y: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorelCantelliConfig {
    pub y: Vec<f64>,
    pub beta: f64,
    pub m: u64,
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDistanceConfig {
    pub other: SystemConfig,
    #[serde(default)]
    pub boxes: Vec<f64>,
    pub samples_per_box: usize,
}
