//! JSON types shared by the pgsynth server, client and CLI.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pgsynth_core::buchi::BuildStats;
use pgsynth_core::occurrence::StrategyReport;
use pgsynth_core::pipeline::{StageError, StrategyOutput};
use pgsynth_core::ErrorClass;

pub const HEALTH: &str = "/v1/health";
pub const GEN_CS: &str = "/v1/gen/cs";
pub const BUILD: &str = "/v1/build";
pub const SOLVE: &str = "/v1/solve";

/// Names accepted in the `approach` field.
pub const APPROACHES: [&str; 3] = ["explicit", "membership", "canonical"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenCsRequest {
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenCsResponse {
    pub model: String,
}

/// Body of both `/v1/build` and `/v1/solve`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRequest {
    pub model: String,
    /// Name reported in the statistics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub approach: String,
    /// Node budget of the game construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
    #[serde(default)]
    pub game_dot: bool,
    /// Generate and validate a strategy when realizable; ignored by `/v1/build`.
    #[serde(default)]
    pub synthesize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    /// Bound on strategy tree nodes and on strategy places plus transitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_strategy_nodes: Option<usize>,
}

/// The stats JSON object.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub model: String,
    pub approach: String,
    pub num_nodes: u64,
    pub num_edges: u64,
    pub num_accepting: u64,
    pub num_symmetries: u128,
    pub comparisons: u64,
    pub orderings_enumerated: u64,
    pub build_ms: u64,
    pub solve_ms: u64,
    pub realizable: Option<bool>,
}

impl From<&BuildStats> for Stats {
    fn from(s: &BuildStats) -> Self {
        Stats {
            model: s.model.clone(),
            approach: s.approach.clone(),
            num_nodes: s.num_nodes,
            num_edges: s.num_edges,
            num_accepting: s.num_accepting,
            num_symmetries: s.num_symmetries,
            comparisons: s.comparisons,
            orderings_enumerated: s.orderings_enumerated,
            build_ms: s.build_ms,
            solve_ms: s.solve_ms,
            realizable: s.realizable,
        }
    }
}

impl Stats {
    /// Copy with the timing fields zeroed, for comparisons across runs.
    pub fn without_timing(&self) -> Stats {
        Stats { build_ms: 0, solve_ms: 0, ..self.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub structural: bool,
    pub justified_refusal: bool,
    pub determinism: bool,
    pub deadlock_free: bool,
    pub winning: bool,
    pub cuts_checked: usize,
    pub violations: Vec<String>,
}

impl From<&StrategyReport> for Validation {
    fn from(r: &StrategyReport) -> Self {
        Validation {
            structural: r.structural,
            justified_refusal: r.justified_refusal,
            determinism: r.determinism,
            deadlock_free: r.deadlock_free,
            winning: r.winning,
            cuts_checked: r.cuts_checked,
            violations: r.violations.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub places: usize,
    pub transitions: usize,
    pub tree_nodes: usize,
    /// Branches cut off at a revisited node; the prefix is incomplete when nonzero.
    pub lassos: usize,
    pub lasso_policy: String,
    pub validation: Validation,
    pub dot: String,
    /// Cut place names per strategy tree node.
    pub cuts: Vec<Vec<Vec<String>>>,
    pub synth_ms: u64,
}

impl From<&StrategyOutput> for Strategy {
    fn from(s: &StrategyOutput) -> Self {
        Strategy {
            places: s.places,
            transitions: s.transitions,
            tree_nodes: s.tree_nodes,
            lassos: s.lassos,
            lasso_policy: s.lasso_policy.clone(),
            validation: (&s.report).into(),
            dot: s.dot.clone(),
            cuts: s.cuts.clone(),
            synth_ms: s.synth_ms,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResponse {
    pub stats: Stats,
    pub model_hash: String,
    pub max_orderings_per_node: u64,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_dot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Input,
    Budget,
    Internal,
}

impl From<ErrorClass> for ErrorKind {
    fn from(c: ErrorClass) -> Self {
        match c {
            ErrorClass::Input => ErrorKind::Input,
            ErrorClass::Budget => ErrorKind::Budget,
            ErrorClass::Internal => ErrorKind::Internal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: ErrorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub message: String,
    /// Statistics gathered before a budget ran out.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partial_stats: Option<Box<Stats>>,
}

impl ErrorBody {
    pub fn input(message: impl Into<String>) -> Self {
        ErrorBody { kind: ErrorKind::Input, stage: None, message: message.into(), partial_stats: None }
    }
}

impl From<&StageError> for ErrorBody {
    fn from(e: &StageError) -> Self {
        ErrorBody {
            kind: e.class().into(),
            stage: Some(e.stage.name().into()),
            message: e.to_string(),
            partial_stats: e.partial.as_deref().map(|s| Box::new(Stats::from(s))),
        }
    }
}

impl std::fmt::Display for ErrorBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Hex SHA-256 of the model text, first 16 digits.
pub fn model_hash(text: &str) -> String {
    let d = Sha256::digest(text.as_bytes());
    d.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// One cell of a bench matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchCell {
    pub approach: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<Stats>,
    pub timeout: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub file: String,
    pub model_hash: String,
    pub cells: Vec<BenchCell>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub timeout_s: f64,
    pub approaches: Vec<String>,
    pub rows: Vec<BenchRow>,
}
