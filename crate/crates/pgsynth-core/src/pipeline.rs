//! The end-to-end run: parse, expand, build, solve, synthesize and validate.

use std::fmt;
use std::time::Instant;

use crate::buchi::{build_game_partial, solve_buchi, Approach, BuildOptions, BuildStats};
use crate::dot::{game_dot, strategy_dot};
use crate::error::{Error, ErrorClass};
use crate::model::parse_model;
use crate::occurrence::{validate_strategy, StrategyReport};
use crate::strategy::{synthesize, LassoPolicy, SynthesisLimits};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Parse,
    Expand,
    Build,
    Solve,
    Synthesize,
    Validate,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Expand => "expand",
            Stage::Build => "build",
            Stage::Solve => "solve",
            Stage::Synthesize => "synthesize",
            Stage::Validate => "validate",
        }
    }
}

/// An error with the stage it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
    /// Statistics gathered before a build failure.
    pub partial: Option<Box<BuildStats>>,
}

impl StageError {
    pub fn class(&self) -> ErrorClass {
        self.error.class()
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage.name(), self.error)
    }
}

impl std::error::Error for StageError {}

trait Tag<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> Tag<T> for Result<T, Error> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error, partial: None })
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    /// Name reported in the statistics; models carry none themselves.
    pub name: String,
    pub approach: Approach,
    pub build: BuildOptions,
    /// Solve the game; without it only the graph is built.
    pub solve: bool,
    /// Generate and validate a strategy when realizable.
    pub synthesize: bool,
    pub limits: SynthesisLimits,
    pub game_dot: bool,
    /// Bound on reachable cuts explored by the validator.
    pub validation_bound: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            name: "model".into(),
            approach: Approach::Canonical,
            build: BuildOptions::default(),
            solve: true,
            synthesize: false,
            limits: SynthesisLimits::default(),
            game_dot: false,
            validation_bound: 1_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct StrategyOutput {
    pub places: usize,
    pub transitions: usize,
    pub tree_nodes: usize,
    pub lassos: usize,
    /// How the finite prefix ends branches that revisit a node.
    pub lasso_policy: String,
    pub report: StrategyReport,
    pub dot: String,
    /// Cut place names per tree node.
    pub cuts: Vec<Vec<Vec<String>>>,
    pub synth_ms: u64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub stats: BuildStats,
    pub warnings: Vec<String>,
    pub game_dot: Option<String>,
    pub strategy: Option<StrategyOutput>,
}

/// Runs the pipeline on model text.
pub fn run_pipeline(text: &str, opts: &PipelineOptions) -> Result<PipelineOutput, StageError> {
    let mut hl = parse_model(text).at(Stage::Parse)?;
    hl.name = opts.name.clone();
    let game = hl.expand().at(Stage::Expand)?;
    let (g, mut stats) = match build_game_partial(&game, opts.approach, &opts.build) {
        (Ok(g), stats) => (g, stats),
        (Err(error), stats) => return Err(StageError { stage: Stage::Build, error, partial: Some(Box::new(stats)) }),
    };
    let mut out = PipelineOutput {
        stats: BuildStats::default(),
        warnings: g.warnings.clone(),
        game_dot: opts.game_dot.then(|| game_dot(&g, &game)),
        strategy: None,
    };
    if opts.solve || opts.synthesize {
        let t = Instant::now();
        let sol = solve_buchi(&g).at(Stage::Solve)?;
        stats.solve_ms = t.elapsed().as_millis() as u64;
        stats.realizable = Some(sol.realizable);
        if opts.synthesize && sol.realizable {
            let t = Instant::now();
            let s = synthesize(&game, &g, &sol, &opts.limits).at(Stage::Synthesize)?;
            let synth_ms = t.elapsed().as_millis() as u64;
            let report = validate_strategy(&s.net, &game, opts.validation_bound).at(Stage::Validate)?;
            if !report.all_pass() {
                return Err(Error::InvalidStrategy(report.violations.join("; "))).at(Stage::Validate);
            }
            out.strategy = Some(StrategyOutput {
                places: s.net.places.len(),
                transitions: s.net.transitions.len(),
                tree_nodes: s.tree.nodes.len(),
                lassos: s.tree.lassos(),
                lasso_policy: match opts.limits.lasso {
                    LassoPolicy::Stop => "stop".into(),
                    LassoPolicy::UnrollToDepth(k) => format!("unroll-to-depth {k}"),
                },
                report,
                dot: strategy_dot(&s.net, &game),
                cuts: s.cut_report(),
                synth_ms,
            });
        }
    }
    out.stats = stats;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::cs_model_text;

    #[test]
    fn full_run_on_two_computers() {
        let opts = PipelineOptions { synthesize: true, game_dot: true, ..Default::default() };
        let out = run_pipeline(&cs_model_text(2), &opts).unwrap();
        assert_eq!(out.stats.realizable, Some(true));
        assert_eq!(out.stats.model, "model");
        let s = out.strategy.unwrap();
        assert!(s.report.all_pass());
        assert!(out.game_dot.unwrap().starts_with("digraph game"));
    }

    #[test]
    fn stats_only_without_synthesis() {
        let out = run_pipeline(&cs_model_text(1), &PipelineOptions::default()).unwrap();
        assert!(out.strategy.is_none());
        assert_eq!(out.stats.realizable, Some(true));
        let built = run_pipeline(&cs_model_text(1), &PipelineOptions { solve: false, ..Default::default() }).unwrap();
        assert_eq!(built.stats.realizable, None);
    }

    #[test]
    fn errors_carry_their_stage() {
        let e = run_pipeline("class C = a b ;\nplace P kind=sys type=D ;", &PipelineOptions::default()).unwrap_err();
        assert_eq!(e.stage, Stage::Parse);
        assert_eq!(e.class(), ErrorClass::Input);
        let tiny = PipelineOptions { build: BuildOptions { max_nodes: 2, ..Default::default() }, ..Default::default() };
        let e = run_pipeline(&cs_model_text(2), &tiny).unwrap_err();
        assert_eq!(e.stage, Stage::Build);
        assert_eq!(e.class(), ErrorClass::Budget);
        assert!(e.to_string().starts_with("build: bound exceeded"));
        assert!(e.partial.unwrap().num_nodes > 2);
    }
}
