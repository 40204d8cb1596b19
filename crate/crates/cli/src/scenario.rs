//! Scenario files and the tick loop that runs them.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use amrt_core::adm::{self, AdaptationModel, Diagnostic, LoadError};
use amrt_core::engine::{Engine, EngineError, EngineKind, EngineMode, GateOutcome, PlannerConfig, StepItem};
use amrt_core::model::{validate_conformance, ModelError, ReflectionModel};
use amrt_core::objectives::utility;
use amrt_core::sim::{self, SimSystem, SyncError, SystemDoc, WorkloadSchedule};
use amrt_core::{Metamodel, Utility};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Scenario JSON. Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub metamodel: PathBuf,
    pub initial_system: SystemDoc,
    #[serde(default)]
    pub workload_schedule: WorkloadSchedule,
    pub adm_files: Vec<PathBuf>,
    #[serde(default = "default_mode")]
    pub engine_mode: String,
    pub ticks: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub planner_config: PlannerConfig,
    #[serde(default)]
    pub hot_swap_directives: Vec<HotSwapDirective>,
}

fn default_mode() -> String {
    "both".into()
}

/// Stages the bundle compiled from `admFiles` at the end of `tick`; it
/// becomes active at the start of the next tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct HotSwapDirective {
    pub tick: u64,
    pub adm_files: Vec<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub engine_mode: Option<String>,
    pub ticks: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{0}`: {1}")]
    Io(String, std::io::Error),
    #[error("invalid scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schemaVersion {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("{0}")]
    Invalid(String),
    #[error("invalid metamodel: {0}")]
    Metamodel(ModelError),
    #[error("adaptation model has errors:\n{}", render(.0))]
    Adm(Vec<Diagnostic>),
}

fn render(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("consistency violated at tick {tick}: {detail}")]
    Conformance { tick: u64, detail: String },
    #[error("engine failure at tick {tick}: {source}")]
    Engine { tick: u64, source: EngineError },
    #[error("causal connection failed at tick {tick}: {source}")]
    Sync { tick: u64, source: SyncError },
    #[error("cannot write trace: {0}")]
    Trace(std::io::Error),
}

impl RunError {
    /// 2 for configuration problems, 3 for aborts during the run.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// A scenario with every referenced file loaded and checked.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub mode: EngineMode,
    pub metamodel: Arc<Metamodel>,
    pub bundle: AdaptationModel,
    /// Compiled bundles for each hot-swap directive, in directive order.
    pub swaps: Vec<(u64, AdaptationModel)>,
    pub warnings: Vec<Diagnostic>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))
}

fn compile(base: &Path, files: &[PathBuf], mm: &Metamodel) -> Result<(AdaptationModel, Vec<Diagnostic>), ConfigError> {
    let paths: Vec<PathBuf> = files.iter().map(|f| base.join(f)).collect();
    adm::load_files(&paths, mm).map_err(|e| match e {
        LoadError::Io(p, e) => ConfigError::Io(p, e),
        LoadError::Invalid(d) => ConfigError::Adm(d),
    })
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = serde_json::from_str(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::from_config(config, base, overrides)
    }

    pub fn from_config(mut config: ScenarioConfig, base: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        if config.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(config.schema_version));
        }
        if let Some(m) = &overrides.engine_mode {
            config.engine_mode = m.clone();
        }
        if let Some(t) = overrides.ticks {
            config.ticks = t;
        }
        if let Some(s) = overrides.seed {
            config.seed = s;
        }
        if config.ticks == 0 {
            return Err(ConfigError::Invalid("ticks must be at least 1".into()));
        }
        let mode = EngineMode::parse(&config.engine_mode)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown engine mode `{}`", config.engine_mode)))?;
        config
            .planner_config
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let metamodel =
            Arc::new(Metamodel::from_json(&read(&base.join(&config.metamodel))?).map_err(ConfigError::Metamodel)?);
        SimSystem::new(&config.initial_system, config.seed).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (bundle, mut warnings) = compile(base, &config.adm_files, &metamodel)?;
        let mut swaps = Vec::new();
        for d in &config.hot_swap_directives {
            let (b, mut w) = compile(base, &d.adm_files, &metamodel)?;
            warnings.append(&mut w);
            swaps.push((d.tick, b));
        }
        Ok(Scenario {
            config,
            mode,
            metamodel,
            bundle,
            swaps,
            warnings,
        })
    }
}

/// End-of-run figures, also written as the trace's `summary` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub ticks: u64,
    pub final_utility: Utility,
    pub final_availability: f64,
    /// Decisions whose gate passed and whose commands ran.
    pub adaptations: usize,
    pub failed_decisions: usize,
    /// Mean ticks from event to coupled repair; `None` without coupled
    /// adaptations.
    pub mean_coupled_latency: Option<f64>,
    pub swaps: usize,
}

/// One JSONL trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub kind: String,
    pub payload: serde_json::Value,
}

fn emit(out: &mut dyn Write, tick: u64, kind: &str, payload: serde_json::Value) -> Result<(), RunError> {
    let rec = TraceRecord {
        tick,
        kind: kind.into(),
        payload,
    };
    let line = serde_json::to_string(&rec).expect("trace records serialize");
    writeln!(out, "{line}").map_err(RunError::Trace)
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("trace payloads serialize")
}

fn check_consistency(model: &ReflectionModel, mm: &Metamodel, tick: u64) -> Result<(), RunError> {
    let v = validate_conformance(model, mm);
    if v.is_empty() {
        Ok(())
    } else {
        Err(RunError::Conformance {
            tick,
            detail: format!("{v:?}"),
        })
    }
}

/// Runs the scenario, writing the trace to `out`.
///
/// Each tick: the system advances, the monitor syncs the model, staged
/// swaps take effect, and the scheduled engines run. Hot-swap directives
/// for a tick are staged after its engines finish.
pub fn run_scenario(s: &Scenario, out: &mut dyn Write) -> Result<Summary, RunError> {
    let cfg = &s.config;
    let mut sys = SimSystem::new(&cfg.initial_system, cfg.seed).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut model = sim::project(&sys, Arc::clone(&s.metamodel)).map_err(ConfigError::Metamodel)?;
    let mut engine = Engine::new(s.bundle.clone(), Arc::clone(&s.metamodel), cfg.planner_config, s.mode)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut swaps = 0;
    check_consistency(&model, &s.metamodel, 0)?;

    for _ in 0..cfg.ticks {
        sys.tick(&cfg.workload_schedule);
        let tick = sys.clock();
        let events = sim::monitor_sync(&mut sys, &mut model).map_err(|source| RunError::Sync { tick, source })?;
        for e in &events {
            emit(out, tick, "event", to_value(e))?;
        }
        let items = engine
            .step(tick, &mut model, &mut sys, &events)
            .map_err(|source| RunError::Engine { tick, source })?;
        for item in items {
            match item {
                StepItem::Swap { name } => {
                    swaps += 1;
                    emit(out, tick, "swap", json!({ "status": "applied", "bundle": name }))?;
                }
                StepItem::Evaluation { engine, sweep, result } => emit(
                    out,
                    tick,
                    "evaluation",
                    json!({ "engine": engine, "sweep": sweep, "result": to_value(&result) }),
                )?,
                StepItem::Decision(d) => emit(out, tick, "decision", to_value(&d))?,
                StepItem::Event(e) => emit(out, tick, "event", to_value(&e))?,
            }
        }
        check_consistency(&model, &s.metamodel, tick)?;
        for (d, (at, bundle)) in cfg.hot_swap_directives.iter().zip(&s.swaps) {
            if *at == tick {
                engine
                    .hot_swap(bundle.clone())
                    .map_err(|source| RunError::Engine { tick, source })?;
                let files: Vec<String> = d.adm_files.iter().map(|f| f.display().to_string()).collect();
                emit(
                    out,
                    tick,
                    "swap",
                    json!({ "status": "staged", "bundle": bundle.name, "admFiles": files }),
                )?;
            }
        }
    }

    let bundle = engine.bundle();
    let final_utility: Utility =
        utility(&model, &bundle.qualities, &bundle.preferences).map_err(|e| RunError::Engine {
            tick: sys.clock(),
            source: EngineError::from(e),
        })?;
    let history = engine.history();
    let adaptations = history.iter().filter(|d| d.gate_outcome.passed()).count();
    let failed_decisions = history
        .iter()
        .filter(|d| !matches!(d.gate_outcome, GateOutcome::Passed | GateOutcome::Empty))
        .count();
    let latencies: Vec<u64> = history
        .iter()
        .filter(|d| d.engine == EngineKind::Coupled && d.gate_outcome.passed())
        .filter_map(|d| d.reaction_latency)
        .collect();
    let mean_coupled_latency =
        (!latencies.is_empty()).then(|| latencies.iter().sum::<u64>() as f64 / latencies.len() as f64);
    let summary = Summary {
        ticks: cfg.ticks,
        final_utility,
        final_availability: sys.availability(),
        adaptations,
        failed_decisions,
        mean_coupled_latency,
        swaps,
    };
    emit(out, sys.clock(), "summary", to_value(&summary))?;
    Ok(summary)
}
