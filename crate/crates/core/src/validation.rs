//! Randomized interventional validation of graph edges.
//!
//! For an edge `X_i -> X_j`, each of `N` units flips a fair coin, waits a
//! random `Δt ~ U[1 ms, 1 s]`, intervenes on every manipulable variable
//! except `X_j` (arm A or B differ only in `X_i`), waits `T`, and records
//! `X_j`. A two-sample KS test on the two arms rejects "no effect" when
//! `p <= alpha`. With a fixed seed the whole procedure is reproducible.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::engine::{Engine, EngineError, Fidelity};
use crate::graph::{Edge, GroundTruthGraph};
use crate::params::Params;
use crate::rng::{derive_seed, substream};
use crate::stats::{ks_two_sample, KsResult, StatsError};
use crate::variables::{Chamber, ColumnType, Config, VariableKind};

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("N must be at least 2, got {0}")]
    TooFewSamples(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("T must be finite and >= 0, got {0}")]
    BadWait(f64),
    #[error("x_A and x_B must differ in {0}")]
    SameArms(String),
    #[error("{edge}: {message}")]
    BadEdge { edge: Edge, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// The lowest and highest random delay before each unit, s.
pub const DELAY_RANGE: (f64, f64) = (1e-3, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSpec {
    pub edge: Edge,
    /// Values of every other intervened variable, shared by both arms.
    pub base: Vec<(String, f64)>,
    pub x_a: f64,
    pub x_b: f64,
    /// Wait after each intervention, s.
    pub t: f64,
    pub n: usize,
    pub alpha: f64,
}

impl ValidationSpec {
    pub fn check(&self) -> Result<(), ValidationError> {
        if self.n < 2 {
            return Err(ValidationError::TooFewSamples(self.n));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ValidationError::BadAlpha(self.alpha));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(ValidationError::BadWait(self.t));
        }
        if self.x_a == self.x_b {
            return Err(ValidationError::SameArms(self.edge.from.clone()));
        }
        Ok(())
    }

    /// Full assignment of an arm: the base values plus `X_i`.
    pub fn assignment(&self, arm_b: bool) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> = self.base.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        out.push((&self.edge.from, if arm_b { self.x_b } else { self.x_a }));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Tested { ks: KsResult, rejected: bool },
    /// Every coin landed on the same arm, so there is nothing to compare.
    Underpowered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationResult {
    pub samples_a: Vec<f64>,
    pub samples_b: Vec<f64>,
    pub outcome: Outcome,
}

impl ValidationResult {
    pub fn rejected(&self) -> bool {
        matches!(self.outcome, Outcome::Tested { rejected: true, .. })
    }

    pub fn ks(&self) -> Option<KsResult> {
        match self.outcome {
            Outcome::Tested { ks, .. } => Some(ks),
            Outcome::Underpowered => None,
        }
    }
}

/// Check that an edge can be tested in the engine's configuration.
fn check_edge(config: Config, edge: &Edge) -> Result<(), ValidationError> {
    let bad = |message: String| ValidationError::BadEdge { edge: edge.clone(), message };
    let from = config.variable(&edge.from).map_err(|e| bad(e.to_string()))?;
    config.variable(&edge.to).map_err(|e| bad(e.to_string()))?;
    if edge.from == edge.to {
        return Err(bad("source and target are the same variable".into()));
    }
    if from.is_sensor() && !(config == Config::WtPressureControl && from.id == "pressure_downwind") {
        return Err(bad(format!("{} is a sensor and cannot be intervened on", from.id)));
    }
    Ok(())
}

/// Run the procedure for one edge on `engine`, drawing coins and delays
/// from `rng`.
pub fn validate_edge<R: Rng + ?Sized>(
    spec: &ValidationSpec,
    engine: &mut Engine,
    rng: &mut R,
) -> Result<ValidationResult, ValidationError> {
    spec.check()?;
    check_edge(engine.config(), &spec.edge)?;
    let source_is_sensor = engine.config().variable(&spec.edge.from).map(|v| v.is_sensor()).unwrap_or(false);
    let target_is_image =
        engine.config().variable(&spec.edge.to).is_ok_and(|v| v.column_type == ColumnType::Image);
    let (mut samples_a, mut samples_b) = (Vec::new(), Vec::new());
    for _ in 0..spec.n {
        let arm_b: bool = rng.random_bool(0.5);
        let delay = rng.random_range(DELAY_RANGE.0..=DELAY_RANGE.1);
        engine.wait(delay)?;
        let x = if arm_b { spec.x_b } else { spec.x_a };
        let base: Vec<(&str, f64)> = spec.base.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        engine.intervene(&base)?;
        if source_is_sensor {
            engine.override_sensor(&spec.edge.from, x)?;
        } else {
            engine.set(&spec.edge.from, x)?;
        }
        engine.wait(spec.t)?;
        let row = engine.measure()?;
        // Images are compared through their average pixel value.
        let y = match &row.image {
            Some(image) if target_is_image => image.mean().iter().sum::<f64>() / 3.0,
            _ => engine.value(&spec.edge.to)?,
        };
        if arm_b { samples_b.push(y) } else { samples_a.push(y) }
    }
    let outcome = if samples_a.is_empty() || samples_b.is_empty() {
        Outcome::Underpowered
    } else {
        let ks = ks_two_sample(&samples_a, &samples_b)?;
        Outcome::Tested { ks, rejected: ks.p_value <= spec.alpha }
    };
    Ok(ValidationResult { samples_a, samples_b, outcome })
}

/// Settings shared by every edge of a validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub n: usize,
    pub alpha: f64,
    pub t: f64,
    pub fidelity: Fidelity,
    pub seed: u64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { n: 100, alpha: 0.01, t: 10.0, fidelity: Fidelity::SteadyState, seed: 0 }
    }
}

/// Shared values of the manipulable variables during validation. Fan
/// loads are unequal and the hatch half open so that each of them has a
/// visible effect on the tunnel pressures; the light source is dim enough
/// for the LEDs and polarizers to matter.
pub fn base_point(config: Config) -> Vec<(&'static str, f64)> {
    let overrides: &[(&str, f64)] = match config.chamber() {
        Chamber::LightTunnel => &[("red", 64.0), ("green", 64.0), ("blue", 64.0)],
        Chamber::WindTunnel => {
            &[("load_in", 0.8), ("load_out", 0.4), ("hatch", 22.5), ("pot_1", 128.0), ("pot_2", 128.0)]
        }
    };
    config
        .variables()
        .filter(|v| v.kind.is_manipulable())
        .map(|v| (v.id, overrides.iter().find(|(k, _)| *k == v.id).map_or(v.default, |(_, x)| *x)))
        .collect()
}

/// Pressure target used by the controller during validation.
pub fn validation_target(params: &Params) -> f64 {
    params.pid.target.unwrap_or(params.pressure.p_amb + 10.0)
}

/// Arm values for an intervened variable: the ends of its range, with
/// three exceptions. The polarizers' effect repeats every 180 degrees, so
/// they use 0 and 90. Fan loads start at the lowest load that turns the
/// fan, since an unpowered fan gives no tachometer reading. The
/// controller's pressure input is pushed 20 Pa either side of the target.
pub fn default_contrast(config: Config, source: &str, params: &Params) -> Result<(f64, f64), ValidationError> {
    let var = config.variable(source).map_err(|e| ValidationError::BadEdge {
        edge: Edge::new(source, "?"),
        message: e.to_string(),
    })?;
    if source == "pol_1" || source == "pol_2" {
        return Ok((0.0, 90.0));
    }
    if source == "load_in" || source == "load_out" {
        return Ok((params.fan.l_min, 1.0));
    }
    if var.kind == VariableKind::Sensor {
        let t = validation_target(params);
        return Ok((t - 20.0, t + 20.0));
    }
    Ok(var.range.bounds())
}

/// Build the spec for an edge with the default base point and contrast.
pub fn default_spec(
    config: Config,
    edge: &Edge,
    params: &Params,
    opts: &ValidationOptions,
) -> Result<ValidationSpec, ValidationError> {
    check_edge(config, edge)?;
    let (x_a, x_b) = default_contrast(config, &edge.from, params)?;
    let base = base_point(config)
        .into_iter()
        .filter(|(k, _)| *k != edge.from && *k != edge.to)
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    Ok(ValidationSpec { edge: edge.clone(), base, x_a, x_b, t: opts.t, n: opts.n, alpha: opts.alpha })
}

/// Fresh engine for one edge, already at the base point.
pub fn engine_for_spec(
    config: Config,
    spec: &ValidationSpec,
    params: &Params,
    fidelity: Fidelity,
    seed: u64,
) -> Result<Engine, ValidationError> {
    let mut params = params.clone();
    if config == Config::WtPressureControl {
        params.pid.target = Some(validation_target(&params));
    }
    let mut engine = Engine::new(config, params, fidelity, seed)?;
    let base: Vec<(&str, f64)> = spec.base.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    engine.intervene(&base)?;
    // Let the fans reach the base point before the first unit.
    engine.wait(spec.t)?;
    engine.measure()?;
    Ok(engine)
}

/// Run one spec with engine and coin streams derived from `seed`, the edge
/// and `run`.
pub fn run_spec(
    config: Config,
    spec: &ValidationSpec,
    params: &Params,
    fidelity: Fidelity,
    seed: u64,
    run: u64,
) -> Result<ValidationResult, ValidationError> {
    let key = format!("validate:{}", spec.edge);
    let mut engine = engine_for_spec(config, spec, params, fidelity, derive_seed(seed, &key, run))?;
    let mut rng = substream(seed, &format!("{key}:coins"), run);
    validate_edge(spec, &mut engine, &mut rng)
}

/// One line of a validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub spec: ValidationSpec,
    pub result: ValidationResult,
    /// The ambient pressure drifted during the run, so repeated units are
    /// not identically distributed.
    pub drift: bool,
}

pub const REPORT_HEADER: &str = "edge,x_A,x_B,T,N,alpha,D,p,rejected,drift";

impl fmt::Display for ReportRow {
    /// CSV line without newline. Underpowered runs leave `D` and `p` empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.spec;
        write!(f, "{}->{},{},{},{},{},{},", s.edge.from, s.edge.to, s.x_a, s.x_b, s.t, s.n, s.alpha)?;
        match self.result.outcome {
            Outcome::Tested { ks, rejected } => write!(f, "{},{},{}", ks.statistic, ks.p_value, rejected)?,
            Outcome::Underpowered => write!(f, ",,underpowered")?,
        }
        write!(f, ",{}", self.drift)
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Validate every spec (sorted by edge) and collect the report.
pub fn validate_specs(
    config: Config,
    mut specs: Vec<ValidationSpec>,
    params: &Params,
    opts: &ValidationOptions,
) -> Result<Vec<ReportRow>, ValidationError> {
    specs.sort_by(|a, b| a.edge.cmp(&b.edge));
    let drift = params.ambient_drift > 0.0 && config.chamber() == Chamber::WindTunnel;
    specs
        .into_iter()
        .map(|spec| {
            let result = run_spec(config, &spec, params, opts.fidelity, opts.seed, 0)?;
            Ok(ReportRow { spec, result, drift })
        })
        .collect()
}

/// Validate every ground-truth edge of a configuration.
pub fn validate_all(config: Config, params: &Params, opts: &ValidationOptions) -> Result<Vec<ReportRow>, ValidationError> {
    let graph = GroundTruthGraph::for_config(config);
    let specs = graph.edges().map(|e| default_spec(config, e, params, opts)).collect::<Result<_, _>>()?;
    validate_specs(config, specs, params, opts)
}

/// Pairs with no directed path between them, used to check the level of
/// the procedure.
pub fn null_pairs(chamber: Chamber) -> &'static [(&'static str, &'static str)] {
    match chamber {
        Chamber::WindTunnel => &[
            ("pot_2", "signal_1"),
            ("pot_2", "pressure_downwind"),
            ("hatch", "current_in"),
            ("res_in", "current_in"),
            ("v_in", "rpm_in"),
        ],
        Chamber::LightTunnel => &[("pol_1", "ir_1"), ("l_11", "ir_2"), ("red", "angle_1"), ("osr_c", "ir_1")],
    }
}

/// Rejection rate over `runs` independent null tests, cycling through
/// [`null_pairs`] for the chamber of `config`.
pub fn level_check(
    config: Config,
    params: &Params,
    opts: &ValidationOptions,
    runs: u64,
) -> Result<f64, ValidationError> {
    let pairs = null_pairs(config.chamber());
    let graph = GroundTruthGraph::for_config(config);
    let mut rejections = 0u64;
    for run in 0..runs {
        let (from, to) = pairs[(run % pairs.len() as u64) as usize];
        debug_assert!(!graph.has_edge(from, to));
        let spec = default_spec(config, &Edge::new(from, to), params, opts)?;
        if run_spec(config, &spec, params, opts.fidelity, opts.seed, run)?.rejected() {
            rejections += 1;
        }
    }
    Ok(rejections as f64 / runs as f64)
}

/// Upper bound on the rejection rate of a level-`alpha` test over `runs`
/// runs: three binomial standard deviations above `alpha`.
pub fn level_bound(alpha: f64, runs: u64) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / runs as f64).sqrt()
}
