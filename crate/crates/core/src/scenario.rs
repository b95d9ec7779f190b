//! Scenario files: a JSON description of one system, one experiment and its
//! parameters, plus the checks that turn it into ready-to-run objects.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays; a block-diagonal element is a list of such matrices, one per block.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{is_projection, tracial_state, AlgebraElement, BlockAlgebra, LinearFunctional, PROJECTION_TOL};
use crate::classical::{embed_diagonal, ClassicalSystem, EmbeddedSystem, Subset, MEASURE_TOL};
use crate::dynamics::{BoundedQuantumSystem, Endomorphism, StarHomomorphism};
use crate::matrix::{spectral_projection, ComplexMatrix, Interval};

pub const SCHEMA_VERSION: u32 = 1;

/// Built-in tolerance for invariant checks; `VNRECUR_TOL` and `--tol`
/// override it.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Demo scenarios compiled into the binary.
pub const BUNDLED: &[(&str, &str)] = &[
    ("two-level", include_str!("../scenarios/two-level.json")),
    ("cycle4", include_str!("../scenarios/cycle4.json")),
    ("cycle5-khintchine", include_str!("../scenarios/cycle5-khintchine.json")),
    ("prop31-pair", include_str!("../scenarios/prop31-pair.json")),
    ("gns-trace-m2", include_str!("../scenarios/gns-trace-m2.json")),
    ("luders-m2", include_str!("../scenarios/luders-m2.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub type Blocks = Vec<Vec<Vec<Complex64>>>;

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub system: SystemSpec,
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSpec {
    Quantum(QuantumSpec),
    Classical(ClassicalSpec),
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSpec {
    pub block_dims: Vec<usize>,
    /// Defaults to `n_k² / Σ n_j²`.
    #[serde(default)]
    pub block_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub hamiltonian: Option<Blocks>,
    /// Discrete dynamics; without it the Hamiltonian flow sampled at
    /// `params.t_step` is used, and without both the identity.
    #[serde(default)]
    pub endomorphism: Option<EndomorphismSpec>,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    #[serde(default)]
    pub state: StateSpec,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EndomorphismSpec {
    pub permutation: Vec<usize>,
    /// Defaults to the identity.
    #[serde(default)]
    pub unitary: Option<Blocks>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSpec {
    Matrix(Blocks),
    /// Spectral projection of a Hermitian observable onto `[lo, hi]`.
    Spectral {
        observable: Blocks,
        interval: [f64; 2],
    },
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpec {
    #[default]
    Trace,
    Vector {
        block: usize,
        psi: Vec<Complex64>,
    },
    /// Density in the normalized-trace convention: `φ(A) = tr(ρA)`.
    Density(Blocks),
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    pub weights: Vec<f64>,
    pub map: Vec<usize>,
    #[serde(default)]
    pub subset: Option<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Liouville,
    Recurrence,
    Khintchine,
    Continuous,
    Moments,
    GnsVerify,
    Prop31,
    LudersDemo,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Liouville => "liouville",
            Self::Recurrence => "recurrence",
            Self::Khintchine => "khintchine",
            Self::Continuous => "continuous",
            Self::Moments => "moments",
            Self::GnsVerify => "gns-verify",
            Self::Prop31 => "prop31",
            Self::LudersDemo => "luders-demo",
        }
    }
}

/// Uniform grid `start, …, stop` with `points` samples.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TimeGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let h = (self.stop - self.start) / (n - 1) as f64;
                (0..n).map(|i| self.start + h * i as f64).collect()
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default)]
    pub seed: u64,
    pub k_max: Option<usize>,
    pub t_step: Option<f64>,
    pub epsilon: Option<f64>,
    /// Positivity threshold for "> 0" tests.
    pub threshold: Option<f64>,
    pub n_max: Option<usize>,
    pub t_grid: Option<TimeGrid>,
    /// Explicit sample times (Liouville check).
    pub times: Option<Vec<f64>>,
    /// Random samples for sampled checks.
    pub samples: Option<usize>,
    /// Number of recurrence moments.
    pub count: Option<usize>,
}

/// Problems that stop a scenario from running.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) | Self::Invalid(_) => 2,
            Self::Invariant(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Library errors raised while running: input problems are validation
/// errors, everything else is a numerical invariant failure.
impl From<crate::Error> for ScenarioError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::NotSquare { .. }
            | E::NotHermitian { .. }
            | E::ShapeMismatch(_)
            | E::InvalidInput(_)
            | E::NotProjection { .. }
            | E::HypothesisFailed(_)
            | E::ZeroProbability { .. }
            | E::NotMeasurePreserving { .. }
            | E::NullSet
            | E::NotAState(_)
            | E::SubInvarianceViolated { .. }
            | E::ContractivityViolated { .. }
            | E::NotFactor { .. } => Self::Invalid(vec![e.to_string()]),
            _ => Self::Invariant(e.to_string()),
        }
    }
}

pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
}

/// A parsed scenario with every object constructed and checked.
pub struct Prepared {
    pub scenario: Scenario,
    pub system: PreparedSystem,
}

pub enum PreparedSystem {
    Quantum(PreparedQuantum),
    Classical(PreparedClassical),
}

pub struct PreparedQuantum {
    pub algebra: BlockAlgebra,
    pub state: LinearFunctional,
    pub hamiltonian: Option<BoundedQuantumSystem>,
    /// Discrete dynamics: explicit, sampled flow, or `None`.
    pub dynamics: Option<Endomorphism>,
    pub projection: Option<AlgebraElement>,
}

pub struct PreparedClassical {
    pub system: ClassicalSystem,
    pub subset: Option<Subset>,
    /// Present when the system is measure preserving.
    pub embedded: Option<EmbeddedSystem>,
}

impl PreparedQuantum {
    /// Dynamics for discrete scans; the identity when none is given.
    pub fn discrete(&self) -> Endomorphism {
        self.dynamics
            .clone()
            .unwrap_or_else(|| Endomorphism::identity(&self.algebra))
    }
}

fn blocks_to_element(alg: &BlockAlgebra, what: &str, blocks: &Blocks) -> Result<AlgebraElement, String> {
    if blocks.len() != alg.num_blocks() {
        return Err(format!(
            "{what}: {} blocks given, algebra has {}",
            blocks.len(),
            alg.num_blocks()
        ));
    }
    let mats = blocks
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            let n = alg.dims()[k];
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(format!("{what}: block {k} must be {n}x{n}"));
            }
            if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(format!("{what}: block {k} has non-finite entries"));
            }
            ComplexMatrix::from_rows(rows).map_err(|e| format!("{what}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    alg.element(mats).map_err(|e| format!("{what}: {e}"))
}

fn projection_diagnostic(p: &AlgebraElement) -> Option<String> {
    if is_projection(p, PROJECTION_TOL) {
        return None;
    }
    let (hermiticity, idempotency) = p.projection_defects();
    Some(format!(
        "projection: not a projection (‖P²−P‖ = {idempotency:.3e}, ‖P−P*‖ = {hermiticity:.3e})"
    ))
}

fn build_projection(alg: &BlockAlgebra, spec: &ProjectionSpec) -> Result<AlgebraElement, String> {
    let p = match spec {
        ProjectionSpec::Matrix(blocks) => blocks_to_element(alg, "projection", blocks)?,
        ProjectionSpec::Spectral { observable, interval } => {
            let obs = blocks_to_element(alg, "projection observable", observable)?;
            let s = Interval::new(interval[0], interval[1]).map_err(|e| format!("projection interval: {e}"))?;
            let mats = obs
                .blocks()
                .iter()
                .map(|b| spectral_projection(b, s))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(|e| format!("projection observable: {e}"))?;
            AlgebraElement::from_blocks_unchecked(mats)
        }
    };
    match projection_diagnostic(&p) {
        Some(d) => Err(d),
        None => Ok(p),
    }
}

fn build_state(alg: &BlockAlgebra, spec: &StateSpec) -> Result<LinearFunctional, String> {
    match spec {
        StateSpec::Trace => Ok(tracial_state(alg)),
        StateSpec::Vector { block, psi } => {
            LinearFunctional::vector_state(alg, *block, psi).map_err(|e| format!("state: {e}"))
        }
        StateSpec::Density(blocks) => {
            let rho = blocks_to_element(alg, "state density", blocks)?;
            LinearFunctional::density_state(alg, rho).map_err(|e| format!("state: {e}"))
        }
    }
}

fn check_params(s: &Scenario, diags: &mut Vec<String>) {
    let p = &s.params;
    if let Some(e) = p.epsilon {
        if !(e > 0.0) || !e.is_finite() {
            diags.push(format!("params.epsilon must be positive, got {e}"));
        }
    }
    if let Some(t) = p.t_step {
        if !(t > 0.0) || !t.is_finite() {
            diags.push(format!("params.t_step must be positive, got {t}"));
        }
    }
    if let Some(t) = p.threshold {
        if !(t >= 0.0) || !t.is_finite() {
            diags.push(format!("params.threshold must be nonnegative, got {t}"));
        }
    }
    if p.k_max == Some(0) {
        diags.push("params.k_max must be positive".into());
    }
    if p.n_max == Some(0) {
        diags.push("params.n_max must be positive".into());
    }
    if p.count == Some(0) {
        diags.push("params.count must be positive".into());
    }
    if let Some(g) = &p.t_grid {
        if g.points == 0 || !g.start.is_finite() || !g.stop.is_finite() || g.stop < g.start {
            diags.push("params.t_grid needs finite start ≤ stop and at least one point".into());
        }
    }
    if let Some(ts) = &p.times {
        if ts.iter().any(|t| !t.is_finite()) {
            diags.push("params.times must be finite".into());
        }
    }
}

fn prepare_quantum(spec: &QuantumSpec, params: &Params, diags: &mut Vec<String>) -> Option<PreparedQuantum> {
    let algebra = match &spec.block_weights {
        Some(w) => BlockAlgebra::new(spec.block_dims.clone(), w.clone()),
        None => BlockAlgebra::with_default_weights(spec.block_dims.clone()),
    };
    let algebra = match algebra {
        Ok(a) => a,
        Err(e) => {
            diags.push(format!("algebra: {e}"));
            return None;
        }
    };
    let state = build_state(&algebra, &spec.state).map_err(|d| diags.push(d)).ok();
    let hamiltonian = spec.hamiltonian.as_ref().and_then(|h| {
        blocks_to_element(&algebra, "hamiltonian", h)
            .and_then(|h| BoundedQuantumSystem::new(algebra.clone(), h).map_err(|e| format!("hamiltonian: {e}")))
            .map_err(|d| diags.push(d))
            .ok()
    });
    let dynamics = match (&spec.endomorphism, &hamiltonian, params.t_step) {
        (Some(e), _, _) => {
            let unitary = match &e.unitary {
                Some(u) => blocks_to_element(&algebra, "endomorphism unitary", u),
                None => Ok(algebra.identity()),
            };
            unitary
                .and_then(|u| {
                    Endomorphism::new(algebra.clone(), e.permutation.clone(), u)
                        .map_err(|e| format!("endomorphism: {e}"))
                })
                .map_err(|d| diags.push(d))
                .ok()
        }
        (None, Some(sys), Some(t)) if t > 0.0 => Some(Endomorphism::from_evolution(sys, t)),
        _ => None,
    };
    let projection = spec
        .projection
        .as_ref()
        .and_then(|p| build_projection(&algebra, p).map_err(|d| diags.push(d)).ok());
    Some(PreparedQuantum {
        algebra,
        state: state?,
        hamiltonian,
        dynamics,
        projection,
    })
}

fn prepare_classical(spec: &ClassicalSpec, diags: &mut Vec<String>) -> Option<PreparedClassical> {
    let system = match ClassicalSystem::new(spec.weights.clone(), spec.map.clone()) {
        Ok(s) => s,
        Err(e) => {
            diags.push(format!("classical system: {e}"));
            return None;
        }
    };
    let subset = spec
        .subset
        .as_ref()
        .and_then(|s| system.subset(s).map_err(|e| diags.push(format!("subset: {e}"))).ok());
    let embedded = if system.is_measure_preserving(MEASURE_TOL) {
        embed_diagonal(&system)
            .map_err(|e| diags.push(format!("embedding: {e}")))
            .ok()
    } else {
        None
    };
    Some(PreparedClassical {
        system,
        subset,
        embedded,
    })
}

/// What each experiment needs from its system.
fn check_requirements(s: &Scenario, sys: &PreparedSystem, diags: &mut Vec<String>) {
    let exp = s.experiment.as_str();
    let need = |diags: &mut Vec<String>, ok: bool, what: &str| {
        if !ok {
            diags.push(format!("experiment {exp} requires {what}"));
        }
    };
    match sys {
        PreparedSystem::Quantum(q) => match s.experiment {
            Experiment::Liouville => need(diags, q.hamiltonian.is_some(), "a hamiltonian"),
            Experiment::Recurrence => need(diags, q.projection.is_some(), "a projection"),
            Experiment::Khintchine => {
                need(diags, q.projection.is_some(), "a projection");
                need(diags, s.params.epsilon.is_some(), "params.epsilon");
            }
            Experiment::Continuous => {
                need(diags, q.hamiltonian.is_some(), "a hamiltonian");
                need(diags, q.projection.is_some(), "a projection");
                need(diags, q.algebra.is_factor(), "a single-block (factor) algebra");
            }
            Experiment::Moments => {
                need(diags, q.hamiltonian.is_some(), "a hamiltonian");
                need(diags, q.projection.is_some(), "a projection");
                need(diags, s.params.t_step.is_some(), "params.t_step");
            }
            Experiment::GnsVerify => {}
            Experiment::LudersDemo => need(diags, q.projection.is_some(), "a projection"),
            Experiment::Prop31 => need(diags, false, "a classical system"),
        },
        PreparedSystem::Classical(c) => {
            let preserving = c.embedded.is_some();
            match s.experiment {
                Experiment::Prop31 => {}
                Experiment::Recurrence | Experiment::Khintchine | Experiment::GnsVerify => {
                    if !preserving {
                        diags.push(format!(
                            "experiment {exp} requires a measure-preserving map (worst preimage defect {:e})",
                            c.system.preservation_defect()
                        ));
                    }
                    if s.experiment != Experiment::GnsVerify {
                        need(diags, c.subset.is_some(), "a subset");
                    }
                    if s.experiment == Experiment::Khintchine {
                        need(diags, s.params.epsilon.is_some(), "params.epsilon");
                    }
                }
                _ => need(diags, false, "a quantum system"),
            }
        }
    }
}

fn check_name(name: &str, diags: &mut Vec<String>) {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !ok {
        diags.push(format!(
            "name {name:?} must be nonempty and use only ASCII letters, digits, '-', '_' and '.'"
        ));
    }
}

/// Runs every check on a parsed scenario and builds its objects.
pub fn prepare(scenario: Scenario) -> Result<Prepared, ScenarioError> {
    let mut diags = Vec::new();
    if scenario.schema_version != SCHEMA_VERSION {
        diags.push(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            scenario.schema_version
        ));
    }
    check_name(&scenario.name, &mut diags);
    check_params(&scenario, &mut diags);
    let system = match &scenario.system {
        SystemSpec::Quantum(q) => prepare_quantum(q, &scenario.params, &mut diags).map(PreparedSystem::Quantum),
        SystemSpec::Classical(c) => prepare_classical(c, &mut diags).map(PreparedSystem::Classical),
    };
    // Missing-ingredient diagnostics would only repeat a failed build.
    if let (Some(sys), true) = (&system, diags.is_empty()) {
        check_requirements(&scenario, sys, &mut diags);
    }
    match system {
        Some(system) if diags.is_empty() => Ok(Prepared { scenario, system }),
        _ => Err(ScenarioError::Invalid(diags)),
    }
}

/// Parse and check without running; returns the prepared scenario.
pub fn validate(text: &str) -> Result<Prepared, ScenarioError> {
    prepare(parse(text)?)
}

impl PreparedQuantum {
    pub fn dynamics_label(&self) -> String {
        self.dynamics
            .as_ref()
            .map(|d| d.describe())
            .unwrap_or_else(|| "identity".into())
    }
}
