//! Runs a prepared scenario and writes `<name>.summary.txt`,
//! `<name>.report.json` and `<name>.csv`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::algebra::{luders_update, tracial_state, AlgebraElement, FunctionalKind, LinearFunctional};
use crate::classical::{check_prop31_seeded, classical_recurrence};
use crate::dynamics::{verify_liouville, BoundedQuantumSystem, StarHomomorphism};
use crate::gns::{ergodic_projection, extend_endomorphism, gns_construct, khintchine_bound_check, DEFAULT_N_MAX};
use crate::random::{random_element, seeded_rng};
use crate::recurrence::{
    check_contractivity, continuous_scan, correlation_sequence, first_recurrence, khintchine_scan, poincare_bound,
    recurrence_moments, recurrence_window, CorrelationSequence, POSITIVITY_THRESHOLD,
};
use crate::scenario::{
    Experiment, Params, Prepared, PreparedClassical, PreparedQuantum, PreparedSystem, ScenarioError, TimeGrid,
    DEFAULT_TOL, SCHEMA_VERSION,
};
use crate::Error;

/// Agreement required between embedded and set-theoretic overlaps.
pub const AGREEMENT_TOL: f64 = 1e-13;
/// `ω′(A*A)` may dip this far below zero through rounding.
pub const STATE_POSITIVITY_TOL: f64 = 1e-11;

const DEFAULT_LIOUVILLE_TIMES: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];
const DEFAULT_SAMPLES: usize = 100;
const DEFAULT_RECURRENCE_KMAX: usize = 100;
const DEFAULT_KHINTCHINE_KMAX: usize = 1000;
const DEFAULT_MOMENT_COUNT: usize = 5;
const DEFAULT_MOMENT_NMAX: usize = 10_000;
const DEFAULT_GNS_EPSILON: f64 = 0.01;
const CONTRACTIVITY_SAMPLES: usize = 32;

/// Command-line overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub k_max: Option<usize>,
    pub tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            k_max: None,
            tol: DEFAULT_TOL,
        }
    }
}

/// `VNRECUR_TOL` if set and valid, else [`DEFAULT_TOL`].
pub fn env_tolerance() -> Result<f64, ScenarioError> {
    match std::env::var("VNRECUR_TOL") {
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(ScenarioError::Invalid(vec![format!(
                "VNRECUR_TOL = {s:?} is not a positive number"
            )])),
        },
        Err(_) => Ok(DEFAULT_TOL),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Abscissa {
    K(usize),
    T(f64),
}

/// One CSV line: `k_or_t, correlation, threshold, in_E`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub k_or_t: Abscissa,
    pub correlation: f64,
    pub threshold: f64,
    pub in_e: bool,
}

impl Row {
    fn k(k: usize, correlation: f64, threshold: f64) -> Self {
        Self {
            k_or_t: Abscissa::K(k),
            correlation,
            threshold,
            in_e: correlation > threshold,
        }
    }

    fn t(t: f64, correlation: f64, threshold: f64) -> Self {
        Self {
            k_or_t: Abscissa::T(t),
            correlation,
            threshold,
            in_e: correlation > threshold,
        }
    }
}

/// Everything an experiment produced, before it is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub name: String,
    pub experiment: Experiment,
    pub report: Map<String, Value>,
    pub rows: Vec<Row>,
    /// Violated numerical invariants; empty on success.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    /// 17 significant digits, `.` separator, LF endings.
    pub fn csv(&self) -> String {
        let mut s = String::from("k_or_t,correlation,threshold,in_E\n");
        for r in &self.rows {
            match r.k_or_t {
                Abscissa::K(k) => write!(s, "{k}"),
                Abscissa::T(t) => write!(s, "{t:.16e}"),
            }
            .unwrap();
            writeln!(s, ",{:.16e},{:.16e},{}", r.correlation, r.threshold, r.in_e).unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for (key, value) in &self.report {
            let shown = match value {
                Value::Array(a) if a.iter().any(|v| v.is_object() || v.is_array()) => format!("[{} entries]", a.len()),
                Value::Array(a) if a.len() > 12 => format!("[{} entries]", a.len()),
                Value::Object(o) => {
                    let inner: Vec<String> = o.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    inner.join(", ")
                }
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            writeln!(s, "{key}: {shown}").unwrap();
        }
        for f in &self.failures {
            writeln!(s, "FAILED: {f}").unwrap();
        }
        s
    }

    /// Writes the three output files, each through a temporary file and a
    /// rename. Returns their paths.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
        fs::create_dir_all(out_dir)?;
        let files = [
            (format!("{}.summary.txt", self.name), self.summary()),
            (format!("{}.report.json", self.name), self.report_json()),
            (format!("{}.csv", self.name), self.csv()),
        ];
        files
            .iter()
            .map(|(file, contents)| {
                let path = out_dir.join(file);
                write_atomic(&path, contents.as_bytes())?;
                Ok(path)
            })
            .collect()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ScenarioError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
}

struct Ctx<'a> {
    params: &'a Params,
    seed: u64,
    k_max: Option<usize>,
    tol: f64,
    report: Map<String, Value>,
    rows: Vec<Row>,
    failures: Vec<String>,
}

impl Ctx<'_> {
    fn put(&mut self, key: &str, value: Value) {
        self.report.insert(key.into(), value);
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn threshold(&self) -> f64 {
        self.params.threshold.unwrap_or(POSITIVITY_THRESHOLD)
    }
}

/// Runs the experiment; invariant failures are collected in the outcome,
/// not returned as errors.
pub fn execute(prepared: &Prepared, opts: &RunOptions) -> Result<Outcome, ScenarioError> {
    let sc = &prepared.scenario;
    let seed = opts.seed.unwrap_or(sc.params.seed);
    let mut ctx = Ctx {
        params: &sc.params,
        seed,
        k_max: opts.k_max.or(sc.params.k_max),
        tol: opts.tol,
        report: Map::new(),
        rows: Vec::new(),
        failures: Vec::new(),
    };
    ctx.put("schema_version", json!(SCHEMA_VERSION));
    ctx.put("name", json!(sc.name));
    ctx.put("experiment", json!(sc.experiment.as_str()));
    ctx.put("seed", json!(seed));
    ctx.put("tolerance", json!(opts.tol));

    match (&prepared.system, sc.experiment) {
        (PreparedSystem::Quantum(q), Experiment::Liouville) => liouville(&mut ctx, q)?,
        (PreparedSystem::Quantum(q), Experiment::Recurrence) => {
            let p = q.projection.as_ref().expect("validated");
            recurrence(&mut ctx, &q.state, p, &q.discrete(), None)?
        }
        (PreparedSystem::Classical(c), Experiment::Recurrence) => {
            let emb = c.embedded.as_ref().expect("validated");
            let p = emb.indicator(c.subset.as_ref().expect("validated"));
            recurrence(&mut ctx, &emb.state, &p, &emb.endomorphism, Some(c))?
        }
        (PreparedSystem::Quantum(q), Experiment::Khintchine) => {
            let p = q.projection.as_ref().expect("validated");
            khintchine(&mut ctx, &q.state, p, &q.discrete())?
        }
        (PreparedSystem::Classical(c), Experiment::Khintchine) => {
            let emb = c.embedded.as_ref().expect("validated");
            let p = emb.indicator(c.subset.as_ref().expect("validated"));
            khintchine(&mut ctx, &emb.state, &p, &emb.endomorphism)?
        }
        (PreparedSystem::Quantum(q), Experiment::Continuous) => continuous(&mut ctx, q)?,
        (PreparedSystem::Quantum(q), Experiment::Moments) => moments(&mut ctx, q)?,
        (PreparedSystem::Quantum(q), Experiment::GnsVerify) => {
            let dynamics = q.dynamics.as_ref().map(|d| d as &dyn StarHomomorphism);
            gns_verify(&mut ctx, &q.state, q.projection.as_ref(), dynamics)?
        }
        (PreparedSystem::Classical(c), Experiment::GnsVerify) => {
            let emb = c.embedded.as_ref().expect("validated");
            let p = c.subset.as_ref().map(|s| emb.indicator(s));
            gns_verify(&mut ctx, &emb.state, p.as_ref(), Some(&emb.endomorphism))?
        }
        (PreparedSystem::Classical(c), Experiment::Prop31) => prop31(&mut ctx, c)?,
        (PreparedSystem::Quantum(q), Experiment::LudersDemo) => luders_demo(&mut ctx, q)?,
        (_, e) => {
            return Err(ScenarioError::Invalid(vec![format!(
                "experiment {} does not apply to this system",
                e.as_str()
            )]))
        }
    }

    ctx.put(
        "status",
        json!(if ctx.failures.is_empty() {
            "ok"
        } else {
            "invariant_failure"
        }),
    );
    ctx.put("failures", json!(ctx.failures));
    Ok(Outcome {
        name: sc.name.clone(),
        experiment: sc.experiment,
        report: ctx.report,
        rows: ctx.rows,
        failures: ctx.failures,
    })
}

/// Executes and writes the outputs; a failed invariant still writes the
/// reports before returning [`ScenarioError::Invariant`].
pub fn run(prepared: &Prepared, out_dir: &Path, opts: &RunOptions) -> Result<Outcome, ScenarioError> {
    let outcome = execute(prepared, opts)?;
    outcome.write(out_dir)?;
    if !outcome.passed() {
        return Err(ScenarioError::Invariant(outcome.failures.join("; ")));
    }
    Ok(outcome)
}

/// `tr(P τ_t(P))` on the Hamiltonian flow.
fn trace_correlation(sys: &BoundedQuantumSystem, p: &AlgebraElement, t: f64) -> crate::Result<f64> {
    let tr = tracial_state(sys.algebra());
    Ok(tr.eval(&(&(p * &sys.evolve(t, p)?) * p))?.re)
}

fn liouville(ctx: &mut Ctx, q: &PreparedQuantum) -> Result<(), ScenarioError> {
    let sys = q.hamiltonian.as_ref().expect("validated");
    let times = ctx
        .params
        .times
        .clone()
        .unwrap_or_else(|| DEFAULT_LIOUVILLE_TIMES.to_vec());
    let samples = ctx.params.samples.unwrap_or(DEFAULT_SAMPLES);
    let rep = verify_liouville(sys, samples, &times, ctx.seed);
    ctx.put("max_deviation", json!(rep.max_deviation));
    ctx.put("sample_count", json!(rep.sample_count));
    ctx.put("per_time", json!(rep.per_time));
    let tol = ctx.tol;
    ctx.require(rep.max_deviation <= tol, || {
        format!("Liouville deviation {:e} exceeds tolerance {tol:e}", rep.max_deviation)
    });
    if let Some(p) = &q.projection {
        let threshold = ctx.threshold();
        for &t in &times {
            let c = trace_correlation(sys, p, t)?;
            ctx.rows.push(Row::t(t, c, threshold));
        }
    }
    Ok(())
}

fn sequence_rows(ctx: &mut Ctx, seq: &CorrelationSequence, threshold: f64) {
    ctx.rows
        .extend(seq.values.iter().enumerate().map(|(i, &c)| Row::k(i + 1, c, threshold)));
}

fn recurrence(
    ctx: &mut Ctx,
    phi: &LinearFunctional,
    p: &AlgebraElement,
    tau: &dyn StarHomomorphism,
    classical: Option<&PreparedClassical>,
) -> Result<(), ScenarioError> {
    let k_max = ctx.k_max.unwrap_or(DEFAULT_RECURRENCE_KMAX);
    let threshold = ctx.threshold();
    let seq = correlation_sequence(phi, p, tau, k_max)?;
    let first = first_recurrence(&seq, threshold);
    let bound = poincare_bound(&seq, threshold);
    ctx.put("dynamics", json!(seq.dynamics));
    ctx.put("k_max", json!(k_max));
    ctx.put("threshold", json!(threshold));
    ctx.put("phi_p", json!(seq.phi_p));
    ctx.put("first_recurrence", json!(first));
    ctx.put("zero_prefix", json!(bound.zero_prefix));
    ctx.put("poincare_product", json!(bound.product));
    // The bound needs an additive, invariant state: the trace qualifies.
    let applies = phi.kind() == FunctionalKind::Trace;
    ctx.put("poincare_bound_applies", json!(applies));
    ctx.put("poincare_bound_holds", json!(bound.holds));
    if applies {
        ctx.require(bound.holds, || {
            format!("zero prefix {} gives N·φ(P) = {} > 1", bound.zero_prefix, bound.product)
        });
    }
    if let Some(c) = classical {
        let s = c.subset.as_ref().expect("validated");
        let classical = classical_recurrence(&c.system, s, k_max)?;
        let disagreement = classical
            .overlaps
            .iter()
            .zip(&seq.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ctx.put("classical_first_recurrence", json!(classical.first_n));
        ctx.put("classical_disagreement", json!(disagreement));
        ctx.require(disagreement <= AGREEMENT_TOL, || {
            format!("embedded correlations differ from set overlaps by {disagreement:e}")
        });
    }
    sequence_rows(ctx, &seq, threshold);
    Ok(())
}

fn khintchine(
    ctx: &mut Ctx,
    phi: &LinearFunctional,
    p: &AlgebraElement,
    tau: &dyn StarHomomorphism,
) -> Result<(), ScenarioError> {
    let epsilon = ctx.params.epsilon.expect("validated");
    let k_max = ctx.k_max.unwrap_or(DEFAULT_KHINTCHINE_KMAX);
    let samples = ctx.params.samples.unwrap_or(CONTRACTIVITY_SAMPLES);
    check_contractivity(phi, tau, samples, ctx.seed, ctx.tol)?;
    let seq = correlation_sequence(phi, p, tau, k_max)?;

    let g = extend_endomorphism(&gns_construct(phi.algebra(), phi)?, tau)?;
    let x = g.embed(p)?;
    let n_max = ctx.params.n_max.unwrap_or(DEFAULT_N_MAX);
    let (window, certificate) = match ergodic_projection(&g, &x, epsilon, n_max) {
        Ok(erg) => {
            let bound = khintchine_bound_check(&g, &erg, p, tau)?;
            ctx.require(bound.ok, || {
                format!("φ(P)² = {} exceeds ⟨x, Qx⟩ = {}", bound.phi_p_sq, bound.x_qx)
            });
            ctx.require(bound.transfer_ok, || {
                format!("GNS correlations differ from direct ones by {:e}", bound.transfer_error)
            });
            let cert = json!({
                "window_n": erg.n,
                "fixed_dim": erg.fixed_dim,
                "achieved_error": erg.achieved_error,
                "target": erg.target,
                "phi_p_sq": bound.phi_p_sq,
                "x_qx": bound.x_qx,
                "bound_ok": bound.ok,
                "transfer_error": bound.transfer_error,
            });
            (Some(erg.n), cert)
        }
        Err(Error::NMaxExceeded { achieved, target, .. }) => (
            None,
            json!({ "window_n": null, "n_max": n_max, "achieved_error": achieved, "target": target }),
        ),
        Err(e) => return Err(e.into()),
    };
    let scan = khintchine_scan(&seq, epsilon, window)?;
    ctx.put("dynamics", json!(seq.dynamics));
    ctx.put("phi_p", json!(seq.phi_p));
    ctx.put("epsilon", json!(scan.epsilon));
    ctx.put("threshold", json!(scan.threshold));
    // The same event read through ω = φ(P·P)/φ(P): ω(τᵏ(P)) > φ(P) − ε/φ(P).
    ctx.put("state_threshold", json!(seq.phi_p - scan.epsilon / seq.phi_p));
    ctx.put("k_max", json!(scan.k_max));
    ctx.put("max_gap", json!(scan.max_gap));
    ctx.put("e_size", json!(scan.e.len()));
    ctx.put("e_head", json!(scan.e.iter().take(20).collect::<Vec<_>>()));
    ctx.put("window_n", json!(scan.window_n));
    ctx.put("window_violations", json!(scan.window_violations));
    ctx.put(
        "certified",
        json!(if scan.certified { "certified" } else { "uncertified" }),
    );
    ctx.put("certificate", certificate);
    ctx.require(scan.window_violations == 0, || {
        format!(
            "{} windows of length {:?} miss E",
            scan.window_violations, scan.window_n
        )
    });
    sequence_rows(ctx, &seq, scan.threshold);
    Ok(())
}

fn default_grid() -> TimeGrid {
    TimeGrid {
        start: 0.0,
        stop: 4.0 * std::f64::consts::PI,
        points: 1000,
    }
}

fn continuous(ctx: &mut Ctx, q: &PreparedQuantum) -> Result<(), ScenarioError> {
    let sys = q.hamiltonian.as_ref().expect("validated");
    let p = q.projection.as_ref().expect("validated");
    let grid = ctx.params.t_grid.clone().unwrap_or_else(default_grid);
    let scan = continuous_scan(sys, p, &grid.values())?;
    let threshold = ctx.threshold();
    ctx.put("grid_points", json!(scan.samples.len()));
    ctx.put("t_start", json!(grid.start));
    ctx.put("t_stop", json!(grid.stop));
    ctx.put("trace_p", json!(tracial_state(&q.algebra).eval(p)?.re));
    ctx.put("lipschitz_constant", json!(scan.lipschitz_constant));
    ctx.put("max_lipschitz_excess", json!(scan.max_lipschitz_excess));
    ctx.put("lipschitz_ok", json!(scan.lipschitz_ok));
    let excess = scan.max_lipschitz_excess;
    ctx.require(scan.lipschitz_ok, || format!("Lipschitz bound exceeded by {excess:e}"));
    ctx.rows
        .extend(scan.samples.iter().map(|&(t, c)| Row::t(t, c, threshold)));
    Ok(())
}

fn moments(ctx: &mut Ctx, q: &PreparedQuantum) -> Result<(), ScenarioError> {
    let sys = q.hamiltonian.as_ref().expect("validated");
    let p = q.projection.as_ref().expect("validated");
    let t = ctx.params.t_step.expect("validated");
    let count = ctx.params.count.unwrap_or(DEFAULT_MOMENT_COUNT);
    let n_max = ctx.params.n_max.unwrap_or(DEFAULT_MOMENT_NMAX);
    let threshold = ctx.threshold();
    let rep = recurrence_moments(sys, p, t, count, n_max, threshold)?;

    // Both readings of the window target are reported side by side: the
    // trace-scaled `tr(P) − ε` and the state-scaled `1 − ε`.
    let mut windows = Vec::new();
    if let Some(eps) = ctx.params.epsilon {
        for m in &rep.moments {
            let mut w = Map::new();
            for (key, target) in [("trace_target", rep.trace_p - eps), ("state_target", 1.0 - eps)] {
                let delta = match recurrence_window(sys, p, m.moment, target, m.step / 2.0) {
                    Ok(d) => json!(d),
                    Err(Error::CenterFails { .. }) => Value::Null,
                    Err(e) => return Err(e.into()),
                };
                w.insert(key.into(), json!(target));
                w.insert(format!("delta_{key}"), delta);
            }
            windows.push(Value::Object(w));
        }
    }
    let increasing = rep.moments.windows(2).all(|w| w[1].moment > w[0].moment);
    ctx.require(increasing, || "moments are not strictly increasing".into());
    ctx.put("trace_p", json!(rep.trace_p));
    ctx.put("t_step", json!(t));
    ctx.put("moments", json!(rep.moments));
    ctx.put(
        "moment_times",
        json!(rep.moments.iter().map(|m| m.moment).collect::<Vec<_>>()),
    );
    ctx.put("aliased_steps", json!(rep.moments.iter().filter(|m| m.aliased).count()));
    if ctx.params.epsilon.is_some() {
        ctx.put("windows", Value::Array(windows));
    }
    for m in &rep.moments {
        ctx.rows.push(Row::t(m.moment, m.probability * rep.trace_p, threshold));
    }
    Ok(())
}

fn gns_verify(
    ctx: &mut Ctx,
    phi: &LinearFunctional,
    p: Option<&AlgebraElement>,
    tau: Option<&dyn StarHomomorphism>,
) -> Result<(), ScenarioError> {
    let tol = ctx.tol;
    let mut g = gns_construct(phi.algebra(), phi)?;
    if let Some(tau) = tau {
        g = extend_endomorphism(&g, tau)?;
        ctx.put("dynamics", json!(tau.describe()));
    }
    let ver = g.verify()?;
    ctx.put("algebra_dimension", json!(phi.algebra().dimension()));
    ctx.put("gns_dimension", json!(ver.dim));
    ctx.put("gram_error", json!(ver.gram_error));
    ctx.put("state_error", json!(ver.state_error));
    ctx.put("tau_bar_norm", json!(ver.tau_bar_norm));
    ctx.require(ver.holds(tol), || {
        format!(
            "GNS invariants fail: gram error {:e}, state error {:e}, ‖τ̄‖ = {:?}",
            ver.gram_error, ver.state_error, ver.tau_bar_norm
        )
    });
    if let (Some(p), Some(tau)) = (p, tau) {
        let epsilon = ctx.params.epsilon.unwrap_or(DEFAULT_GNS_EPSILON);
        let n_max = ctx.params.n_max.unwrap_or(DEFAULT_N_MAX);
        let erg = ergodic_projection(&g, &g.embed(p)?, epsilon, n_max)?;
        let bound = khintchine_bound_check(&g, &erg, p, tau)?;
        ctx.put("epsilon", json!(epsilon));
        ctx.put("fixed_dim", json!(erg.fixed_dim));
        ctx.put("window_n", json!(erg.n));
        ctx.put("khintchine_bound", json!(bound));
        ctx.require(bound.ok && bound.transfer_ok, || {
            format!(
                "Khintchine bound check failed: φ(P)² = {}, ⟨x, Qx⟩ = {}, transfer error {:e}",
                bound.phi_p_sq, bound.x_qx, bound.transfer_error
            )
        });
    }
    Ok(())
}

fn prop31(ctx: &mut Ctx, c: &PreparedClassical) -> Result<(), ScenarioError> {
    let rep = check_prop31_seeded(&c.system, ctx.tol, ctx.seed);
    let mut image = c.system.map().to_vec();
    image.sort_unstable();
    image.dedup();
    ctx.put("points", json!(c.system.size()));
    ctx.put("invertible", json!(image.len() == c.system.size()));
    ctx.put("measure_preserving", json!(rep.measure_preserving));
    ctx.put("functional_invariant", json!(rep.functional_invariant));
    ctx.put("equivalent", json!(rep.equivalent));
    ctx.put("preimage_defect", json!(rep.preimage_defect));
    ctx.put("functional_defect", json!(rep.functional_defect));
    ctx.require(rep.equivalent, || {
        format!(
            "measure preservation ({}) and functional invariance ({}) disagree",
            rep.measure_preserving, rep.functional_invariant
        )
    });
    if let (Some(s), true) = (&c.subset, rep.measure_preserving && c.embedded.is_some()) {
        let k_max = ctx.k_max.unwrap_or(DEFAULT_RECURRENCE_KMAX);
        let threshold = ctx.threshold();
        let rec = classical_recurrence(&c.system, s, k_max)?;
        ctx.put("subset_measure", json!(rec.measure));
        ctx.put("first_recurrence", json!(rec.first_n));
        ctx.rows.extend(
            rec.overlaps
                .iter()
                .enumerate()
                .map(|(i, &o)| Row::k(i + 1, o, threshold)),
        );
    }
    Ok(())
}

fn luders_demo(ctx: &mut Ctx, q: &PreparedQuantum) -> Result<(), ScenarioError> {
    let p = q.projection.as_ref().expect("validated");
    let omega = &q.state;
    let tol = ctx.tol;
    let prior = omega.eval(p)?.re;
    let updated = luders_update(omega, p)?;
    let unit = updated.eval(&q.algebra.identity())?;
    let posterior = updated.eval(p)?.re;
    let repeated = luders_update(&updated, p)?;
    let again = repeated.eval(p)?.re;
    let complement = updated.eval(&(&q.algebra.identity() - p))?.re;

    let samples = ctx.params.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut rng = seeded_rng(ctx.seed);
    let min_positive = (0..samples)
        .map(|_| {
            let a = random_element(&q.algebra, &mut rng);
            updated.eval_unchecked(&(&a.adjoint() * &a)).re
        })
        .fold(f64::INFINITY, f64::min);

    ctx.put("prior_probability", json!(prior));
    ctx.put("updated_unit", json!((unit - 1.0).norm()));
    ctx.put("posterior_probability", json!(posterior));
    ctx.put("repeated_probability", json!(again));
    ctx.put("complement_probability", json!(complement));
    ctx.put(
        "min_sampled_positivity",
        json!(if samples > 0 { min_positive } else { 0.0 }),
    );
    ctx.require((unit - 1.0).norm() <= tol, || format!("ω′(1) = {unit}"));
    ctx.require((posterior - 1.0).abs() <= tol, || format!("ω′(P) = {posterior}"));
    ctx.require((again - 1.0).abs() <= tol, || format!("repeated probability {again}"));
    ctx.require(samples == 0 || min_positive >= -STATE_POSITIVITY_TOL, || {
        format!("ω′(A*A) = {min_positive:e} is negative")
    });

    if let (Some(sys), Some(grid)) = (&q.hamiltonian, &ctx.params.t_grid) {
        let threshold = ctx.threshold();
        for t in grid.values() {
            let v = updated.eval(&sys.evolve(t, p)?)?.re;
            ctx.rows.push(Row::t(t, v, threshold));
        }
    }
    Ok(())
}
