//! Recurrence analytics: correlation sequences `φ(Pτᵏ(P)P)`, first
//! recurrence with the quantitative zero-prefix bound, relative-density
//! scans, continuous-time sampling, recurrence moments and windows.

use serde::Serialize;

use crate::algebra::{is_projection, luders_update, tracial_state, AlgebraElement, LinearFunctional, PROJECTION_TOL};
use crate::dynamics::{BoundedQuantumSystem, Endomorphism, StarHomomorphism};
use crate::error::{Error, Result};
use crate::gns::contractivity_excess;

/// Default numerical reading of "> 0".
pub const POSITIVITY_THRESHOLD: f64 = 1e-12;
/// Allowed imaginary part and negativity of a correlation value.
pub const CORRELATION_TOL: f64 = 1e-12;
/// Slack in the zero-prefix bound `N·φ(P) ≤ 1`.
pub const POINCARE_SLACK: f64 = 1e-9;
/// Slack in the Lipschitz witness of continuous scans.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;
/// A sampling step is flagged as aliased when `‖τ_t(P) − P‖_F` is below this.
pub const ALIAS_TOL: f64 = 1e-9;
/// Number of halvings tried by [`recurrence_window`].
pub const WINDOW_HALVINGS: usize = 20;
/// Sample points per candidate window in [`recurrence_window`].
pub const WINDOW_SAMPLES: usize = 9;

/// `c_k = Re φ(P τᵏ(P) P)` for `k = 1..=k_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationSequence {
    /// `values[k − 1] = c_k`.
    pub values: Vec<f64>,
    pub phi_p: f64,
    pub dynamics: String,
}

impl CorrelationSequence {
    pub fn value(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    pub fn k_max(&self) -> usize {
        self.values.len()
    }

    /// Number of leading values at or below `threshold`.
    pub fn zero_prefix_len(&self, threshold: f64) -> usize {
        self.values.iter().take_while(|&&c| c <= threshold).count()
    }
}

fn require_projection(p: &AlgebraElement) -> Result<()> {
    if !is_projection(p, PROJECTION_TOL) {
        let (hermiticity, idempotency) = p.projection_defects();
        return Err(Error::NotProjection {
            index: 0,
            hermiticity,
            idempotency,
        });
    }
    Ok(())
}

/// Correlation value `φ(PXP)`, checked to be real and in `[0, 1]` up to
/// [`CORRELATION_TOL`].
fn correlation(phi: &LinearFunctional, p: &AlgebraElement, x: &AlgebraElement, k: usize) -> Result<f64> {
    let v = phi.eval_unchecked(&(&(p * x) * p));
    if v.im.abs() > CORRELATION_TOL || v.re < -CORRELATION_TOL || v.re > 1.0 + CORRELATION_TOL {
        return Err(Error::InvariantViolation(format!(
            "correlation c_{k} = {v} is not a real number in [0, 1]"
        )));
    }
    Ok(v.re)
}

/// Correlation sequence of `P` under iterates of `τ`.
pub fn correlation_sequence(
    phi: &LinearFunctional,
    p: &AlgebraElement,
    tau: &dyn StarHomomorphism,
    k_max: usize,
) -> Result<CorrelationSequence> {
    let alg = phi.algebra();
    if tau.algebra() != alg {
        return Err(Error::ShapeMismatch(
            "dynamics acts on a different algebra than the state".into(),
        ));
    }
    alg.check(p)?;
    require_projection(p)?;
    let mut values = Vec::with_capacity(k_max);
    let mut x = p.clone();
    for k in 1..=k_max {
        x = tau.apply(&x);
        values.push(correlation(phi, p, &x, k)?);
    }
    Ok(CorrelationSequence {
        values,
        phi_p: phi.eval_unchecked(p).re,
        dynamics: tau.describe(),
    })
}

/// Least `n` with `c_n > threshold`.
pub fn first_recurrence(seq: &CorrelationSequence, threshold: f64) -> Option<usize> {
    seq.values.iter().position(|&c| c > threshold).map(|i| i + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoincareBound {
    /// Length `N` of the leading run with `c_n ≤ threshold`.
    pub zero_prefix: usize,
    /// `N · φ(P)`.
    pub product: f64,
    pub holds: bool,
}

/// Quantitative content of the recurrence argument: if `c_1..c_N` all vanish
/// under an additive state and trace-compatible dynamics, then `N·φ(P) ≤ 1`.
pub fn poincare_bound(seq: &CorrelationSequence, threshold: f64) -> PoincareBound {
    let zero_prefix = seq.zero_prefix_len(threshold);
    let product = zero_prefix as f64 * seq.phi_p;
    PoincareBound {
        zero_prefix,
        product,
        holds: product <= 1.0 + POINCARE_SLACK,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhintchineReport {
    pub epsilon: f64,
    /// `φ(P)² − ε`.
    pub threshold: f64,
    /// Sorted `k ≤ k_max` with `c_k > threshold`.
    pub e: Vec<usize>,
    /// Largest gap between consecutive elements of `E ∪ {0}`; `k_max + 1`
    /// when `E` is empty.
    pub max_gap: usize,
    pub k_max: usize,
    /// Certified window length, when one was supplied.
    pub window_n: Option<usize>,
    /// Windows `{j, …, j+n−1} ⊆ [1, k_max]` that miss `E`.
    pub window_violations: usize,
    pub certified: bool,
}

/// Relative-density scan of `E = {k : c_k > φ(P)² − ε}`.
///
/// With `window_n` (from the mean-ergodic projection), every full window of
/// that length inside the scan range is checked against `E`.
pub fn khintchine_scan(seq: &CorrelationSequence, epsilon: f64, window_n: Option<usize>) -> Result<KhintchineReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {epsilon}")));
    }
    let threshold = seq.phi_p * seq.phi_p - epsilon;
    let e: Vec<usize> = (1..=seq.k_max()).filter(|&k| seq.value(k) > threshold).collect();
    let max_gap = if e.is_empty() {
        seq.k_max() + 1
    } else {
        std::iter::once(0)
            .chain(e.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    };
    let window_violations = match window_n {
        Some(0) => return Err(Error::InvalidInput("window length must be positive".into())),
        Some(n) if n <= seq.k_max() => {
            let mut in_e = vec![false; seq.k_max() + 1];
            for &k in &e {
                in_e[k] = true;
            }
            // Sliding count of E-members in {j, …, j+n−1}.
            let mut count = in_e[1..=n].iter().filter(|&&b| b).count();
            let mut violations = usize::from(count == 0);
            for j in 2..=(seq.k_max() + 1 - n) {
                count -= usize::from(in_e[j - 1]);
                count += usize::from(in_e[j + n - 1]);
                violations += usize::from(count == 0);
            }
            violations
        }
        _ => 0,
    };
    Ok(KhintchineReport {
        epsilon,
        threshold,
        max_gap,
        k_max: seq.k_max(),
        window_n,
        window_violations,
        certified: window_n.is_some(),
        e,
    })
}

/// Sampled check of `φ(τ(A*A)) ≤ φ(A*A) + tol`, the contractivity hypothesis
/// of the relative-density theorem.
pub fn check_contractivity(
    phi: &LinearFunctional,
    tau: &dyn StarHomomorphism,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<()> {
    let excess = contractivity_excess(phi, tau, samples, seed);
    if excess > tol {
        return Err(Error::ContractivityViolated { excess });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuousScan {
    /// `(t, tr(P τ_t(P)))`.
    pub samples: Vec<(f64, f64)>,
    /// `2‖H‖_op`.
    pub lipschitz_constant: f64,
    /// Worst `|f(t) − f(s)| − 2‖H‖|t − s|` over adjacent grid points.
    pub max_lipschitz_excess: f64,
    pub lipschitz_ok: bool,
}

/// Samples `t ↦ tr(P τ_t(P))` on a grid for a factor.
pub fn continuous_scan(sys: &BoundedQuantumSystem, p: &AlgebraElement, t_grid: &[f64]) -> Result<ContinuousScan> {
    let alg = sys.algebra();
    if !alg.is_factor() {
        return Err(Error::NotFactor {
            blocks: alg.num_blocks(),
        });
    }
    alg.check(p)?;
    require_projection(p)?;
    let tr = tracial_state(alg);
    let samples = t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| Ok((t, correlation(&tr, p, &sys.evolve(t, p)?, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let lipschitz_constant = 2.0 * sys.hamiltonian_norm();
    let max_lipschitz_excess = samples
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).abs() - lipschitz_constant * (w[1].0 - w[0].0).abs())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ContinuousScan {
        lipschitz_ok: max_lipschitz_excess <= LIPSCHITZ_SLACK,
        samples,
        lipschitz_constant,
        max_lipschitz_excess,
    })
}

/// One step of the moment iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecurrenceMoment {
    /// Sampling step used in this round.
    pub step: f64,
    /// `n(step)`, the first recurrence of the sampled sequence.
    pub n: usize,
    /// `n(step) · step`.
    pub moment: f64,
    /// `ω(τ_moment(P))` with `ω` the post-measurement state.
    pub probability: f64,
    /// `‖τ_step(P) − P‖_F ≤ 1e−9`: the step is (numerically) a period of
    /// the orbit of `P`, so the sampled sequence is constant.
    pub aliased: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentsReport {
    pub trace_p: f64,
    pub moments: Vec<RecurrenceMoment>,
}

/// `p(t) = ω(τ_t(P))` with `ω = tr(P · P)/tr(P)`.
fn return_probability(sys: &BoundedQuantumSystem, omega: &LinearFunctional, p: &AlgebraElement, t: f64) -> Result<f64> {
    Ok(omega.eval(&sys.evolve(t, p)?)?.re)
}

/// Unbounded sequence of recurrence moments: with step `t`, find `n(t)`,
/// emit `n(t)·t`, continue with step `n(t)·t + 1`; repeated `count` times.
pub fn recurrence_moments(
    sys: &BoundedQuantumSystem,
    p: &AlgebraElement,
    t: f64,
    count: usize,
    n_max: usize,
    threshold: f64,
) -> Result<MomentsReport> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {t}")));
    }
    let alg = sys.algebra();
    alg.check(p)?;
    require_projection(p)?;
    let tr = tracial_state(alg);
    let omega = luders_update(&tr, p)?;
    let trace_p = tr.eval_unchecked(p).re;

    let mut moments = Vec::with_capacity(count);
    let mut step = t;
    while moments.len() < count {
        let tau = Endomorphism::from_evolution(sys, step);
        let first_step = tau.apply(p);
        let aliased = (&first_step - p).frobenius_norm() <= ALIAS_TOL;
        let mut x = first_step;
        let mut found = None;
        for n in 1..=n_max {
            if n > 1 {
                x = tau.apply(&x);
            }
            if correlation(&tr, p, &x, n)? > threshold {
                found = Some(n);
                break;
            }
        }
        let Some(n) = found else {
            return Err(Error::SearchExhausted {
                n_max,
                found: moments.len(),
                partial: moments.iter().map(|m: &RecurrenceMoment| m.moment).collect(),
            });
        };
        let moment = n as f64 * step;
        let probability = return_probability(sys, &omega, p, moment)?;
        if !(probability > 0.0) {
            return Err(Error::InvariantViolation(format!(
                "return probability {probability} at moment {moment} is not positive"
            )));
        }
        moments.push(RecurrenceMoment {
            step,
            n,
            moment,
            probability,
            aliased,
        });
        step = moment + 1.0;
    }
    Ok(MomentsReport { trace_p, moments })
}

/// Half-width `δ` of a window around `center` on which the return
/// probability stays above `target`.
///
/// Candidates are `δ₀, δ₀/2, …, δ₀/2²⁰`; a candidate is accepted when all
/// [`WINDOW_SAMPLES`] equispaced points of `[center − δ, center + δ]` clear
/// the target. The first (largest) accepted candidate is returned.
pub fn recurrence_window(
    sys: &BoundedQuantumSystem,
    p: &AlgebraElement,
    center: f64,
    target: f64,
    delta0: f64,
) -> Result<f64> {
    if !(delta0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial half-width must be positive, got {delta0}"
        )));
    }
    let alg = sys.algebra();
    alg.check(p)?;
    require_projection(p)?;
    let omega = luders_update(&tracial_state(alg), p)?;
    let value = return_probability(sys, &omega, p, center)?;
    if !(value > target) {
        return Err(Error::CenterFails { value, target });
    }
    let mut delta = delta0;
    for _ in 0..=WINDOW_HALVINGS {
        let mut ok = true;
        for i in 0..WINDOW_SAMPLES {
            let s = center - delta + 2.0 * delta * i as f64 / (WINDOW_SAMPLES - 1) as f64;
            if !(return_probability(sys, &omega, p, s)? > target) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(delta);
        }
        delta *= 0.5;
    }
    Err(Error::InvariantViolation(format!(
        "no window of half-width ≥ {:e} around {center} stays above {target}",
        delta0 / f64::powi(2.0, WINDOW_HALVINGS as i32)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BlockAlgebra;
    use crate::classical::{
        classical_recurrence, embed_diagonal, random_invariant_measure, random_map, ClassicalSystem, Subset,
    };
    use crate::matrix::ComplexMatrix;
    use crate::random::{random_hermitian, random_projection, seeded_rng};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn two_level() -> BoundedQuantumSystem {
        let alg = BlockAlgebra::factor(2);
        let h = alg.element(vec![ComplexMatrix::from_real_diag(&[1.0, -1.0])]).unwrap();
        BoundedQuantumSystem::new(alg, h).unwrap()
    }

    fn p_plus() -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(vec![ComplexMatrix::from_real(&[&[0.5, 0.5], &[0.5, 0.5]])])
    }

    fn cycle_sequence(m: usize, s: &[usize], k_max: usize) -> CorrelationSequence {
        let sys = ClassicalSystem::cyclic_shift(m);
        let emb = embed_diagonal(&sys).unwrap();
        let p = emb.indicator(&sys.subset(s).unwrap());
        correlation_sequence(&emb.state, &p, &emb.endomorphism, k_max).unwrap()
    }

    #[test]
    fn identity_dynamics_is_constant() {
        let alg = BlockAlgebra::new(vec![2, 3], vec![0.5, 0.5]).unwrap();
        let mut rng = seeded_rng(1);
        let p = random_projection(&alg, &mut rng);
        let tr = tracial_state(&alg);
        let seq = correlation_sequence(&tr, &p, &Endomorphism::identity(&alg), 10).unwrap();
        assert!(seq.values.iter().all(|&c| (c - seq.phi_p).abs() < 1e-14));
        assert_eq!(first_recurrence(&seq, 0.0), Some(1));
        let k = khintchine_scan(&seq, 1e-3, None).unwrap();
        assert_eq!(k.e, (1..=10).collect::<Vec<_>>());
        assert_eq!(k.max_gap, 1);
    }

    #[test]
    fn two_level_sampled_sequence_matches_closed_form() {
        let sys = two_level();
        let tr = tracial_state(sys.algebra());
        for &step in &[0.1, 0.7, 2.0] {
            let tau = Endomorphism::from_evolution(&sys, step);
            let seq = correlation_sequence(&tr, &p_plus(), &tau, 50).unwrap();
            for k in 1..=50 {
                let t = k as f64 * step;
                assert!((seq.value(k) - t.cos().powi(2) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn four_cycle_sequence_and_bound() {
        let seq = cycle_sequence(4, &[0], 12);
        assert_eq!(&seq.values[..8], &[0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.25]);
        assert_eq!(first_recurrence(&seq, 0.0), Some(4));
        let b = poincare_bound(&seq, 0.0);
        assert_eq!(b.zero_prefix, 3);
        assert!((b.product - 0.75).abs() < 1e-15 && b.holds);
    }

    #[test]
    fn first_recurrence_not_found() {
        let seq = cycle_sequence(6, &[0], 5);
        assert_eq!(first_recurrence(&seq, 0.0), None);
        assert_eq!(poincare_bound(&seq, 0.0).zero_prefix, 5);
    }

    #[test]
    fn five_cycle_khintchine() {
        let seq = cycle_sequence(5, &[0], 40);
        let k = khintchine_scan(&seq, 0.01, None).unwrap();
        assert!((k.threshold - (0.04 - 0.01)).abs() < 1e-15);
        assert_eq!(k.e, vec![5, 10, 15, 20, 25, 30, 35, 40]);
        assert_eq!(k.max_gap, 5);
        assert!(!k.certified);

        let k = khintchine_scan(&seq, 0.01, Some(5)).unwrap();
        assert_eq!(k.window_violations, 0);
        let k = khintchine_scan(&seq, 0.01, Some(4)).unwrap();
        // Windows {1..4}, {6..9}, … miss E: one per period.
        assert_eq!(k.window_violations, 8);
        assert!(khintchine_scan(&seq, 0.0, None).is_err());
    }

    #[test]
    fn two_level_period_pi_makes_everything_recur() {
        let sys = two_level();
        let tr = tracial_state(sys.algebra());
        let seq = correlation_sequence(&tr, &p_plus(), &Endomorphism::from_evolution(&sys, PI), 30).unwrap();
        for eps in [1e-6, 0.1, 0.3] {
            let k = khintchine_scan(&seq, eps, None).unwrap();
            assert_eq!(k.e.len(), 30);
        }
    }

    #[test]
    fn contractivity_check() {
        let alg = BlockAlgebra::abelian(vec![0.7, 0.3]).unwrap();
        let swap = crate::classical::KoopmanEndomorphism::new(&alg, vec![1, 0]).unwrap();
        let tr = tracial_state(&alg);
        assert!(matches!(
            check_contractivity(&tr, &swap, 10, 0, 1e-10),
            Err(Error::ContractivityViolated { .. })
        ));
        let c4 = embed_diagonal(&ClassicalSystem::cyclic_shift(4)).unwrap();
        assert!(check_contractivity(&c4.state, &c4.endomorphism, 10, 0, 1e-10).is_ok());
    }

    #[test]
    fn continuous_two_level() {
        let sys = two_level();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 4.0 * PI / 200.0).collect();
        let scan = continuous_scan(&sys, &p_plus(), &grid).unwrap();
        assert!((scan.samples[0].1 - 0.5).abs() < 1e-15);
        let err = scan
            .samples
            .iter()
            .map(|&(t, v)| (v - t.cos().powi(2) / 2.0).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10);
        assert!(scan.lipschitz_ok);
        assert_eq!(scan.lipschitz_constant, 2.0);
    }

    #[test]
    fn continuous_refinement_halves_jumps() {
        let sys = two_level();
        let max_jump = |points: usize| {
            let grid: Vec<f64> = (0..=points).map(|i| i as f64 * PI / points as f64).collect();
            let s = continuous_scan(&sys, &p_plus(), &grid).unwrap().samples;
            s.windows(2).map(|w| (w[1].1 - w[0].1).abs()).fold(0.0, f64::max)
        };
        let coarse = max_jump(100);
        let fine = max_jump(200);
        assert!((coarse / fine - 2.0).abs() < 0.01, "{coarse} {fine}");
    }

    #[test]
    fn continuous_scan_requires_factor() {
        let alg = BlockAlgebra::new(vec![1, 1], vec![0.5, 0.5]).unwrap();
        let sys = BoundedQuantumSystem::new(alg.clone(), alg.zero()).unwrap();
        assert!(matches!(
            continuous_scan(&sys, &alg.identity(), &[0.0]),
            Err(Error::NotFactor { blocks: 2 })
        ));
    }

    #[test]
    fn moments_trivial_hamiltonian() {
        let alg = BlockAlgebra::factor(2);
        let sys = BoundedQuantumSystem::new(alg.clone(), alg.zero()).unwrap();
        let r = recurrence_moments(&sys, &p_plus(), 0.5, 4, 10, POSITIVITY_THRESHOLD).unwrap();
        let m: Vec<f64> = r.moments.iter().map(|m| m.moment).collect();
        assert_eq!(m, vec![0.5, 1.5, 2.5, 3.5]);
        assert!(r.moments.iter().all(|m| m.n == 1 && m.aliased));
    }

    #[test]
    fn moments_two_level() {
        let sys = two_level();
        let r = recurrence_moments(&sys, &p_plus(), PI, 5, 1000, POSITIVITY_THRESHOLD).unwrap();
        assert!((r.moments[0].moment - PI).abs() < 1e-15);
        assert!((r.moments[0].probability - 1.0).abs() < 1e-12);
        assert!(r.moments[0].aliased);
        assert!(r.moments.windows(2).all(|w| w[1].moment > w[0].moment));
        assert!(r.moments.iter().all(|m| m.probability > 0.0));
    }

    #[test]
    fn moments_search_exhausted() {
        // Step π/2 lands on P₋ ⟂ P₊ at every odd multiple; n_max = 1 misses.
        let sys = two_level();
        match recurrence_moments(&sys, &p_plus(), PI / 2.0, 3, 1, POSITIVITY_THRESHOLD) {
            Err(Error::SearchExhausted { found: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_two_level() {
        let sys = two_level();
        // Return probability is cos²(s); target 0.9 gives the window
        // |s − π| < arcsin(√0.1).
        let exact = 0.1f64.sqrt().asin();
        let delta = recurrence_window(&sys, &p_plus(), PI, 0.9, PI / 2.0).unwrap();
        assert!(delta <= exact && 2.0 * delta > exact, "{delta} vs {exact}");

        // Default target tr(P) − ε = 0.4.
        let delta = recurrence_window(&sys, &p_plus(), PI, 0.5 - 0.1, PI / 2.0).unwrap();
        assert!(delta <= 0.4f64.sqrt().acos() && 2.0 * delta > 0.4f64.sqrt().acos());

        // Negative target: every window qualifies.
        assert_eq!(
            recurrence_window(&sys, &p_plus(), PI, 0.5 - 0.7, PI / 2.0).unwrap(),
            PI / 2.0
        );

        let mut last = f64::INFINITY;
        for eps in [0.5, 0.3, 0.1, 0.03, 0.01, 0.001] {
            let d = recurrence_window(&sys, &p_plus(), PI, 1.0 - eps, PI / 2.0).unwrap();
            assert!(d <= last);
            last = d;
        }

        assert!(matches!(
            recurrence_window(&sys, &p_plus(), PI / 2.0, 0.5, PI / 2.0),
            Err(Error::CenterFails { .. })
        ));
    }

    #[test]
    fn rejects_non_projection() {
        let alg = BlockAlgebra::factor(2);
        let a = alg.identity().scale_real(2.0);
        let r = correlation_sequence(&tracial_state(&alg), &a, &Endomorphism::identity(&alg), 3);
        assert!(matches!(r, Err(Error::NotProjection { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn correlations_are_probabilities(seed in any::<u64>()) {
            let alg = BlockAlgebra::new(vec![2, 2, 3], vec![0.25, 0.25, 0.5]).unwrap();
            let mut rng = seeded_rng(seed);
            let p = random_projection(&alg, &mut rng);
            let tau = Endomorphism::new(alg.clone(), vec![1, 0, 2], crate::random::random_unitary(&alg, &mut rng)).unwrap();
            let tr = tracial_state(&alg);
            let seq = correlation_sequence(&tr, &p, &tau, 40).unwrap();
            prop_assert!(seq.values.iter().all(|&c| (-1e-12..=1.0 + 1e-12).contains(&c)));
            prop_assert!(poincare_bound(&seq, 1e-12).holds);
            // For a trace, φ(PτᵏP P) = φ(P τᵏ(P)).
            let mut x = p.clone();
            for k in 1..=5 {
                x = tau.apply(&x);
                let direct = tr.eval(&(&p * &x)).unwrap();
                prop_assert!((direct.re - seq.value(k)).abs() <= 1e-12);
                prop_assert!(direct.im.abs() <= 1e-12);
            }
        }

        #[test]
        fn embedded_pipeline_matches_classical(seed in any::<u64>(), m in 1usize..9) {
            let mut rng = seeded_rng(seed);
            let map = random_map(m, &mut rng);
            let sys = ClassicalSystem::new(random_invariant_measure(&map, &mut rng), map).unwrap();
            let emb = embed_diagonal(&sys).unwrap();
            for s in Subset::all(m) {
                if sys.measure(&s) <= 0.0 {
                    continue;
                }
                let cl = classical_recurrence(&sys, &s, 16).unwrap();
                let seq = correlation_sequence(&emb.state, &emb.indicator(&s), &emb.endomorphism, 16).unwrap();
                for (a, b) in cl.overlaps.iter().zip(&seq.values) {
                    prop_assert!((a - b).abs() <= 1e-13);
                }
                prop_assert_eq!(cl.first_n, first_recurrence(&seq, 0.0));
                // Abelian relative density: E ∪ {0} has gaps bounded by the
                // eventual period of the orbit.
                let k = khintchine_scan(&seq, 0.01, None).unwrap();
                prop_assert!(k.max_gap <= m);
            }
        }

        #[test]
        fn liouville_style_sequence_under_random_flow(seed in any::<u64>(), step in 0.05f64..3.0) {
            let alg = BlockAlgebra::factor(3);
            let mut rng = seeded_rng(seed);
            let sys = BoundedQuantumSystem::new(alg.clone(), random_hermitian(&alg, &mut rng)).unwrap();
            let p = random_projection(&alg, &mut rng);
            let tr = tracial_state(&alg);
            let seq = correlation_sequence(&tr, &p, &Endomorphism::from_evolution(&sys, step), 20).unwrap();
            for k in 1..=20 {
                let direct = tr.eval(&(&p * &sys.evolve(k as f64 * step, &p).unwrap())).unwrap().re;
                prop_assert!((direct - seq.value(k)).abs() <= 1e-10);
            }
        }
    }
}
