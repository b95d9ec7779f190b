//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use vnrecur::algebra::{luders_update, tracial_state, AlgebraElement, BlockAlgebra, LinearFunctional};
use vnrecur::classical::{
    check_prop31_seeded, classical_recurrence, embed_diagonal, random_invariant_measure, random_map, random_measure,
    ClassicalSystem, Subset, MEASURE_TOL,
};
use vnrecur::dynamics::{verify_liouville, von_neumann_check, BoundedQuantumSystem, Endomorphism, StarHomomorphism};
use vnrecur::gns::{ergodic_projection, extend_endomorphism, gns_construct, khintchine_bound_check, DEFAULT_N_MAX};
use vnrecur::matrix::ComplexMatrix;
use vnrecur::random::{random_element, random_hermitian, random_projection, random_unitary, seeded_rng};
use vnrecur::recurrence::{
    continuous_scan, correlation_sequence, first_recurrence, khintchine_scan, POSITIVITY_THRESHOLD,
};
use vnrecur::runner::{execute, RunOptions};
use vnrecur::scenario::{parse, prepare, PreparedSystem, BUNDLED};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Random density in the normalized-trace convention.
fn random_density(alg: &BlockAlgebra, rng: &mut impl Rng) -> AlgebraElement {
    let a = random_element(alg, rng);
    let aa = &a.adjoint() * &a;
    let t = alg.trace(&aa).unwrap().re;
    aa.scale_real(1.0 / t)
}

fn random_algebra(rng: &mut impl Rng, min_dim: usize) -> BlockAlgebra {
    let k = rng.gen_range(1..=3);
    let dims: Vec<usize> = (0..k).map(|_| rng.gen_range(min_dim..=3)).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    BlockAlgebra::new(dims, weights).unwrap()
}

fn c1_liouville() -> Check {
    let alg = BlockAlgebra::new(vec![4, 3], vec![0.5, 0.5]).map_err(err)?;
    let times = [0.1, 0.5, 1.0, 5.0, 10.0];
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = seeded_rng(seed);
        let sys = BoundedQuantumSystem::new(alg.clone(), random_hermitian(&alg, &mut rng)).map_err(err)?;
        worst = worst.max(verify_liouville(&sys, 1, &times, seed + 1000).max_deviation);
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e} > 1e-10"))?;
    Ok(format!("max |tr(τ_t(A)) − tr(A)| = {worst:.2e}"))
}

fn two_level() -> (BoundedQuantumSystem, AlgebraElement) {
    let alg = BlockAlgebra::factor(2);
    let h = alg.element(vec![ComplexMatrix::from_real_diag(&[1.0, -1.0])]).unwrap();
    let p = alg
        .element(vec![ComplexMatrix::from_real(&[&[0.5, 0.5], &[0.5, 0.5]])])
        .unwrap();
    (BoundedQuantumSystem::new(alg, h).unwrap(), p)
}

fn c2_two_level() -> Check {
    let (sys, p) = two_level();
    let grid: Vec<f64> = (0..1000).map(|i| 4.0 * PI * i as f64 / 999.0).collect();
    let scan = continuous_scan(&sys, &p, &grid).map_err(err)?;
    let worst = scan
        .samples
        .iter()
        .map(|&(t, c)| (c - t.cos().powi(2) / 2.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 1e-10, || format!("max error {worst:e}"))?;
    Ok(format!("max |c(t) − cos²(t)/2| = {worst:.2e} over 1000 points"))
}

fn c3_poincare() -> Check {
    let mut cases = 0;
    for m in 1..=12 {
        let sys = ClassicalSystem::cyclic_shift(m);
        let emb = embed_diagonal(&sys).map_err(err)?;
        for i in 0..m {
            let s = sys.subset(&[i]).map_err(err)?;
            let seq = correlation_sequence(&emb.state, &emb.indicator(&s), &emb.endomorphism, 2 * m).map_err(err)?;
            let n = seq.zero_prefix_len(POSITIVITY_THRESHOLD);
            let mu = sys.measure(&s);
            ensure(n as f64 * mu <= 1.0 + 1e-9, || {
                format!("m = {m}, S = {{{i}}}: N·μ = {}", n as f64 * mu)
            })?;
            let first = first_recurrence(&seq, POSITIVITY_THRESHOLD);
            ensure(first == Some(m), || {
                format!("m = {m}, S = {{{i}}}: first recurrence {first:?}")
            })?;
            cases += 1;
        }
    }
    Ok(format!("{cases} (shift, singleton) cases: N·μ ≤ 1 and n = m"))
}

fn c4_agreement() -> Check {
    let mut worst: f64 = 0.0;
    let mut compared = 0usize;
    for seed in 0..200 {
        let mut rng = seeded_rng(seed);
        let m = rng.gen_range(1..=8);
        let map = random_map(m, &mut rng);
        let weights = random_invariant_measure(&map, &mut rng);
        let sys = ClassicalSystem::new(weights, map).map_err(err)?;
        let emb = embed_diagonal(&sys).map_err(err)?;
        for s in Subset::all(m) {
            if sys.measure(&s) <= 0.0 {
                continue;
            }
            let classical = classical_recurrence(&sys, &s, 20).map_err(err)?;
            let seq = correlation_sequence(&emb.state, &emb.indicator(&s), &emb.endomorphism, 20).map_err(err)?;
            for (a, b) in classical.overlaps.iter().zip(&seq.values) {
                worst = worst.max((a - b).abs());
            }
            compared += 1;
        }
    }
    ensure(worst <= 1e-13, || format!("max disagreement {worst:e}"))?;
    Ok(format!("{compared} subsets, n ≤ 20: max disagreement {worst:.2e}"))
}

/// Certified Khintchine scan; returns (window, max_gap, E prefix, violations).
fn certified_scan(
    phi: &LinearFunctional,
    p: &AlgebraElement,
    tau: &dyn StarHomomorphism,
    epsilon: f64,
    k_max: usize,
) -> Result<(usize, usize, Vec<usize>, usize), String> {
    let g = extend_endomorphism(&gns_construct(phi.algebra(), phi).map_err(err)?, tau).map_err(err)?;
    let erg = ergodic_projection(&g, &g.embed(p).map_err(err)?, epsilon, DEFAULT_N_MAX).map_err(err)?;
    let seq = correlation_sequence(phi, p, tau, k_max).map_err(err)?;
    let rep = khintchine_scan(&seq, epsilon, Some(erg.n)).map_err(err)?;
    Ok((erg.n, rep.max_gap, rep.e, rep.window_violations))
}

fn c5_khintchine() -> Check {
    let k_max = 10_000;
    let sys = ClassicalSystem::cyclic_shift(5);
    let emb = embed_diagonal(&sys).map_err(err)?;
    let p = emb.indicator(&sys.subset(&[0]).map_err(err)?);
    let (n, gap, e, violations) = certified_scan(&emb.state, &p, &emb.endomorphism, 0.01, k_max)?;
    ensure(violations == 0, || {
        format!("5-cycle: {violations} windows of length {n} miss E")
    })?;
    ensure(gap == 5, || format!("5-cycle: max_gap {gap}"))?;
    let expected: Vec<usize> = (1..=k_max / 5).map(|j| 5 * j).collect();
    ensure(e == expected, || "5-cycle: E is not the multiples of 5".into())?;

    let mut windows = Vec::new();
    for seed in 0..20 {
        let mut rng = seeded_rng(seed);
        let b = rng.gen_range(2..=4);
        let d = rng.gen_range(1..=2);
        let alg = BlockAlgebra::new(vec![d; b], vec![1.0 / b as f64; b]).map_err(err)?;
        let mut perm: Vec<usize> = (0..b).collect();
        perm.shuffle(&mut rng);
        let tau = Endomorphism::new(alg.clone(), perm, random_unitary(&alg, &mut rng)).map_err(err)?;
        let p = random_projection(&alg, &mut rng);
        let (n, _, _, violations) =
            certified_scan(&tracial_state(&alg), &p, &tau, 0.01, k_max).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(violations == 0, || {
            format!("seed {seed}: {violations} windows of length {n} miss E")
        })?;
        windows.push(n);
    }
    Ok(format!(
        "5-cycle: window {n}, max_gap 5, E = 5ℕ; 20 block-permutation systems (ε = 0.01) with windows {windows:?}, 0 violations"
    ))
}

fn bundled_dynamics(sys: &PreparedSystem) -> Option<(LinearFunctional, AlgebraElement, Box<dyn StarHomomorphism>)> {
    match sys {
        PreparedSystem::Quantum(q) => {
            let p = q.projection.clone()?;
            let tau: Endomorphism = match (&q.dynamics, &q.hamiltonian) {
                (Some(d), _) => d.clone(),
                (None, Some(h)) => Endomorphism::from_evolution(h, 1.0),
                (None, None) => Endomorphism::identity(&q.algebra),
            };
            Some((q.state.clone(), p, Box::new(tau)))
        }
        PreparedSystem::Classical(c) => {
            let emb = c.embedded.as_ref()?;
            let p = emb.indicator(c.subset.as_ref()?);
            Some((emb.state.clone(), p, Box::new(emb.endomorphism.clone())))
        }
    }
}

fn c6_gns() -> Check {
    let mut rng = seeded_rng(6);
    let algebras = [
        BlockAlgebra::factor(2),
        BlockAlgebra::factor(3),
        BlockAlgebra::new(vec![2, 2], vec![0.5, 0.5]).map_err(err)?,
    ];
    let mut worst_norm: f64 = 0.0;
    for alg in &algebras {
        let g = gns_construct(alg, &tracial_state(alg)).map_err(err)?;
        let ver = g.verify().map_err(err)?;
        ensure(ver.holds(1e-10), || format!("{:?}: {ver:?}", alg.dims()))?;
        ensure(ver.dim == alg.dimension(), || {
            format!("{:?}: GNS dimension {}", alg.dims(), ver.dim)
        })?;
        let perms: Vec<Vec<usize>> = if alg.num_blocks() == 2 {
            vec![vec![0, 1], vec![1, 0]]
        } else {
            vec![vec![0]]
        };
        for perm in perms {
            let tau = Endomorphism::new(alg.clone(), perm, random_unitary(alg, &mut rng)).map_err(err)?;
            let ver = extend_endomorphism(&g, &tau).map_err(err)?.verify().map_err(err)?;
            let nrm = ver.tau_bar_norm.unwrap_or(f64::INFINITY);
            ensure(ver.holds(1e-10) && nrm <= 1.0 + 1e-10, || format!("‖τ̄‖ = {nrm}"))?;
            worst_norm = worst_norm.max(nrm);
        }
    }
    let mut checked = Vec::new();
    for (name, text) in BUNDLED {
        let prepared = prepare(parse(text).map_err(err)?).map_err(err)?;
        let Some((phi, p, tau)) = bundled_dynamics(&prepared.system) else {
            continue;
        };
        let g = extend_endomorphism(&gns_construct(phi.algebra(), &phi).map_err(err)?, tau.as_ref()).map_err(err)?;
        let nrm = g.verify().map_err(err)?.tau_bar_norm.unwrap_or(f64::INFINITY);
        worst_norm = worst_norm.max(nrm);
        let erg = ergodic_projection(&g, &g.embed(&p).map_err(err)?, 0.01, DEFAULT_N_MAX).map_err(err)?;
        let bound = khintchine_bound_check(&g, &erg, &p, tau.as_ref()).map_err(err)?;
        ensure(bound.ok && nrm <= 1.0 + 1e-10, || {
            format!("{name}: {bound:?}, ‖τ̄‖ = {nrm}")
        })?;
        checked.push(*name);
    }
    ensure(checked.len() == BUNDLED.len(), || {
        format!("only {checked:?} carry dynamics")
    })?;
    Ok(format!(
        "tr on M2, M3, M2⊕M2 reproduced; max ‖τ̄‖ = {worst_norm:.12}; bound ok for {} bundled scenarios",
        checked.len()
    ))
}

fn c7_prop31() -> Check {
    let (mut preserving, mut invertible) = (0, 0);
    for seed in 0..500u64 {
        let mut rng = seeded_rng(seed);
        let m = rng.gen_range(1..=10);
        let map = random_map(m, &mut rng);
        let weights = if seed % 2 == 0 {
            random_invariant_measure(&map, &mut rng)
        } else {
            random_measure(m, &mut rng)
        };
        let mut image = map.clone();
        image.sort_unstable();
        image.dedup();
        invertible += usize::from(image.len() == m);
        let sys = ClassicalSystem::new(weights, map).map_err(err)?;
        let rep = check_prop31_seeded(&sys, MEASURE_TOL, seed);
        ensure(rep.equivalent, || format!("seed {seed}: {rep:?}"))?;
        preserving += usize::from(rep.measure_preserving);
    }
    Ok(format!(
        "500 systems ({preserving} measure preserving, {} non-invertible): predicates agree",
        500 - invertible
    ))
}

fn c8_luders() -> Check {
    let mut cases = 0;
    let mut seed = 0u64;
    while cases < 200 {
        let mut rng = seeded_rng(seed);
        seed += 1;
        let alg = random_algebra(&mut rng, 1);
        let omega = LinearFunctional::density_state(&alg, random_density(&alg, &mut rng)).map_err(err)?;
        let p = random_projection(&alg, &mut rng);
        if omega.eval(&p).map_err(err)?.re <= 1e-6 {
            continue;
        }
        let updated = luders_update(&omega, &p).map_err(err)?;
        let unit = updated.eval(&alg.identity()).map_err(err)?;
        ensure((unit - 1.0).norm() <= 1e-12, || format!("seed {seed}: ω′(1) = {unit}"))?;
        for _ in 0..10 {
            let a = random_element(&alg, &mut rng);
            let v = updated.eval(&(&a.adjoint() * &a)).map_err(err)?.re;
            ensure(v >= -1e-11, || format!("seed {seed}: ω′(A*A) = {v:e}"))?;
        }
        let posterior = updated.eval(&p).map_err(err)?.re;
        ensure((posterior - 1.0).abs() <= 1e-10, || {
            format!("seed {seed}: ω′(P) = {posterior}")
        })?;
        let again = luders_update(&updated, &p).map_err(err)?.eval(&p).map_err(err)?.re;
        ensure((again - 1.0).abs() <= 1e-10, || {
            format!("seed {seed}: repeated probability {again}")
        })?;
        cases += 1;
    }
    Ok("200 cases: ω′ is a state, ω′(P) = 1, repeat gives 1".into())
}

fn c9_von_neumann() -> Check {
    let mut ratios = Vec::new();
    for seed in 0..20 {
        let mut rng = seeded_rng(seed);
        // Non-commutative blocks, so ρ and H generically do not commute.
        let alg = random_algebra(&mut rng, 2);
        let h = random_hermitian(&alg, &mut rng).scale_real(2.0);
        let sys = BoundedQuantumSystem::new(alg.clone(), h).map_err(err)?;
        let rho = random_density(&alg, &mut rng);
        let coarse = von_neumann_check(&sys, &rho, 0.7, 1e-3).map_err(err)?.residual;
        let fine = von_neumann_check(&sys, &rho, 0.7, 5e-4).map_err(err)?.residual;
        let r = coarse / fine;
        ensure((3.0..=5.0).contains(&r), || format!("seed {seed}: ratio {r}"))?;
        ratios.push(r);
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok(format!(
        "{} systems: residual ratio in [{lo:.4}, {hi:.4}]",
        ratios.len()
    ))
}

fn c10_determinism() -> Check {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    for (name, text) in BUNDLED {
        let prepared = prepare(parse(text).map_err(err)?).map_err(err)?;
        for dir in [a.path(), b.path()] {
            let outcome = execute(&prepared, &RunOptions::default()).map_err(err)?;
            ensure(outcome.passed(), || format!("{name}: {:?}", outcome.failures))?;
            outcome.write(dir).map_err(err)?;
        }
        for ext in ["summary.txt", "report.json", "csv"] {
            let file = format!("{name}.{ext}");
            let x = std::fs::read(a.path().join(&file)).map_err(err)?;
            let y = std::fs::read(b.path().join(&file)).map_err(err)?;
            ensure(x == y, || format!("{file} differs between runs"))?;
        }
    }
    Ok(format!("{} bundled scenarios: byte-identical outputs", BUNDLED.len()))
}

/// Label, check, runtime budget in seconds.
type Criterion = (&'static str, fn() -> Check, u64);

fn main() {
    let criteria: [Criterion; 10] = [
        ("Liouville invariance of the trace", c1_liouville, 2),
        ("two-level closed form", c2_two_level, 1),
        ("Poincaré quantitative bound", c3_poincare, 1),
        ("classical–quantum agreement", c4_agreement, 30),
        ("certified Khintchine windows", c5_khintchine, 60),
        ("GNS reproduction", c6_gns, 5),
        ("measure preservation ⇔ functional invariance", c7_prop31, 5),
        ("Lüders update", c8_luders, 2),
        ("von Neumann central differences", c9_von_neumann, 2),
        ("determinism", c10_determinism, 60),
    ];
    let mut failed = 0;
    for (i, (label, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        // Runtime budgets refer to optimized builds.
        let over = !cfg!(debug_assertions) && elapsed > Duration::from_secs(*budget);
        let timing = format!("{:.2}s / {budget}s", elapsed.as_secs_f64());
        match result {
            Ok(detail) if !over => println!("PASS {:>2} {label}: {detail} [{timing}]", i + 1),
            Ok(detail) => {
                failed += 1;
                println!("FAIL {:>2} {label}: over runtime budget; {detail} [{timing}]", i + 1);
            }
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {label}: {why} [{timing}]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
