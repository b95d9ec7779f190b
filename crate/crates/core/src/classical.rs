//! Finite measure-preserving systems and their embedding as commutative
//! block algebras.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::algebra::{tracial_state, AlgebraElement, BlockAlgebra, LinearFunctional};
use crate::dynamics::StarHomomorphism;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::random::seeded_rng;

/// Tolerance on `Σ μ_i = 1` and on preimage masses.
pub const MEASURE_TOL: f64 = 1e-12;

/// `m` weighted points with a self-map `T`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalSystem {
    weights: Vec<f64>,
    map: Vec<usize>,
}

impl ClassicalSystem {
    pub fn new(weights: Vec<f64>, map: Vec<usize>) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::InvalidInput("classical system needs at least one point".into()));
        }
        if map.len() != m {
            return Err(Error::InvalidInput(format!(
                "{m} weights but map of length {}",
                map.len()
            )));
        }
        if let Some(i) = weights.iter().position(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weight {i} must be nonnegative and finite, got {}",
                weights[i]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > MEASURE_TOL {
            return Err(Error::InvalidInput(format!("weights must sum to 1 (got {sum:.17})")));
        }
        if let Some(i) = map.iter().position(|&t| t >= m) {
            return Err(Error::InvalidInput(format!(
                "map[{i}] = {} is out of range 0..{m}",
                map[i]
            )));
        }
        Ok(Self { weights, map })
    }

    /// Uniform weights.
    pub fn uniform(map: Vec<usize>) -> Result<Self> {
        let m = map.len();
        Self::new(vec![1.0 / m as f64; m], map)
    }

    /// `i ↦ i + 1 mod m` with uniform weights.
    pub fn cyclic_shift(m: usize) -> Self {
        Self::uniform((0..m).map(|i| (i + 1) % m).collect()).expect("valid shift")
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    /// `μ(T⁻¹{i})` for every point, by column sums of the map.
    pub fn preimage_masses(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.size()];
        for (j, &t) in self.map.iter().enumerate() {
            mass[t] += self.weights[j];
        }
        mass
    }

    /// `max_i |μ(T⁻¹{i}) − μ_i|`.
    pub fn preservation_defect(&self) -> f64 {
        self.preimage_masses()
            .iter()
            .zip(&self.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_measure_preserving(&self, tol: f64) -> bool {
        self.preservation_defect() <= tol
    }

    /// `μ(S)`.
    pub fn measure(&self, s: &Subset) -> f64 {
        s.indices.iter().map(|&i| self.weights[i]).sum()
    }

    /// `φ(g) = Σ g_i μ_i`.
    pub fn integrate(&self, g: &ClassicalFunction) -> Complex64 {
        g.values.iter().zip(&self.weights).map(|(v, &w)| v * w).sum()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Subset> {
        Subset::new(self.size(), indices)
    }
}

/// A subset of `{0..m−1}`, sorted and without repeats.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Subset {
    size: usize,
    indices: Vec<usize>,
}

impl Subset {
    pub fn new(size: usize, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= size) {
            return Err(Error::InvalidInput(format!("subset index {i} out of range 0..{size}")));
        }
        let mut indices = indices.to_vec();
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { size, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn indicator(&self) -> ClassicalFunction {
        let mut values = vec![Complex64::new(0.0, 0.0); self.size];
        for &i in &self.indices {
            values[i] = Complex64::new(1.0, 0.0);
        }
        ClassicalFunction { values }
    }

    /// Every subset of `{0..m−1}`, by bitmask.
    pub fn all(size: usize) -> impl Iterator<Item = Subset> {
        assert!(size < 32, "exhaustive subsets only for small spaces");
        (0u32..(1 << size)).map(move |mask| Subset {
            size,
            indices: (0..size).filter(|&i| mask & (1 << i) != 0).collect(),
        })
    }
}

/// A complex function on the point set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalFunction {
    pub values: Vec<Complex64>,
}

impl ClassicalFunction {
    pub fn constant(m: usize, c: Complex64) -> Self {
        Self { values: vec![c; m] }
    }

    pub fn pointwise_mul(&self, rhs: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&rhs.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            values: self.values.iter().map(Complex64::conj).collect(),
        }
    }
}

/// Koopman lift `g ↦ g ∘ T`.
pub fn koopman(sys: &ClassicalSystem, g: &ClassicalFunction) -> Result<ClassicalFunction> {
    if g.values.len() != sys.size() {
        return Err(Error::ShapeMismatch(format!(
            "function of length {} on a system of size {}",
            g.values.len(),
            sys.size()
        )));
    }
    Ok(ClassicalFunction {
        values: sys.map.iter().map(|&t| g.values[t]).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Prop31Report {
    pub measure_preserving: bool,
    pub functional_invariant: bool,
    pub equivalent: bool,
    /// Worst `|μ(T⁻¹{i}) − μ_i|`.
    pub preimage_defect: f64,
    /// Worst `|φ(g∘T) − φ(g)|` over indicators and random samples.
    pub functional_defect: f64,
}

/// Measure preservation versus invariance of `φ(g) = Σ g_i μ_i` under
/// Koopman composition, with 100 random functions drawn from seed 0.
pub fn check_prop31(sys: &ClassicalSystem, tol: f64) -> Prop31Report {
    check_prop31_seeded(sys, tol, 0)
}

/// As [`check_prop31`] with an explicit seed for the random functions.
///
/// A random `g` is accepted when `|φ(g∘T) − φ(g)| ≤ tol · (1 + Σ|g_i|)`: the
/// deviation is linear in `g`, so indicator deviations of at most `tol` can
/// add up to that much and no more.
pub fn check_prop31_seeded(sys: &ClassicalSystem, tol: f64, seed: u64) -> Prop31Report {
    let m = sys.size();
    let measure_preserving = sys.is_measure_preserving(tol);
    let preimage_defect = sys.preservation_defect();

    let deviation = |g: &ClassicalFunction| {
        let pulled = koopman(sys, g).expect("length matches");
        (sys.integrate(&pulled) - sys.integrate(g)).norm()
    };
    let mut functional_invariant = true;
    let mut functional_defect: f64 = 0.0;
    for i in 0..m {
        let d = deviation(
            &Subset {
                size: m,
                indices: vec![i],
            }
            .indicator(),
        );
        functional_defect = functional_defect.max(d);
        functional_invariant &= d <= tol;
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..100 {
        let g = ClassicalFunction {
            values: (0..m)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        };
        let d = deviation(&g);
        let l1: f64 = g.values.iter().map(|z| z.norm()).sum();
        functional_defect = functional_defect.max(d);
        functional_invariant &= d <= tol * (1.0 + l1);
    }
    Prop31Report {
        measure_preserving,
        functional_invariant,
        equivalent: measure_preserving == functional_invariant,
        preimage_defect,
        functional_defect,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalRecurrence {
    /// Least `n ≥ 1` with `μ(S ∩ T⁻ⁿ(S)) > 0`.
    pub first_n: Option<usize>,
    /// `overlaps[n − 1] = μ(S ∩ T⁻ⁿ(S))` for `n = 1..=n_max`.
    pub overlaps: Vec<f64>,
    pub measure: f64,
}

impl ClassicalRecurrence {
    pub fn overlap(&self, n: usize) -> f64 {
        self.overlaps[n - 1]
    }
}

/// Exact overlaps `μ(S ∩ T⁻ⁿ(S))` by following every point of `S`.
pub fn classical_recurrence(sys: &ClassicalSystem, s: &Subset, n_max: usize) -> Result<ClassicalRecurrence> {
    let defect = sys.preservation_defect();
    if defect > MEASURE_TOL {
        return Err(Error::NotMeasurePreserving { defect });
    }
    if s.size != sys.size() {
        return Err(Error::ShapeMismatch(format!(
            "subset of a {}-point space used on a {}-point system",
            s.size,
            sys.size()
        )));
    }
    let measure = sys.measure(s);
    if !(measure > 0.0) {
        return Err(Error::NullSet);
    }
    let mut pos: Vec<usize> = s.indices.clone();
    let mut overlaps = Vec::with_capacity(n_max);
    for _ in 0..n_max {
        for p in pos.iter_mut() {
            *p = sys.map[*p];
        }
        let overlap = s
            .indices
            .iter()
            .zip(&pos)
            .filter(|(_, &p)| s.contains(p))
            .map(|(&i, _)| sys.weights[i])
            .sum();
        overlaps.push(overlap);
    }
    let first_n = overlaps.iter().position(|&o| o > 0.0).map(|i| i + 1);
    Ok(ClassicalRecurrence {
        first_n,
        overlaps,
        measure,
    })
}

/// `τ(g)_i = g_{T(i)}` on a commutative block algebra. Not necessarily
/// surjective: non-invertible `T` gives a proper endomorphism.
#[derive(Clone, Debug)]
pub struct KoopmanEndomorphism {
    algebra: BlockAlgebra,
    map: Vec<usize>,
}

impl KoopmanEndomorphism {
    /// Composition with `map` on a commutative algebra.
    pub fn new(algebra: &BlockAlgebra, map: Vec<usize>) -> Result<Self> {
        if !algebra.is_abelian() {
            return Err(Error::InvalidInput(
                "Koopman composition needs a commutative algebra".into(),
            ));
        }
        let m = algebra.num_blocks();
        if map.len() != m || map.iter().any(|&t| t >= m) {
            return Err(Error::InvalidInput(format!("{map:?} is not a self-map of 0..{m}")));
        }
        Ok(Self {
            algebra: algebra.clone(),
            map,
        })
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }
}

impl StarHomomorphism for KoopmanEndomorphism {
    fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(self.map.iter().map(|&t| a.block(t).clone()).collect())
    }

    fn describe(&self) -> String {
        format!("Koopman composition with {:?}", self.map)
    }
}

/// A classical system realized inside the commutative C*-framework.
#[derive(Clone, Debug)]
pub struct EmbeddedSystem {
    pub algebra: BlockAlgebra,
    pub endomorphism: KoopmanEndomorphism,
    pub state: LinearFunctional,
    /// Original index of every kept (positive-weight) point.
    pub support: Vec<usize>,
}

impl EmbeddedSystem {
    /// `χ_S` as an algebra element; points outside the support are dropped.
    pub fn indicator(&self, s: &Subset) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(
            self.support
                .iter()
                .map(|&i| ComplexMatrix::from_real_diag(&[if s.contains(i) { 1.0 } else { 0.0 }]))
                .collect(),
        )
    }
}

/// Diagonal embedding: one 1×1 block per positive-weight point, with the
/// point weight as block weight and Koopman composition as dynamics.
///
/// Zero-weight points are dropped so the trace stays faithful; this needs
/// `T` to map the support into itself, which always holds for
/// measure-preserving maps.
pub fn embed_diagonal(sys: &ClassicalSystem) -> Result<EmbeddedSystem> {
    let support: Vec<usize> = (0..sys.size()).filter(|&i| sys.weights[i] > 0.0).collect();
    let mut new_index = vec![usize::MAX; sys.size()];
    for (k, &i) in support.iter().enumerate() {
        new_index[i] = k;
    }
    let map = support
        .iter()
        .map(|&i| {
            let t = new_index[sys.map[i]];
            if t == usize::MAX {
                Err(Error::InvalidInput(format!(
                    "point {i} has positive weight but maps to zero-weight point {}",
                    sys.map[i]
                )))
            } else {
                Ok(t)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = support.iter().map(|&i| sys.weights[i]).collect();
    let algebra = BlockAlgebra::abelian(weights)?;
    Ok(EmbeddedSystem {
        endomorphism: KoopmanEndomorphism {
            algebra: algebra.clone(),
            map,
        },
        state: tracial_state(&algebra),
        algebra,
        support,
    })
}

/// Uniformly random self-map of `{0..m−1}`.
pub fn random_map(m: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..m).map(|_| rng.gen_range(0..m)).collect()
}

/// Periodic cycles of a self-map, each listed from its smallest point.
pub fn cycles(map: &[usize]) -> Vec<Vec<usize>> {
    let m = map.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; m];
    let mut out = Vec::new();
    for start in 0..m {
        let mut path = Vec::new();
        let mut x = start;
        while state[x] == 0 {
            state[x] = 1;
            path.push(x);
            x = map[x];
        }
        if state[x] == 1 {
            let from = path.iter().position(|&p| p == x).expect("on path");
            let mut cycle = path[from..].to_vec();
            let min_pos = cycle
                .iter()
                .enumerate()
                .min_by_key(|(_, &v)| v)
                .map(|(i, _)| i)
                .unwrap();
            cycle.rotate_left(min_pos);
            out.push(cycle);
        }
        for p in path {
            state[p] = 2;
        }
    }
    out
}

/// Random invariant probability measure for `map`: a random convex
/// combination of uniform measures on its cycles. Transient points get
/// weight zero.
pub fn random_invariant_measure(map: &[usize], rng: &mut impl Rng) -> Vec<f64> {
    let cyc = cycles(map);
    let coef: Vec<f64> = cyc.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = coef.iter().sum();
    let mut w = vec![0.0; map.len()];
    for (c, a) in cyc.iter().zip(&coef) {
        let each = a / total / c.len() as f64;
        for &i in c {
            w[i] = each;
        }
    }
    w
}

/// Random probability vector with every entry positive.
pub fn random_measure(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::apply_endo;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn validation() {
        assert!(ClassicalSystem::new(vec![0.5, 0.4], vec![0, 1]).is_err());
        assert!(ClassicalSystem::new(vec![0.5, 0.5], vec![0, 2]).is_err());
        assert!(ClassicalSystem::new(vec![1.5, -0.5], vec![0, 1]).is_err());
        assert!(ClassicalSystem::new(vec![], vec![]).is_err());
    }

    #[test]
    fn koopman_examples() {
        let id = ClassicalSystem::uniform(vec![0, 1, 2]).unwrap();
        let g = ClassicalFunction {
            values: vec![c(1.0), Complex64::new(2.0, 1.0), c(-3.0)],
        };
        assert_eq!(koopman(&id, &g).unwrap(), g);

        // χ_{0} ∘ T is the indicator of T⁻¹{0} = {3}.
        let shift = ClassicalSystem::cyclic_shift(4);
        let chi0 = shift.subset(&[0]).unwrap().indicator();
        assert_eq!(koopman(&shift, &chi0).unwrap(), shift.subset(&[3]).unwrap().indicator());

        let k = ClassicalFunction::constant(4, Complex64::new(0.5, -2.0));
        let t = ClassicalSystem::uniform(vec![2, 2, 0, 1]).unwrap();
        assert_eq!(koopman(&t, &k).unwrap(), k);

        assert!(matches!(koopman(&t, &g), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn prop31_examples() {
        let perm = ClassicalSystem::uniform(vec![2, 0, 3, 1, 4]).unwrap();
        let r = check_prop31(&perm, 1e-12);
        assert!(r.measure_preserving && r.functional_invariant && r.equivalent);

        let swap = ClassicalSystem::new(vec![0.7, 0.3], vec![1, 0]).unwrap();
        let r = check_prop31(&swap, 1e-12);
        assert!(!r.measure_preserving && !r.functional_invariant && r.equivalent);
        assert!((r.preimage_defect - 0.4).abs() < 1e-15);

        let one = ClassicalSystem::new(vec![1.0], vec![0]).unwrap();
        let r = check_prop31(&one, 1e-12);
        assert!(r.measure_preserving && r.functional_invariant);
    }

    #[test]
    fn recurrence_examples() {
        let id = ClassicalSystem::uniform(vec![0, 1, 2]).unwrap();
        let s = id.subset(&[1, 2]).unwrap();
        let r = classical_recurrence(&id, &s, 3).unwrap();
        assert_eq!(r.first_n, Some(1));
        assert!((r.overlap(1) - 2.0 / 3.0).abs() < 1e-15);

        let c4 = ClassicalSystem::cyclic_shift(4);
        let r = classical_recurrence(&c4, &c4.subset(&[0]).unwrap(), 4).unwrap();
        assert_eq!(r.first_n, Some(4));
        assert_eq!(r.overlaps, vec![0.0, 0.0, 0.0, 0.25]);

        let c5 = ClassicalSystem::cyclic_shift(5);
        let r = classical_recurrence(&c5, &c5.subset(&[0, 1]).unwrap(), 5).unwrap();
        assert_eq!(r.first_n, Some(1));
        assert!((r.overlap(1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn recurrence_errors() {
        let swap = ClassicalSystem::new(vec![0.7, 0.3], vec![1, 0]).unwrap();
        assert!(matches!(
            classical_recurrence(&swap, &swap.subset(&[0]).unwrap(), 3),
            Err(Error::NotMeasurePreserving { .. })
        ));
        let sys = ClassicalSystem::new(vec![0.0, 1.0], vec![1, 1]).unwrap();
        assert!(matches!(
            classical_recurrence(&sys, &sys.subset(&[0]).unwrap(), 3),
            Err(Error::NullSet)
        ));
    }

    #[test]
    fn embedding_examples() {
        let c4 = ClassicalSystem::cyclic_shift(4);
        let emb = embed_diagonal(&c4).unwrap();
        assert!((emb.state.eval(&emb.algebra.identity()).unwrap() - 1.0).norm() < 1e-15);
        let chi = emb.indicator(&c4.subset(&[0]).unwrap());
        let seq: Vec<f64> = (1..=8)
            .map(|n| {
                let tn = apply_endo(&emb.endomorphism, &chi, n).unwrap();
                emb.state.eval(&(&chi * &tn)).unwrap().re
            })
            .collect();
        assert_eq!(seq, vec![0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.25]);

        let whole = emb.indicator(&c4.subset(&[0, 1, 2, 3]).unwrap());
        for n in 0..5 {
            let tn = apply_endo(&emb.endomorphism, &whole, n).unwrap();
            assert!((emb.state.eval(&(&whole * &tn)).unwrap() - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn embedding_drops_zero_weight_points() {
        // 0 → 1 → 2 → 1: point 0 is transient and carries no mass.
        let sys = ClassicalSystem::new(vec![0.0, 0.5, 0.5], vec![1, 2, 1]).unwrap();
        let emb = embed_diagonal(&sys).unwrap();
        assert_eq!(emb.support, vec![1, 2]);
        assert_eq!(emb.endomorphism.map(), &[1, 0]);

        let bad = ClassicalSystem::new(vec![0.5, 0.5, 0.0], vec![2, 0, 1]).unwrap();
        assert!(embed_diagonal(&bad).is_err());
    }

    #[test]
    fn cycle_detection() {
        let map = vec![1, 2, 0, 0, 5, 4, 6];
        assert_eq!(cycles(&map), vec![vec![0, 1, 2], vec![4, 5], vec![6]]);
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let map = random_map(9, &mut rng);
            let w = random_invariant_measure(&map, &mut rng);
            let sys = ClassicalSystem::new(w, map).unwrap();
            assert!(sys.is_measure_preserving(1e-15));
        }
    }

    proptest! {
        #[test]
        fn koopman_is_unital_star_homomorphism(seed in any::<u64>(), m in 1usize..12) {
            let mut rng = seeded_rng(seed);
            let sys = ClassicalSystem::new(random_measure(m, &mut rng), random_map(m, &mut rng)).unwrap();
            let rand_fn = |rng: &mut crate::random::SeededRng| ClassicalFunction {
                values: (0..m).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
            };
            let g = rand_fn(&mut rng);
            let h = rand_fn(&mut rng);
            let k = |f: &ClassicalFunction| koopman(&sys, f).unwrap();
            prop_assert_eq!(k(&g.pointwise_mul(&h)), k(&g).pointwise_mul(&k(&h)));
            prop_assert_eq!(k(&g.conj()), k(&g).conj());
            let one = ClassicalFunction::constant(m, Complex64::new(1.0, 0.0));
            prop_assert_eq!(k(&one), one);
        }

        #[test]
        fn poincare_bound_on_zero_prefix(seed in any::<u64>(), m in 1usize..12) {
            let mut rng = seeded_rng(seed);
            let map = random_map(m, &mut rng);
            let sys = ClassicalSystem::new(random_invariant_measure(&map, &mut rng), map).unwrap();
            for s in Subset::all(m) {
                if sys.measure(&s) <= 0.0 {
                    continue;
                }
                let r = classical_recurrence(&sys, &s, 2 * m).unwrap();
                let zeros = r.overlaps.iter().take_while(|&&o| o == 0.0).count();
                prop_assert!(zeros as f64 * r.measure <= 1.0 + 1e-12);
                prop_assert!(r.first_n.is_some());
            }
        }
    }
}
