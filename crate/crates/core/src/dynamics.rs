//! Time evolution of bounded quantum systems and discrete trace-preserving
//! *-endomorphisms.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{AlgebraElement, BlockAlgebra, LinearFunctional};
use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, unitary_exp_from_eig, EigDecomposition, DEFAULT_EIG_TOL};
use crate::random::{random_element, seeded_rng};

/// Hermiticity tolerance for Hamiltonians, per block.
pub const HAMILTONIAN_TOL: f64 = 1e-10;
/// Unitarity tolerance for endomorphism unitaries, per block.
pub const UNITARY_TOL: f64 = 1e-10;

/// A unital *-homomorphism of a block algebra into itself.
pub trait StarHomomorphism {
    fn algebra(&self) -> &BlockAlgebra;

    /// `τ(A)`; `A` is assumed to belong to `self.algebra()`.
    fn apply(&self, a: &AlgebraElement) -> AlgebraElement;

    /// Short human-readable label used in reports.
    fn describe(&self) -> String;
}

/// `τⁿ(A)`.
pub fn apply_endo(tau: &dyn StarHomomorphism, a: &AlgebraElement, n: usize) -> Result<AlgebraElement> {
    tau.algebra().check(a)?;
    let mut x = a.clone();
    for _ in 0..n {
        x = tau.apply(&x);
    }
    Ok(x)
}

/// `(𝔐, H)` with `H` Hermitian and block diagonal, so `e^{−iHt} ∈ 𝔐`.
#[derive(Clone, Debug)]
pub struct BoundedQuantumSystem {
    algebra: BlockAlgebra,
    hamiltonian: AlgebraElement,
    spectra: Vec<EigDecomposition>,
}

impl BoundedQuantumSystem {
    pub fn new(algebra: BlockAlgebra, hamiltonian: AlgebraElement) -> Result<Self> {
        algebra.check(&hamiltonian)?;
        for b in hamiltonian.blocks() {
            let defect = b.hermiticity_defect();
            if defect > HAMILTONIAN_TOL {
                return Err(Error::NotHermitian { defect });
            }
        }
        let spectra = hamiltonian
            .blocks()
            .iter()
            .map(|b| hermitian_eig(b, DEFAULT_EIG_TOL))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            algebra,
            hamiltonian,
            spectra,
        })
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn hamiltonian(&self) -> &AlgebraElement {
        &self.hamiltonian
    }

    /// `‖H‖_op`, from the cached spectra.
    pub fn hamiltonian_norm(&self) -> f64 {
        self.spectra
            .iter()
            .flat_map(|e| e.eigenvalues.iter().map(|l| l.abs()))
            .fold(0.0, f64::max)
    }

    /// `U_t = e^{−iHt}` block by block.
    pub fn propagator(&self, t: f64) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(self.spectra.iter().map(|e| unitary_exp_from_eig(e, t)).collect())
    }

    /// `τ_t(A) = U_t* A U_t`.
    pub fn evolve(&self, t: f64, a: &AlgebraElement) -> Result<AlgebraElement> {
        self.algebra.check(a)?;
        Ok(conjugate(&self.propagator(t), a))
    }
}

/// `U* A U`.
fn conjugate(u: &AlgebraElement, a: &AlgebraElement) -> AlgebraElement {
    &(&u.adjoint() * a) * u
}

/// `τ(A) = U* σ(A) U`, where `σ` permutes equal blocks: `σ(A)_k = A_{π(k)}`.
#[derive(Clone, Debug)]
pub struct Endomorphism {
    algebra: BlockAlgebra,
    block_permutation: Vec<usize>,
    unitary: AlgebraElement,
    label: String,
}

impl Endomorphism {
    pub fn new(algebra: BlockAlgebra, block_permutation: Vec<usize>, unitary: AlgebraElement) -> Result<Self> {
        let k = algebra.num_blocks();
        if block_permutation.len() != k {
            return Err(Error::InvalidInput(format!(
                "permutation has length {}, algebra has {k} blocks",
                block_permutation.len()
            )));
        }
        let mut seen = vec![false; k];
        for (i, &j) in block_permutation.iter().enumerate() {
            if j >= k || seen[j] {
                return Err(Error::InvalidInput(format!(
                    "block_permutation {block_permutation:?} is not a permutation of 0..{k}"
                )));
            }
            seen[j] = true;
            if algebra.dims()[i] != algebra.dims()[j] || algebra.weights()[i] != algebra.weights()[j] {
                return Err(Error::InvalidInput(format!(
                    "blocks {i} and {j} differ in dimension or weight and cannot be permuted"
                )));
            }
        }
        algebra.check(&unitary)?;
        let defect = unitary.unitarity_defect();
        if defect > UNITARY_TOL {
            return Err(Error::InvalidInput(format!(
                "endomorphism unitary has ‖U*U − I‖ = {defect:e}"
            )));
        }
        let label = format!("permutation {block_permutation:?} then unitary conjugation");
        Ok(Self {
            algebra,
            block_permutation,
            unitary,
            label,
        })
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            block_permutation: (0..algebra.num_blocks()).collect(),
            unitary: algebra.identity(),
            label: "identity".into(),
        }
    }

    /// Time-`t_step` map `τ_{t_step}` of a Hamiltonian flow.
    pub fn from_evolution(sys: &BoundedQuantumSystem, t_step: f64) -> Self {
        Self {
            algebra: sys.algebra.clone(),
            block_permutation: (0..sys.algebra.num_blocks()).collect(),
            unitary: sys.propagator(t_step),
            label: format!("Hamiltonian flow sampled at step {t_step}"),
        }
    }

    pub fn block_permutation(&self) -> &[usize] {
        &self.block_permutation
    }

    pub fn unitary(&self) -> &AlgebraElement {
        &self.unitary
    }

    fn permute(&self, a: &AlgebraElement) -> AlgebraElement {
        AlgebraElement::from_blocks_unchecked(self.block_permutation.iter().map(|&j| a.block(j).clone()).collect())
    }
}

impl StarHomomorphism for Endomorphism {
    fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        conjugate(&self.unitary, &self.permute(a))
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiouvilleReport {
    pub max_deviation: f64,
    /// Per grid time, the worst deviation over all samples.
    pub per_time: Vec<(f64, f64)>,
    pub sample_count: usize,
}

/// Largest `|tr(τ_t(A)) − tr(A)|` over seeded random `A` and the grid.
pub fn verify_liouville(sys: &BoundedQuantumSystem, sample_count: usize, t_grid: &[f64], seed: u64) -> LiouvilleReport {
    let mut rng = seeded_rng(seed);
    let samples: Vec<AlgebraElement> = (0..sample_count)
        .map(|_| random_element(&sys.algebra, &mut rng))
        .collect();
    let before: Vec<Complex64> = samples.iter().map(|a| sys.algebra.trace_unchecked(a)).collect();
    let per_time: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| {
            let u = sys.propagator(t);
            let worst = samples
                .iter()
                .zip(&before)
                .map(|(a, &tr0)| (sys.algebra.trace_unchecked(&conjugate(&u, a)) - tr0).norm())
                .fold(0.0, f64::max);
            (t, worst)
        })
        .collect();
    LiouvilleReport {
        max_deviation: per_time.iter().map(|&(_, d)| d).fold(0.0, f64::max),
        per_time,
        sample_count,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VonNeumannReport {
    /// `‖(ρ(t+h) − ρ(t−h))/2h − i[ρ(t), H]‖_F`.
    pub residual: f64,
    pub t: f64,
    pub h: f64,
}

/// Central-difference check of `dρ/dt = i[ρ, H]` along `ρ(t) = τ_{−t}(ρ(0))`.
pub fn von_neumann_check(sys: &BoundedQuantumSystem, rho: &AlgebraElement, t: f64, h: f64) -> Result<VonNeumannReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step h must be positive, got {h}")));
    }
    // Validates positivity and normalization.
    LinearFunctional::density_state(&sys.algebra, rho.clone())?;
    let at = |s: f64| conjugate(&sys.propagator(-s), rho);
    let rho_t = at(t);
    let derivative = (&at(t + h) - &at(t - h)).scale_real(0.5 / h);
    let rhs = rho_t.commutator(&sys.hamiltonian).scale(Complex64::new(0.0, 1.0));
    Ok(VonNeumannReport {
        residual: (&derivative - &rhs).frobenius_norm(),
        t,
        h,
    })
}
