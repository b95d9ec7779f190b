//! GNS representation of a state on a block algebra, the contraction
//! induced by a sub-invariant endomorphism, and its mean-ergodic projection.
//!
//! The representation space is realized in coordinates: the Gram matrix
//! `G_ab = φ(E_a* E_b)` over the matrix-unit basis is diagonalized, its null
//! space discarded, and `ι(A) = Λ^{1/2} W* a` maps an element with
//! coordinates `a` to a vector whose standard inner products reproduce
//! `⟨ι(A), ι(B)⟩ = φ(A*B)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{AlgebraElement, BlockAlgebra, LinearFunctional, WEIGHT_SUM_TOL};
use crate::dynamics::{apply_endo, StarHomomorphism};
use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, inner, right_singular, vec_norm, ComplexMatrix, DEFAULT_EIG_TOL};
use crate::random::{random_element, seeded_rng};

/// Gram eigenvalues at or below this fraction of the largest are null.
pub const NULL_TOL: f64 = 1e-12;
/// Singular values of `τ̄ − 1` at or below this count as fixed directions.
pub const FIX_TOL: f64 = 1e-9;
/// Allowed excess in `φ(τ(A*A)) ≤ φ(A*A)`.
pub const SUB_INVARIANCE_TOL: f64 = 1e-10;
/// Allowed image of the null space under the lifted dynamics.
pub const LEAK_TOL: f64 = 1e-9;
/// Allowed excess of `‖τ̄‖` over 1.
pub const CONTRACTION_TOL: f64 = 1e-10;
/// Default cap on the Cesàro search.
pub const DEFAULT_N_MAX: usize = 1_000_000;

/// Cyclic representation `(ℌ, π, Ω)` of a state, in coordinates.
#[derive(Clone, Debug)]
pub struct GnsSpace {
    algebra: BlockAlgebra,
    state: LinearFunctional,
    /// `ι`: matrix-unit coordinates → GNS coordinates (`d × N`).
    basis_map: ComplexMatrix,
    /// Right inverse of `ι` on the quotient (`N × d`): `W Λ^{-1/2}`.
    gram_root_inverse: ComplexMatrix,
    omega: Vec<Complex64>,
    tau_bar: Option<ComplexMatrix>,
}

/// Builds the GNS space of `φ` on `alg`.
pub fn gns_construct(alg: &BlockAlgebra, phi: &LinearFunctional) -> Result<GnsSpace> {
    if phi.algebra() != alg {
        return Err(Error::ShapeMismatch("functional belongs to a different algebra".into()));
    }
    let unit = phi.eval(&alg.identity())?;
    if (unit - 1.0).norm() > WEIGHT_SUM_TOL {
        return Err(Error::NotAState(format!("φ(1) = {unit}")));
    }
    let units = alg.matrix_units();
    let n = units.len();
    let adjoints: Vec<AlgebraElement> = units.iter().map(AlgebraElement::adjoint).collect();
    let mut gram = ComplexMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            gram[(a, b)] = phi.eval_unchecked(&(&adjoints[a] * &units[b]));
        }
    }
    let eig = hermitian_eig(&gram, DEFAULT_EIG_TOL)?;
    let top = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let cutoff = NULL_TOL * top.max(f64::MIN_POSITIVE);
    if eig.eigenvalues[0] < -cutoff {
        return Err(Error::NotAState(format!(
            "Gram matrix has negative eigenvalue {:e}",
            eig.eigenvalues[0]
        )));
    }
    let kept: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > cutoff).collect();
    let d = kept.len();
    let mut basis_map = ComplexMatrix::zeros(d, n);
    let mut gram_root_inverse = ComplexMatrix::zeros(n, d);
    for (row, &k) in kept.iter().enumerate() {
        let root = eig.eigenvalues[k].sqrt();
        for a in 0..n {
            let w = eig.vectors[(a, k)];
            basis_map[(row, a)] = w.conj() * root;
            gram_root_inverse[(a, row)] = w / root;
        }
    }
    let omega = basis_map.apply(&alg.coordinates(&alg.identity()));
    Ok(GnsSpace {
        algebra: alg.clone(),
        state: phi.clone(),
        basis_map,
        gram_root_inverse,
        omega,
        tau_bar: None,
    })
}

impl GnsSpace {
    pub fn dim(&self) -> usize {
        self.basis_map.rows()
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn state(&self) -> &LinearFunctional {
        &self.state
    }

    pub fn basis_map(&self) -> &ComplexMatrix {
        &self.basis_map
    }

    /// `Ω = ι(1)`.
    pub fn omega(&self) -> &[Complex64] {
        &self.omega
    }

    pub fn tau_bar(&self) -> Option<&ComplexMatrix> {
        self.tau_bar.as_ref()
    }

    /// `ι(A) = π(A)Ω`.
    pub fn embed(&self, a: &AlgebraElement) -> Result<Vec<Complex64>> {
        self.algebra.check(a)?;
        Ok(self.basis_map.apply(&self.algebra.coordinates(a)))
    }

    /// Matrix of `X ↦ F(X)` on the matrix-unit coordinates.
    fn coordinate_operator(&self, f: impl Fn(&AlgebraElement) -> AlgebraElement) -> ComplexMatrix {
        let units = self.algebra.matrix_units();
        let n = units.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (b, e) in units.iter().enumerate() {
            m.set_col(b, &self.algebra.coordinates(&f(e)));
        }
        m
    }

    /// `π(A)`, defined by `π(A)ι(B) = ι(AB)`.
    pub fn rep(&self, a: &AlgebraElement) -> Result<ComplexMatrix> {
        self.algebra.check(a)?;
        let left = self.coordinate_operator(|e| a * e);
        Ok(self.basis_map.matmul(&left).matmul(&self.gram_root_inverse))
    }

    /// Worst deviations of `⟨ι(E_a), ι(E_b)⟩` from `φ(E_a* E_b)` and of
    /// `⟨Ω, π(E_a)Ω⟩` from `φ(E_a)` over the full matrix-unit basis.
    pub fn verify(&self) -> Result<GnsVerification> {
        let units = self.algebra.matrix_units();
        let images: Vec<Vec<Complex64>> = units.iter().map(|e| self.embed(e)).collect::<Result<_>>()?;
        let mut gram_error: f64 = 0.0;
        for (a, ea) in units.iter().enumerate() {
            for (b, eb) in units.iter().enumerate() {
                let expect = self.state.eval_unchecked(&(&ea.adjoint() * eb));
                gram_error = gram_error.max((inner(&images[a], &images[b]) - expect).norm());
            }
        }
        let mut state_error: f64 = 0.0;
        for e in &units {
            let pi = self.rep(e)?;
            let value = inner(&self.omega, &pi.apply(&self.omega));
            state_error = state_error.max((value - self.state.eval_unchecked(e)).norm());
        }
        let tau_bar_norm = self.tau_bar.as_ref().map(ComplexMatrix::operator_norm);
        Ok(GnsVerification {
            dim: self.dim(),
            gram_error,
            state_error,
            tau_bar_norm,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GnsVerification {
    pub dim: usize,
    pub gram_error: f64,
    pub state_error: f64,
    pub tau_bar_norm: Option<f64>,
}

impl GnsVerification {
    pub fn holds(&self, tol: f64) -> bool {
        self.gram_error <= tol
            && self.state_error <= tol
            && self.tau_bar_norm.is_none_or(|nrm| nrm <= 1.0 + CONTRACTION_TOL)
    }
}

/// Largest sampled `φ(τ(A*A)) − φ(A*A)` over the matrix-unit basis and
/// `samples` seeded random elements.
pub fn contractivity_excess(phi: &LinearFunctional, tau: &dyn StarHomomorphism, samples: usize, seed: u64) -> f64 {
    let alg = phi.algebra();
    let mut rng = seeded_rng(seed);
    let probes = alg
        .matrix_units()
        .into_iter()
        .chain((0..samples).map(|_| random_element(alg, &mut rng)));
    probes
        .map(|a| {
            let aa = &a.adjoint() * &a;
            phi.eval_unchecked(&tau.apply(&aa)).re - phi.eval_unchecked(&aa).re
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Attaches `τ̄ : ι(A) ↦ ι(τ(A))` to the GNS space.
pub fn extend_endomorphism(g: &GnsSpace, tau: &dyn StarHomomorphism) -> Result<GnsSpace> {
    if tau.algebra() != &g.algebra {
        return Err(Error::ShapeMismatch("endomorphism acts on a different algebra".into()));
    }
    let one = g.algebra.identity();
    let unit_defect = (&tau.apply(&one) - &one).frobenius_norm();
    if unit_defect > SUB_INVARIANCE_TOL {
        return Err(Error::HypothesisFailed(format!("τ(1) ≠ 1 (defect {unit_defect:e})")));
    }
    let excess = contractivity_excess(&g.state, tau, 32, 0x5eed);
    if excess > SUB_INVARIANCE_TOL {
        return Err(Error::SubInvarianceViolated { excess });
    }
    let lifted = g.coordinate_operator(|e| tau.apply(e));
    let image = g.basis_map.matmul(&lifted);
    // ι M_τ (1 − ι⁺ι) must vanish: null vectors go to null vectors.
    let n = lifted.rows();
    let null_projector = &ComplexMatrix::identity(n) - &g.gram_root_inverse.matmul(&g.basis_map);
    let leak = image.matmul(&null_projector).frobenius_norm();
    if leak > LEAK_TOL {
        return Err(Error::NullSpaceLeak { leak });
    }
    let tau_bar = image.matmul(&g.gram_root_inverse);
    let norm = tau_bar.operator_norm();
    if norm > 1.0 + CONTRACTION_TOL {
        return Err(Error::InvariantViolation(format!("‖τ̄‖ = {norm} exceeds 1")));
    }
    let mut out = g.clone();
    out.tau_bar = Some(tau_bar);
    Ok(out)
}

/// Mean-ergodic projection and a certified averaging length.
#[derive(Clone, Debug, Serialize)]
pub struct ErgodicProjection {
    /// Orthogonal projection onto `{v : τ̄v = v}`, in GNS coordinates.
    #[serde(skip)]
    pub q: ComplexMatrix,
    pub fixed_dim: usize,
    /// Least `n` with `‖(1/n)Σ_{k<n} τ̄ᵏx − Qx‖ ≤ ε/(‖x‖+1)`.
    pub n: usize,
    pub achieved_error: f64,
    pub target: f64,
}

/// Fixed-space projection of `τ̄` and the Cesàro length for vector `x`.
pub fn ergodic_projection(g: &GnsSpace, x: &[Complex64], epsilon: f64, n_max: usize) -> Result<ErgodicProjection> {
    let tau_bar = g
        .tau_bar
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("no endomorphism attached to the GNS space".into()))?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {epsilon}")));
    }
    if x.len() != g.dim() {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} in a GNS space of dimension {}",
            x.len(),
            g.dim()
        )));
    }
    let d = g.dim();
    let shifted = tau_bar - &ComplexMatrix::identity(d);
    let kernel = right_singular(&shifted)?.kernel_basis(FIX_TOL);
    let mut q = ComplexMatrix::zeros(d, d);
    for v in &kernel {
        q = &q + &ComplexMatrix::dyad(v);
    }
    let drift = (&tau_bar.matmul(&q) - &q).frobenius_norm();
    if drift > 1e-9 {
        return Err(Error::InvariantViolation(format!("‖τ̄Q − Q‖ = {drift:e}")));
    }

    let qx = q.apply(x);
    let target = epsilon / (vec_norm(x) + 1.0);
    let mut sum = vec![Complex64::new(0.0, 0.0); d];
    let mut power = x.to_vec();
    let mut achieved = f64::INFINITY;
    for n in 1..=n_max {
        for (s, p) in sum.iter_mut().zip(&power) {
            *s += p;
        }
        let inv = 1.0 / n as f64;
        achieved = sum
            .iter()
            .zip(&qx)
            .map(|(s, t)| (s * inv - t).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if achieved <= target {
            return Ok(ErgodicProjection {
                q,
                fixed_dim: kernel.len(),
                n,
                achieved_error: achieved,
                target,
            });
        }
        power = tau_bar.apply(&power);
    }
    Err(Error::NMaxExceeded {
        n_max,
        achieved,
        target,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhintchineBound {
    /// `φ(P)²`.
    pub phi_p_sq: f64,
    /// `⟨x, Qx⟩` with `x = ι(P)`.
    pub x_qx: f64,
    /// `φ(P)² ≤ ⟨x, Qx⟩ + 1e−9`.
    pub ok: bool,
    /// Worst `|⟨x, τ̄ᵏx⟩ − φ(Pτᵏ(P))|` for `k ≤ 20`.
    pub transfer_error: f64,
    pub transfer_ok: bool,
}

/// Compares `φ(P)²` with `⟨x, Qx⟩` and checks that correlations computed in
/// the GNS space agree with the direct ones.
pub fn khintchine_bound_check(
    g: &GnsSpace,
    ergodic: &ErgodicProjection,
    p: &AlgebraElement,
    tau: &dyn StarHomomorphism,
) -> Result<KhintchineBound> {
    let tau_bar = g
        .tau_bar
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("no endomorphism attached to the GNS space".into()))?;
    let x = g.embed(p)?;
    let phi_p = g.state.eval_unchecked(p);
    let phi_p_sq = phi_p.norm_sqr();
    let x_qx = inner(&x, &ergodic.q.apply(&x)).re;

    let mut transfer_error: f64 = 0.0;
    let mut power = x.clone();
    for k in 0..=20 {
        let direct = g.state.eval_unchecked(&(p * &apply_endo(tau, p, k)?));
        transfer_error = transfer_error.max((inner(&x, &power) - direct).norm());
        power = tau_bar.apply(&power);
    }
    Ok(KhintchineBound {
        phi_p_sq,
        x_qx,
        ok: phi_p_sq <= x_qx + 1e-9,
        transfer_error,
        transfer_ok: transfer_error <= 1e-9,
    })
}
