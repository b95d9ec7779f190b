//! Finite von Neumann algebras as direct sums of full matrix blocks.
//!
//! An algebra `⊕_k M_{n_k}` carries the weighted normalized trace
//! `tr(A) = Σ_k w_k Tr(A_k) / n_k` with `Σ_k w_k = 1`. Every state is
//! represented by a positive density element `ρ` with `tr(ρ) = 1`, acting as
//! `A ↦ tr(ρA)`; the trace itself is the state with `ρ = 1`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, vec_norm, ComplexMatrix, DEFAULT_EIG_TOL};
use crate::random::{random_element, seeded_rng};

/// Tolerance on `Σ w_k = 1` and on state normalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Default floor below which a yes/no outcome counts as impossible.
pub const LUDERS_FLOOR: f64 = 1e-12;
/// Smallest density eigenvalue (relative to the largest) that still counts
/// as strictly positive when deciding faithfulness.
pub const FAITHFUL_TOL: f64 = 1e-12;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// `⊕_k M_{n_k}` with block weights `w_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockAlgebra {
    dims: Vec<usize>,
    weights: Vec<f64>,
}

impl BlockAlgebra {
    pub fn new(dims: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidInput("algebra needs at least one block".into()));
        }
        if dims.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} block dims but {} block weights",
                dims.len(),
                weights.len()
            )));
        }
        if let Some(k) = dims.iter().position(|&n| n == 0) {
            return Err(Error::InvalidInput(format!("block {k} has dimension 0")));
        }
        if let Some(k) = weights.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "block weight {k} must be positive and finite, got {}",
                weights[k]
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "block weights must sum to 1 (got {sum:.17})"
            )));
        }
        Ok(Self { dims, weights })
    }

    /// Weights `w_k = n_k² / Σ n_j²`, the restriction of the maximally mixed
    /// state of the ambient matrix algebra.
    pub fn with_default_weights(dims: Vec<usize>) -> Result<Self> {
        let total: usize = dims.iter().map(|n| n * n).sum();
        let weights = dims.iter().map(|&n| (n * n) as f64 / total as f64).collect();
        Self::new(dims, weights)
    }

    /// The factor `M_n`.
    pub fn factor(n: usize) -> Self {
        Self::new(vec![n], vec![1.0]).expect("single block with weight 1")
    }

    /// Commutative algebra `ℂ^m` with the given point weights.
    pub fn abelian(weights: Vec<f64>) -> Result<Self> {
        Self::new(vec![1; weights.len()], weights)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn is_factor(&self) -> bool {
        self.dims.len() == 1
    }

    pub fn is_abelian(&self) -> bool {
        self.dims.iter().all(|&n| n == 1)
    }

    /// Complex dimension `Σ n_k²`.
    pub fn dimension(&self) -> usize {
        self.dims.iter().map(|n| n * n).sum()
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.dims.iter().map(|&n| ComplexMatrix::identity(n)).collect(),
        }
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.dims.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect(),
        }
    }

    /// Validates block shapes and wraps them.
    pub fn element(&self, blocks: Vec<ComplexMatrix>) -> Result<AlgebraElement> {
        let el = AlgebraElement { blocks };
        self.check(&el)?;
        Ok(el)
    }

    pub fn check(&self, a: &AlgebraElement) -> Result<()> {
        if a.blocks.len() != self.dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "element has {} blocks, algebra has {}",
                a.blocks.len(),
                self.dims.len()
            )));
        }
        for (k, (b, &n)) in a.blocks.iter().zip(&self.dims).enumerate() {
            if b.rows() != n || b.cols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} is {}x{}, expected {n}x{n}",
                    b.rows(),
                    b.cols()
                )));
            }
        }
        Ok(())
    }

    /// `Σ_k w_k Tr(A_k) / n_k`.
    pub fn trace(&self, a: &AlgebraElement) -> Result<Complex64> {
        self.check(a)?;
        Ok(self.trace_unchecked(a))
    }

    pub(crate) fn trace_unchecked(&self, a: &AlgebraElement) -> Complex64 {
        a.blocks
            .iter()
            .zip(self.dims.iter().zip(&self.weights))
            .map(|(b, (&n, &w))| b.trace() * (w / n as f64))
            .sum()
    }

    /// Center-valued trace: block `k` goes to `Tr(A_k)/n_k · 1`.
    pub fn center_valued_trace(&self, a: &AlgebraElement) -> Result<CenterElement> {
        self.check(a)?;
        Ok(CenterElement {
            scalars: a
                .blocks
                .iter()
                .zip(&self.dims)
                .map(|(b, &n)| b.trace() / n as f64)
                .collect(),
        })
    }

    /// Canonical matrix-unit basis `E^{(k)}_{ij}`, block by block, row-major.
    pub fn matrix_units(&self) -> Vec<AlgebraElement> {
        let mut units = Vec::with_capacity(self.dimension());
        for (k, &n) in self.dims.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let mut e = self.zero();
                    e.blocks[k][(i, j)] = ONE;
                    units.push(e);
                }
            }
        }
        units
    }

    /// Coordinates of `A` in the matrix-unit basis.
    pub fn coordinates(&self, a: &AlgebraElement) -> Vec<Complex64> {
        a.blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect()
    }

    pub fn from_coordinates(&self, coords: &[Complex64]) -> Result<AlgebraElement> {
        if coords.len() != self.dimension() {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates for an algebra of dimension {}",
                coords.len(),
                self.dimension()
            )));
        }
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(self.dims.len());
        for &n in &self.dims {
            blocks.push(ComplexMatrix::from_vec(n, n, coords[offset..offset + n * n].to_vec())?);
            offset += n * n;
        }
        Ok(AlgebraElement { blocks })
    }
}

/// One complex matrix per block.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<ComplexMatrix>,
}

impl AlgebraElement {
    /// Wraps blocks without consulting an algebra; shape checks happen at the
    /// operations that take a `BlockAlgebra`.
    pub fn from_blocks_unchecked(blocks: Vec<ComplexMatrix>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &ComplexMatrix {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<ComplexMatrix> {
        self.blocks
    }

    pub fn map_blocks(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self {
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(ComplexMatrix::adjoint)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map_blocks(|b| b.scale(s))
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.map_blocks(|b| b.scale_real(s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest singular value over all blocks.
    pub fn operator_norm(&self) -> f64 {
        self.blocks.iter().map(ComplexMatrix::operator_norm).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(ComplexMatrix::hermiticity_defect)
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn hermitian_part(&self) -> Self {
        self.map_blocks(ComplexMatrix::hermitian_part)
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &(self * rhs) - &(rhs * self)
    }

    /// Worst block defects `(‖A − A*‖_F, ‖A² − A‖_F)`.
    pub fn projection_defects(&self) -> (f64, f64) {
        self.blocks.iter().fold((0.0, 0.0), |(h, i), b| {
            let (bh, bi) = b.projection_defects();
            (f64::max(h, bh), f64::max(i, bi))
        })
    }

    /// `max_k ‖U_k* U_k − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(ComplexMatrix::unitarity_defect)
            .fold(0.0, f64::max)
    }

    fn zip_blocks(&self, rhs: &Self, f: impl Fn(&ComplexMatrix, &ComplexMatrix) -> ComplexMatrix) -> Self {
        assert_eq!(self.blocks.len(), rhs.blocks.len(), "block count mismatch");
        Self {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;

    fn mul(self, rhs: &AlgebraElement) -> AlgebraElement {
        self.zip_blocks(rhs, ComplexMatrix::matmul)
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;

    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        self.zip_blocks(rhs, |a, b| a + b)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;

    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        self.zip_blocks(rhs, |a, b| a - b)
    }
}

/// `Σ_k c_k · 1_{n_k}`, an element of the center.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CenterElement {
    pub scalars: Vec<Complex64>,
}

impl CenterElement {
    pub fn to_element(&self, alg: &BlockAlgebra) -> Result<AlgebraElement> {
        if self.scalars.len() != alg.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} center scalars for {} blocks",
                self.scalars.len(),
                alg.num_blocks()
            )));
        }
        Ok(AlgebraElement {
            blocks: self
                .scalars
                .iter()
                .zip(alg.dims())
                .map(|(&c, &n)| ComplexMatrix::identity(n).scale(c))
                .collect(),
        })
    }
}

/// True iff every block is self-adjoint and idempotent within `tol`.
pub fn is_projection(a: &AlgebraElement, tol: f64) -> bool {
    let (h, i) = a.projection_defects();
    h <= tol && i <= tol
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    Trace,
    VectorState,
    DensityState,
}

/// A state `A ↦ tr(ρA)` on a block algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFunctional {
    algebra: BlockAlgebra,
    kind: FunctionalKind,
    density: Option<AlgebraElement>,
}

/// The normalized trace as a state; positive, faithful and tracial.
pub fn tracial_state(alg: &BlockAlgebra) -> LinearFunctional {
    LinearFunctional {
        algebra: alg.clone(),
        kind: FunctionalKind::Trace,
        density: None,
    }
}

impl LinearFunctional {
    /// State `A ↦ tr(ρA)`; `ρ` must be positive with `tr(ρ) = 1`.
    pub fn density_state(alg: &BlockAlgebra, rho: AlgebraElement) -> Result<Self> {
        alg.check(&rho)?;
        let defect = rho.hermiticity_defect();
        if defect > DEFAULT_EIG_TOL {
            return Err(Error::NotAState(format!(
                "density is not self-adjoint (‖ρ − ρ*‖ = {defect:e})"
            )));
        }
        let rho = rho.hermitian_part();
        let norm = alg.trace_unchecked(&rho);
        if (norm.re - 1.0).abs() > WEIGHT_SUM_TOL || norm.im.abs() > WEIGHT_SUM_TOL {
            return Err(Error::NotAState(format!("tr(ρ) = {norm}, expected 1")));
        }
        for (k, b) in rho.blocks().iter().enumerate() {
            let eig = hermitian_eig(b, DEFAULT_EIG_TOL)?;
            if eig.eigenvalues[0] < -WEIGHT_SUM_TOL {
                return Err(Error::NotAState(format!(
                    "density block {k} has negative eigenvalue {:e}",
                    eig.eigenvalues[0]
                )));
            }
        }
        Ok(Self {
            algebra: alg.clone(),
            kind: FunctionalKind::DensityState,
            density: Some(rho),
        })
    }

    /// Vector state `A ↦ ⟨ψ, A_k ψ⟩` on block `k`; `ψ` is normalized here.
    pub fn vector_state(alg: &BlockAlgebra, block: usize, psi: &[Complex64]) -> Result<Self> {
        let n = *alg.dims().get(block).ok_or_else(|| {
            Error::InvalidInput(format!("block {block} out of range for {} blocks", alg.num_blocks()))
        })?;
        if psi.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} for block of dimension {n}",
                psi.len()
            )));
        }
        let norm = vec_norm(psi);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("state vector must be nonzero and finite".into()));
        }
        let unit: Vec<Complex64> = psi.iter().map(|z| z / norm).collect();
        let mut rho = alg.zero();
        // tr(ρA) = (w_k / n_k) Tr(ρ_k A_k), so ρ_k = (n_k / w_k) ψψ*.
        rho.blocks[block] = ComplexMatrix::dyad(&unit).scale_real(n as f64 / alg.weights()[block]);
        Ok(Self {
            algebra: alg.clone(),
            kind: FunctionalKind::VectorState,
            density: Some(rho),
        })
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn kind(&self) -> FunctionalKind {
        self.kind
    }

    /// Density element; the identity for the trace.
    pub fn density(&self) -> AlgebraElement {
        self.density.clone().unwrap_or_else(|| self.algebra.identity())
    }

    pub fn eval(&self, a: &AlgebraElement) -> Result<Complex64> {
        self.algebra.check(a)?;
        Ok(self.eval_unchecked(a))
    }

    pub(crate) fn eval_unchecked(&self, a: &AlgebraElement) -> Complex64 {
        match &self.density {
            None => self.algebra.trace_unchecked(a),
            Some(rho) => rho
                .blocks
                .iter()
                .zip(&a.blocks)
                .zip(self.algebra.dims().iter().zip(self.algebra.weights()))
                .map(|((r, b), (&n, &w))| trace_of_product(r, b) * (w / n as f64))
                .sum(),
        }
    }

    /// Largest `c` with `φ(X*X) ≥ c ‖X‖_F²` for all `X`; zero when `φ` is not
    /// faithful.
    pub fn faithfulness_constant(&self) -> Result<f64> {
        let alg = &self.algebra;
        let mut c = f64::INFINITY;
        for (k, (&n, &w)) in alg.dims().iter().zip(alg.weights()).enumerate() {
            let lambda_min = match &self.density {
                None => 1.0,
                Some(rho) => {
                    let eig = hermitian_eig(rho.block(k), DEFAULT_EIG_TOL)?;
                    let top = eig.eigenvalues.last().copied().unwrap_or(0.0).max(1.0);
                    let low = eig.eigenvalues[0];
                    if low <= FAITHFUL_TOL * top {
                        0.0
                    } else {
                        low
                    }
                }
            };
            c = c.min(w / n as f64 * lambda_min);
        }
        Ok(c)
    }

    pub fn is_faithful(&self) -> Result<bool> {
        Ok(self.faithfulness_constant()? > 0.0)
    }
}

/// `Tr(AB)` without forming the product.
fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

fn require_projection(p: &AlgebraElement, index: usize, tol: f64) -> Result<()> {
    let (hermiticity, idempotency) = p.projection_defects();
    if hermiticity > tol || idempotency > tol {
        return Err(Error::NotProjection {
            index,
            hermiticity,
            idempotency,
        });
    }
    Ok(())
}

/// Default tolerance for accepting user-supplied projections.
pub const PROJECTION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdditivityReport {
    /// `φ(P_k P_l P_k) ≤ tol` for every `k < l`.
    pub pairwise_ok: bool,
    /// `Σ_k φ(P_k)`.
    pub sum: f64,
    /// `Σ φ(P_k) ≤ 1 + tol`; `None` when the pairwise hypothesis fails and the
    /// additivity conclusion does not apply.
    pub additive_ok: Option<bool>,
}

/// Checks additivity of `φ` on a family of projections.
pub fn check_additive(phi: &LinearFunctional, ps: &[AlgebraElement], tol: f64) -> Result<AdditivityReport> {
    for (i, p) in ps.iter().enumerate() {
        phi.algebra.check(p)?;
        require_projection(p, i, PROJECTION_TOL)?;
    }
    let mut pairwise_ok = true;
    for k in 0..ps.len() {
        for l in (k + 1)..ps.len() {
            let v = phi.eval_unchecked(&(&(&ps[k] * &ps[l]) * &ps[k]));
            if v.norm() > tol {
                pairwise_ok = false;
            }
        }
    }
    let sum: f64 = ps.iter().map(|p| phi.eval_unchecked(p).re).sum();
    Ok(AdditivityReport {
        pairwise_ok,
        sum,
        additive_ok: pairwise_ok.then_some(sum <= 1.0 + tol),
    })
}

/// For faithful `φ`, `φ(PQP) ≈ 0` forces `QP ≈ 0` and `PQ ≈ 0`:
/// `φ(PQP) = φ((QP)*(QP)) ≥ c‖QP‖_F²` with `c` the faithfulness constant,
/// so both products must be within `√(tol/c)` in Frobenius norm.
pub fn check_faithful_implies_orthogonal(
    phi: &LinearFunctional,
    p: &AlgebraElement,
    q: &AlgebraElement,
    tol: f64,
) -> Result<bool> {
    phi.algebra.check(p)?;
    phi.algebra.check(q)?;
    require_projection(p, 0, PROJECTION_TOL)?;
    require_projection(q, 1, PROJECTION_TOL)?;
    let c = phi.faithfulness_constant()?;
    if c <= 0.0 {
        return Err(Error::HypothesisFailed("functional is not faithful".into()));
    }
    let pqp = phi.eval_unchecked(&(&(p * q) * p));
    if pqp.re > tol || pqp.im.abs() > tol {
        return Err(Error::HypothesisFailed(format!(
            "φ(PQP) = {:e} exceeds tolerance {tol:e}",
            pqp.re
        )));
    }
    // Rounding in the products adds a few ulps on top of the bound.
    let bound = (tol / c).sqrt() + 1e-12;
    Ok((q * p).frobenius_norm() <= bound && (p * q).frobenius_norm() <= bound)
}

/// `φ(1) = 1` and `|φ(AB) − φ(BA)| ≤ tol` over seeded random pairs.
pub fn check_cstar_trace(phi: &LinearFunctional, sample_count: usize, seed: u64, tol: f64) -> bool {
    let alg = &phi.algebra;
    if (phi.eval_unchecked(&alg.identity()) - 1.0).norm() > tol {
        return false;
    }
    let mut rng = seeded_rng(seed);
    (0..sample_count).all(|_| {
        let a = random_element(alg, &mut rng);
        let b = random_element(alg, &mut rng);
        (phi.eval_unchecked(&(&a * &b)) - phi.eval_unchecked(&(&b * &a))).norm() <= tol
    })
}

/// Lüders update `ω′(A) = ω(PAP)/ω(P)` with the default floor.
pub fn luders_update(omega: &LinearFunctional, p: &AlgebraElement) -> Result<LinearFunctional> {
    luders_update_with_floor(omega, p, LUDERS_FLOOR)
}

/// Lüders update; the result is the density state `PρP / ω(P)`.
pub fn luders_update_with_floor(omega: &LinearFunctional, p: &AlgebraElement, floor: f64) -> Result<LinearFunctional> {
    omega.algebra.check(p)?;
    require_projection(p, 0, PROJECTION_TOL)?;
    let probability = omega.eval_unchecked(p).re;
    if !(probability > floor) {
        return Err(Error::ZeroProbability { probability, floor });
    }
    let rho = omega.density();
    let projected = (&(p * &rho) * p).hermitian_part();
    // Normalize by tr(PρP) itself, which equals ω(P) up to rounding.
    let norm = omega.algebra.trace_unchecked(&projected).re;
    Ok(LinearFunctional {
        algebra: omega.algebra.clone(),
        kind: FunctionalKind::DensityState,
        density: Some(projected.scale_real(1.0 / norm)),
    })
}
