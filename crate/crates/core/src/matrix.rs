//! Dense complex matrices at desk scale.
//!
//! Everything here is a pure function on immutable values. The Hermitian
//! eigensolver is a cyclic complex Jacobi iteration and the singular value
//! routine is its one-sided (Hestenes) variant; both share the same 2×2
//! rotation.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum number of full Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius threshold (relative to `1 + ‖H‖_F`) that ends the sweeps.
pub const JACOBI_OFF_TOL: f64 = 1e-13;
/// Default Hermiticity / accuracy tolerance for [`hermitian_eig`].
pub const DEFAULT_EIG_TOL: f64 = 1e-10;
/// Padding applied to both ends of a spectral interval.
pub const SPECTRAL_PAD: f64 = 1e-12;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting bad lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix entry is not finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged matrix rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    /// Real matrix from nested rows; convenient in tests and fixtures.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|row| {
                assert_eq!(row.len(), c, "ragged rows");
                row.iter().map(|&x| Complex64::new(x, 0.0))
            })
            .collect();
        Self { rows: r, cols: c, data }
    }

    pub fn from_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diag(&d)
    }

    /// Column vector.
    pub fn column(v: &[Complex64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// Outer product `v v*`.
    pub fn dyad(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[Complex64]) {
        for (i, &z) in v.iter().enumerate() {
            self[(i, j)] = z;
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Matrix product; panics on incompatible shapes.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "apply shape mismatch");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `AB − BA`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// `‖A − A*‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale_real(0.5)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        match singular_values(self) {
            Ok(s) => s.into_iter().fold(0.0, f64::max),
            // Fall back to the Frobenius bound if Jacobi stalls.
            Err(_) => self.frobenius_norm(),
        }
    }

    /// `‖A*A − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        (&self.adjoint().matmul(self) - &Self::identity(self.cols)).frobenius_norm()
    }

    /// `‖A² − A‖_F` together with `‖A − A*‖_F`, the two projection defects.
    pub fn projection_defects(&self) -> (f64, f64) {
        if !self.is_square() {
            return (f64::INFINITY, f64::INFINITY);
        }
        let idem = (&self.matmul(self) - self).frobenius_norm();
        (self.hermiticity_defect(), idem)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Inner product `⟨u, v⟩ = Σ conj(u_i) v_i`.
pub fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix: `H = V diag(λ) V*`.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are orthonormal eigenvectors, in the order of `eigenvalues`.
    pub vectors: ComplexMatrix,
}

impl EigDecomposition {
    /// `V f(Λ) V*` for a scalar function of the eigenvalues.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.vectors;
        let fl: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += v[(i, k)] * fl[k] * v[(j, k)].conj();
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    /// `‖V diag(λ) V* − H‖_F`.
    pub fn reconstruction_residual(&self, h: &ComplexMatrix) -> f64 {
        (&self.map_spectrum(|l| Complex64::new(l, 0.0)) - h).frobenius_norm()
    }

    /// `‖V*V − I‖_F`.
    pub fn orthonormality_residual(&self) -> f64 {
        self.vectors.unitarity_defect()
    }
}

/// Unitary 2×2 rotation `G` on coordinates (p, q) such that the Hermitian
/// 2×2 block `[[app, apq], [conj(apq), aqq]]` becomes diagonal under `G* · G`.
///
/// `G = [[c, s], [-s·conj(e), c·conj(e)]]` where `e = apq / |apq|`.
#[derive(Clone, Copy)]
struct Rotation {
    c: f64,
    s: f64,
    phase: Complex64,
}

impl Rotation {
    fn annihilating(app: f64, aqq: f64, apq: Complex64) -> Self {
        let mag = apq.norm();
        let phase = apq / mag;
        let zeta = (aqq - app) / (2.0 * mag);
        let t = if zeta == 0.0 {
            1.0
        } else {
            zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        Self { c, s: t * c, phase }
    }

    /// Entries (g_pp, g_pq, g_qp, g_qq).
    fn entries(&self) -> (Complex64, Complex64, Complex64, Complex64) {
        let pc = self.phase.conj();
        (
            Complex64::new(self.c, 0.0),
            Complex64::new(self.s, 0.0),
            pc * (-self.s),
            pc * self.c,
        )
    }

    /// `M ← M G` on columns p, q.
    fn apply_right(&self, m: &mut ComplexMatrix, p: usize, q: usize) {
        let (gpp, gpq, gqp, gqq) = self.entries();
        for i in 0..m.rows {
            let mp = m[(i, p)];
            let mq = m[(i, q)];
            m[(i, p)] = mp * gpp + mq * gqp;
            m[(i, q)] = mp * gpq + mq * gqq;
        }
    }

    /// `M ← G* M` on rows p, q.
    fn apply_left_adjoint(&self, m: &mut ComplexMatrix, p: usize, q: usize) {
        let (gpp, gpq, gqp, gqq) = self.entries();
        for j in 0..m.cols {
            let mp = m[(p, j)];
            let mq = m[(q, j)];
            m[(p, j)] = gpp.conj() * mp + gqp.conj() * mq;
            m[(q, j)] = gpq.conj() * mp + gqq.conj() * mq;
        }
    }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigen-decomposition of a Hermitian matrix.
///
/// `tol` bounds the accepted Hermiticity defect, measured as
/// `‖H − H*‖_F ≤ tol · max(1, ‖H‖_F)`. Only the Hermitian part of `H` is
/// diagonalised. Output is deterministic for identical input.
pub fn hermitian_eig(h: &ComplexMatrix, tol: f64) -> Result<EigDecomposition> {
    if !h.is_square() {
        return Err(Error::NotSquare {
            rows: h.rows,
            cols: h.cols,
        });
    }
    let norm = h.frobenius_norm();
    let defect = h.hermiticity_defect();
    if defect > tol * norm.max(1.0) {
        return Err(Error::NotHermitian { defect });
    }
    let n = h.rows;
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let threshold = JACOBI_OFF_TOL * (1.0 + norm);

    let mut converged = off_diagonal_norm(&a) <= threshold;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() == 0.0 {
                    continue;
                }
                let rot = Rotation::annihilating(a[(p, p)].re, a[(q, q)].re, apq);
                rot.apply_right(&mut a, p, q);
                rot.apply_left_adjoint(&mut a, p, q);
                rot.apply_right(&mut v, p, q);
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
            }
        }
        converged = off_diagonal_norm(&a) <= threshold;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_col(dst, &v.col(src));
    }
    Ok(EigDecomposition { eigenvalues, vectors })
}

/// Singular value decomposition data from one-sided Jacobi: `A V = U Σ`.
#[derive(Clone, Debug)]
pub struct RightSingular {
    /// Singular values, in the column order of `vectors` (not sorted).
    pub values: Vec<f64>,
    /// Right singular vectors as orthonormal columns.
    pub vectors: ComplexMatrix,
}

impl RightSingular {
    /// Orthonormal basis (as columns) of the numerical kernel `{σ ≤ tol}`.
    pub fn kernel_basis(&self, tol: f64) -> Vec<Vec<Complex64>> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= tol)
            .map(|(j, _)| self.vectors.col(j))
            .collect()
    }
}

/// One-sided Jacobi: orthogonalises the columns of `A` by right rotations.
/// Small singular values come out with absolute accuracy near machine
/// precision times `‖A‖`, which is what rank decisions need.
pub fn right_singular(a: &ComplexMatrix) -> Result<RightSingular> {
    let n = a.cols;
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok(RightSingular {
            values: vec![0.0; n],
            vectors: v,
        });
    }
    let eps = (n as f64).sqrt().max(4.0) * f64::EPSILON;
    // Columns this small are numerically zero; rotating them only stirs
    // rounding noise and can stall convergence.
    let negligible = (f64::EPSILON * scale).powi(2);
    let mut sweeps = 0;
    loop {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, ZERO);
                for i in 0..w.rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp.norm_sqr();
                    beta += wq.norm_sqr();
                    gamma += wp.conj() * wq;
                }
                if alpha.min(beta) <= negligible || gamma.norm() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let rot = Rotation::annihilating(alpha, beta, gamma);
                rot.apply_right(&mut w, p, q);
                rot.apply_right(&mut v, p, q);
            }
        }
        if !rotated {
            break;
        }
        sweeps += 1;
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
    }
    let values = (0..n).map(|j| vec_norm(&w.col(j))).collect();
    Ok(RightSingular { values, vectors: v })
}

/// All singular values of `A`, descending.
pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let mut s = right_singular(a)?.values;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// `U_t = exp(−iHt)` for Hermitian `H`.
pub fn unitary_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h, DEFAULT_EIG_TOL)?;
    Ok(unitary_exp_from_eig(&eig, t))
}

/// `exp(−iHt)` from a precomputed decomposition of `H`.
pub fn unitary_exp_from_eig(eig: &EigDecomposition, t: f64) -> ComplexMatrix {
    eig.map_spectrum(|l| Complex64::from_polar(1.0, -l * t))
}

/// Closed real interval used to select eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidInput(format!(
                "interval lower bound {lo} exceeds upper bound {hi}"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains_padded(&self, x: f64, pad: f64) -> bool {
        x >= self.lo - pad && x <= self.hi + pad
    }
}

/// Spectral projection `χ_S(A)` with the default padding.
pub fn spectral_projection(a: &ComplexMatrix, s: Interval) -> Result<ComplexMatrix> {
    spectral_projection_padded(a, s, SPECTRAL_PAD)
}

/// Spectral projection with an explicit padding on both ends of `s`.
/// Degenerate eigenspaces are summed dyad by dyad, so the result does not
/// depend on the basis picked inside an eigenspace.
pub fn spectral_projection_padded(a: &ComplexMatrix, s: Interval, pad: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a, DEFAULT_EIG_TOL)?;
    let n = a.rows;
    let mut p = ComplexMatrix::zeros(n, n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if s.contains_padded(l, pad) {
            p = &p + &ComplexMatrix::dyad(&eig.vectors.col(k));
        }
    }
    Ok(p)
}
