//! Seeded random generators for matrices, algebra elements and projections.
//! All sampling in the crate goes through a ChaCha8 stream so results are
//! reproducible across platforms.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{AlgebraElement, BlockAlgebra};
use crate::matrix::{hermitian_eig, ComplexMatrix, DEFAULT_EIG_TOL};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries with real and imaginary parts uniform on [-1, 1).
pub fn random_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexMatrix::from_vec(rows, cols, data).expect("positive dimensions")
}

pub fn random_hermitian_matrix(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    random_matrix(n, n, rng).hermitian_part()
}

/// Haar-ish unitary: eigenvectors of a random Hermitian matrix.
pub fn random_unitary_matrix(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let h = random_hermitian_matrix(n, rng);
    hermitian_eig(&h, DEFAULT_EIG_TOL)
        .expect("Hermitian by construction")
        .vectors
}

/// Projection of the given rank onto a random subspace.
pub fn random_projection_matrix(n: usize, rank: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let u = random_unitary_matrix(n, rng);
    let mut p = ComplexMatrix::zeros(n, n);
    for k in 0..rank.min(n) {
        p = &p + &ComplexMatrix::dyad(&u.col(k));
    }
    p
}

pub fn random_element(alg: &BlockAlgebra, rng: &mut impl Rng) -> AlgebraElement {
    AlgebraElement::from_blocks_unchecked(alg.dims().iter().map(|&n| random_matrix(n, n, rng)).collect())
}

pub fn random_hermitian(alg: &BlockAlgebra, rng: &mut impl Rng) -> AlgebraElement {
    AlgebraElement::from_blocks_unchecked(alg.dims().iter().map(|&n| random_hermitian_matrix(n, rng)).collect())
}

pub fn random_unitary(alg: &BlockAlgebra, rng: &mut impl Rng) -> AlgebraElement {
    AlgebraElement::from_blocks_unchecked(alg.dims().iter().map(|&n| random_unitary_matrix(n, rng)).collect())
}

/// Projection with a uniformly drawn rank in every block; guaranteed nonzero.
pub fn random_projection(alg: &BlockAlgebra, rng: &mut impl Rng) -> AlgebraElement {
    loop {
        let blocks: Vec<ComplexMatrix> = alg
            .dims()
            .iter()
            .map(|&n| {
                let rank = rng.gen_range(0..=n);
                random_projection_matrix(n, rank, rng)
            })
            .collect();
        if blocks.iter().any(|b| b.trace().re > 0.5) {
            return AlgebraElement::from_blocks_unchecked(blocks);
        }
    }
}
