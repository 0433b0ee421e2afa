//! Deterministic random instance generators.
//!
//! All generation goes through a ChaCha20 stream keyed by `(seed, stream)`,
//! so independent instances can be drawn from disjoint streams of one seed.

use nalgebra::QR;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::algebra::{AlgebraElement, BlockAlgebra, HilbertModule, ModuleElement};
use crate::kernels::FiniteKernel;
use crate::linalg::{self, CMatrix};
use crate::maps::{ModuleMap, OperatorMap};

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian, `E|z|^2 = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let mut m = linalg::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_gaussian(rng);
        }
    }
    m
}

/// Haar-distributed unitary (QR of a Gaussian matrix with phases fixed).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    if n == 0 {
        return linalg::zeros(0, 0);
    }
    let qr = QR::new(gaussian_matrix(rng, n, n));
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_fn(n, n, |i, j| {
        if i == j && r[(i, i)].norm() > 0.0 {
            r[(i, i)] / r[(i, i)].norm()
        } else if i == j {
            linalg::ONE
        } else {
            linalg::ZERO
        }
    });
    q * phases
}

/// `rows x cols` isometry, `rows >= cols`.
pub fn isometry<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(rows >= cols, "an isometry cannot shrink dimension");
    linalg::columns(&unitary(rng, rows), 0, cols)
}

/// Random operator with operator norm drawn uniformly from `[lo, hi]`.
pub fn with_norm<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> CMatrix {
    let g = gaussian_matrix(rng, rows, cols);
    let n = linalg::op_norm(&g);
    if n == 0.0 {
        return g;
    }
    let target = rng.random_range(lo..=hi);
    g * Complex64::new(target / n, 0.0)
}

/// Block algebra with 1..=`max_blocks` blocks of size 1..=`max_block`.
pub fn algebra<R: Rng + ?Sized>(rng: &mut R, max_block: usize, max_blocks: usize) -> BlockAlgebra {
    let k = rng.random_range(1..=max_blocks.max(1));
    BlockAlgebra::new((0..k).map(|_| rng.random_range(1..=max_block.max(1))).collect())
        .expect("positive block sizes")
}

pub fn algebra_element<R: Rng + ?Sized>(rng: &mut R, a: &BlockAlgebra) -> AlgebraElement {
    let coords: Vec<_> = (0..a.dim()).map(|_| complex_gaussian(rng)).collect();
    AlgebraElement::from_coords(a, &coords).expect("matching dimension")
}

pub fn module_element<R: Rng + ?Sized>(rng: &mut R, e: &HilbertModule) -> ModuleElement {
    let v: Vec<_> = (0..e.dim()).map(|_| complex_gaussian(rng)).collect();
    ModuleElement::from_vector(e, &v).expect("matching dimension")
}

/// Random `n x n` array over `E`, an element of `M_n(E)`.
pub fn module_array<R: Rng + ?Sized>(rng: &mut R, e: &HilbertModule, n: usize) -> Vec<Vec<ModuleElement>> {
    (0..n)
        .map(|_| (0..n).map(|_| module_element(rng, e)).collect())
        .collect()
}

/// CP map `a -> sum_j K_j* a K_j` with `kraus` Gaussian Kraus operators.
pub fn cp_map<R: Rng + ?Sized>(rng: &mut R, a: &BlockAlgebra, dim_h: usize, kraus: usize) -> OperatorMap {
    let scale = Complex64::new(1.0 / (kraus.max(1) as f64).sqrt(), 0.0);
    let ks: Vec<_> = (0..kraus)
        .map(|_| gaussian_matrix(rng, a.size(), dim_h) * scale)
        .collect();
    if ks.is_empty() {
        return OperatorMap::zero(a, dim_h, dim_h);
    }
    OperatorMap::from_kraus(a, &ks).expect("consistent Kraus shapes")
}

/// Arbitrary linear map `A -> B(C^dim_h, C^dim_k)` with Gaussian images.
pub fn linear_map<R: Rng + ?Sized>(rng: &mut R, a: &BlockAlgebra, dim_k: usize, dim_h: usize) -> OperatorMap {
    let images = (0..a.dim()).map(|_| gaussian_matrix(rng, dim_k, dim_h)).collect();
    OperatorMap::new(a.clone(), dim_k, dim_h, images).expect("consistent shapes")
}

/// Arbitrary linear module map with Gaussian images.
pub fn linear_module_map<R: Rng + ?Sized>(
    rng: &mut R,
    e: &HilbertModule,
    dim_h: usize,
    dim_out: usize,
) -> ModuleMap {
    let images = (0..e.dim()).map(|_| gaussian_matrix(rng, dim_out, dim_h)).collect();
    ModuleMap::new(e.clone(), dim_out, dim_h, images).expect("consistent shapes")
}

/// `*`-representation `U (+)_k (id_k (x) I_{mult_k}) U*`, where block `k`
/// appears with multiplicity `multiplicities[k]` (zero allowed).
pub fn representation<R: Rng + ?Sized>(rng: &mut R, a: &BlockAlgebra, multiplicities: &[usize]) -> OperatorMap {
    assert_eq!(multiplicities.len(), a.blocks().len());
    let dim: usize = a.blocks().iter().zip(multiplicities).map(|(n, m)| n * m).sum();
    let u = unitary(rng, dim);
    OperatorMap::from_fn(a, dim, dim, |x| {
        let parts: Vec<CMatrix> = x
            .blocks()
            .iter()
            .zip(multiplicities)
            .map(|(b, &mult)| linalg::kron(b, &linalg::identity(mult)))
            .collect();
        &u * linalg::direct_sum(&parts) * u.adjoint()
    })
    .expect("consistent shapes")
}

/// Point operators `Phi(x_i): C^dim_h -> C^dim_k`, the generating data of a
/// positive definite kernel.
pub fn point_operators<R: Rng + ?Sized>(rng: &mut R, points: usize, dim_h: usize, dim_k: usize) -> Vec<CMatrix> {
    (0..points).map(|_| gaussian_matrix(rng, dim_k, dim_h)).collect()
}

/// Positive definite kernel `Phi(x)* Phi(y)` of random point operators.
pub fn pd_kernel<R: Rng + ?Sized>(rng: &mut R, points: usize, dim_h: usize, dim_k: usize) -> FiniteKernel {
    let ops = point_operators(rng, points, dim_h, dim_k);
    FiniteKernel::from_map(&ops, dim_h).expect("consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{classify_isometry, IsometryClass, Tolerance};

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = gaussian_matrix(&mut stream_rng(7, 0), 2, 2);
        let b = gaussian_matrix(&mut stream_rng(7, 0), 2, 2);
        let c = gaussian_matrix(&mut stream_rng(7, 1), 2, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unitary_and_isometry() {
        let tol = Tolerance::default();
        let mut rng = stream_rng(1, 0);
        assert_eq!(classify_isometry(&unitary(&mut rng, 5), &tol), IsometryClass::Unitary);
        assert_eq!(classify_isometry(&isometry(&mut rng, 5, 3), &tol), IsometryClass::Isometry);
        let c = with_norm(&mut rng, 3, 4, 0.2, 0.9);
        assert!(linalg::op_norm(&c) <= 0.9 + 1e-12);
    }
}
