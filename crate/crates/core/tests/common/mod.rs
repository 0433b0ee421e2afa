#![allow(dead_code)]

use cstar_core::kernels::KolmogorovPair;
use cstar_core::linalg::{self, CMatrix, Tolerance};
use cstar_core::random;
use cstar_core::{HilbertModule, ModuleMap, OperatorMap};
use num_complex::Complex64;
use rand::Rng;

/// `x -> [pi(x_1); ...; pi(x_m)]`, the representation `E -> B(K, K^m)` read
/// straight off the coordinates.
pub fn direct_rep(pi: &OperatorMap, module: &HilbertModule) -> ModuleMap {
    let k = pi.dim_k();
    let m = module.rank();
    ModuleMap::from_fn(module, m * k, k, |x| {
        let parts: Vec<CMatrix> = x.coords().iter().map(|c| pi.apply(c).unwrap()).collect();
        linalg::vstack(&parts, k)
    })
    .unwrap()
}

/// Compress a module map onto the span of its range and rotate by a random unitary.
pub fn compress_to_range<R: Rng>(map: &ModuleMap, rng: &mut R, tol: &Tolerance) -> ModuleMap {
    let q = linalg::range_basis(&map.stacked(), tol);
    let u = random::unitary(rng, q.ncols());
    map.left_mul(&(u * q.adjoint())).unwrap()
}

/// Minimal decomposition built from generating operators instead of the Gram.
pub fn independent_kolmogorov<R: Rng>(ops: &[CMatrix], rng: &mut R, tol: &Tolerance) -> KolmogorovPair {
    let rows = ops[0].nrows();
    let q = linalg::range_basis(&linalg::hstack(ops, rows), tol);
    let u = random::unitary(rng, q.ncols());
    let left = u * q.adjoint();
    KolmogorovPair::new(left.nrows(), ops.iter().map(|o| &left * o).collect(), tol).unwrap()
}

pub fn perturb_matrix<R: Rng>(rng: &mut R, m: &CMatrix, rel: f64) -> CMatrix {
    let g = random::gaussian_matrix(rng, m.nrows(), m.ncols());
    let scale = rel * linalg::frobenius(m) / linalg::frobenius(&g).max(f64::MIN_POSITIVE);
    m + g * Complex64::new(scale, 0.0)
}

fn perturb_images<R: Rng>(rng: &mut R, images: &[CMatrix], rows: usize, rel: f64) -> Vec<CMatrix> {
    let stacked = linalg::hstack(images, rows);
    let p = perturb_matrix(rng, &stacked, rel);
    let cols = images.first().map_or(0, CMatrix::ncols);
    (0..images.len()).map(|i| linalg::columns(&p, i * cols, cols)).collect()
}

pub fn perturb_map<R: Rng>(rng: &mut R, map: &OperatorMap, rel: f64) -> OperatorMap {
    let images = perturb_images(rng, map.images(), map.dim_k(), rel);
    OperatorMap::new(map.domain().clone(), map.dim_k(), map.dim_h(), images).unwrap()
}

pub fn perturb_module_map<R: Rng>(rng: &mut R, map: &ModuleMap, rel: f64) -> ModuleMap {
    let images = perturb_images(rng, map.images(), map.dim_out(), rel);
    ModuleMap::new(map.module().clone(), map.dim_out(), map.dim_h(), images).unwrap()
}

pub fn transpose_map(a: &cstar_core::BlockAlgebra) -> OperatorMap {
    let s = a.size();
    OperatorMap::from_fn(a, s, s, |x| x.to_matrix().transpose()).unwrap()
}

/// Minimal Stinespring dimension from the Choi ranks: `sum_k n_k rank(C_k)`.
pub fn choi_rank_dimension(phi: &OperatorMap, tol: &Tolerance) -> usize {
    cstar_core::cp::choi_blocks(phi)
        .unwrap()
        .iter()
        .zip(phi.domain().blocks())
        .map(|(c, n)| n * linalg::numerical_rank(c, tol))
        .sum()
}
