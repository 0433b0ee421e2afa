//! Finite-dimensional C*-algebras `A = M_{n_1} (+) ... (+) M_{n_K}`, the free
//! Hilbert module `E = A^m`, its compacts `K(E) = M_m(A)` and the linking
//! algebra `L(E) = M_{m+1}(A)`.
//!
//! Since `A` is unital and `E` is free, `K(E)` is already unital, so the
//! unitization of the linking algebra coincides with `L(E)` itself.
//!
//! Amplified algebras `M_n(A)` are stored as block algebras with block sizes
//! `n * n_k`; inside block `k` the row index `I * n_k + i` addresses row `i` of
//! array entry `I`. All canonical bases are matrix units `E_ij`, block by
//! block, rows major.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::AlgebraError;
use crate::linalg::{self, CMatrix, ONE};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "BlockAlgebraRepr")]
pub struct BlockAlgebra {
    blocks: Vec<usize>,
}

#[derive(Deserialize)]
struct BlockAlgebraRepr {
    blocks: Vec<usize>,
}

impl TryFrom<BlockAlgebraRepr> for BlockAlgebra {
    type Error = AlgebraError;
    fn try_from(r: BlockAlgebraRepr) -> Result<Self, Self::Error> {
        Self::new(r.blocks)
    }
}

impl BlockAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self, AlgebraError> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(AlgebraError::InvalidBlocks(blocks));
        }
        Ok(Self { blocks })
    }

    /// The scalars `C`.
    pub fn scalars() -> Self {
        Self { blocks: vec![1] }
    }

    /// The full matrix algebra `M_n`.
    pub fn full(n: usize) -> Self {
        Self::new(vec![n]).expect("n must be positive")
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Complex linear dimension `sum n_k^2`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    /// Size of the concrete block-diagonal realization, `sum n_k`.
    pub fn size(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn basis_offset(&self, k: usize) -> usize {
        self.blocks[..k].iter().map(|n| n * n).sum()
    }

    fn size_offset(&self, k: usize) -> usize {
        self.blocks[..k].iter().sum()
    }

    /// `(block, row, col)` of basis element `idx`.
    pub fn basis_entry(&self, mut idx: usize) -> (usize, usize, usize) {
        for (k, &n) in self.blocks.iter().enumerate() {
            if idx < n * n {
                return (k, idx / n, idx % n);
            }
            idx -= n * n;
        }
        panic!("basis index out of range for {:?}", self.blocks)
    }

    pub fn basis_index(&self, k: usize, i: usize, j: usize) -> usize {
        let n = self.blocks[k];
        debug_assert!(i < n && j < n);
        self.basis_offset(k) + i * n + j
    }

    /// Index of `E_ji` for `idx = E_ij`.
    pub fn basis_adjoint(&self, idx: usize) -> usize {
        let (k, i, j) = self.basis_entry(idx);
        self.basis_index(k, j, i)
    }

    /// Structure constants of the matrix-unit basis: `E_ij E_kl = d_jk E_il`.
    pub fn basis_product(&self, p: usize, q: usize) -> Option<usize> {
        let (k1, i, j) = self.basis_entry(p);
        let (k2, r, l) = self.basis_entry(q);
        (k1 == k2 && j == r).then(|| self.basis_index(k1, i, l))
    }

    /// Basis indices of the diagonal units `E_ii`, which sum to the identity.
    pub fn unit_indices(&self) -> Vec<usize> {
        (0..self.blocks.len())
            .flat_map(|k| (0..self.blocks[k]).map(move |i| (k, i)))
            .map(|(k, i)| self.basis_index(k, i, i))
            .collect()
    }

    /// `M_n(A)` as a block algebra with sizes `n * n_k`.
    pub fn amplify(&self, n: usize) -> BlockAlgebra {
        assert!(n >= 1, "amplification level must be positive");
        BlockAlgebra {
            blocks: self.blocks.iter().map(|b| b * n).collect(),
        }
    }

    /// Splits a basis index of `self.amplify(n)` into the array position
    /// `(I, J)` and the basis index of `self` found there.
    pub fn split_amplified(&self, n: usize, idx: usize) -> (usize, usize, usize) {
        let (k, r, c) = self.amplify(n).basis_entry(idx);
        let nk = self.blocks[k];
        (r / nk, c / nk, self.basis_index(k, r % nk, c % nk))
    }

    pub fn join_amplified(&self, n: usize, big_i: usize, big_j: usize, idx: usize) -> usize {
        let (k, i, j) = self.basis_entry(idx);
        let nk = self.blocks[k];
        self.amplify(n)
            .basis_index(k, big_i * nk + i, big_j * nk + j)
    }
}

/// An element of a block algebra: one square matrix per block.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    algebra: BlockAlgebra,
    blocks: Vec<CMatrix>,
}

impl AlgebraElement {
    pub fn from_blocks(algebra: &BlockAlgebra, blocks: Vec<CMatrix>) -> Result<Self, AlgebraError> {
        if blocks.len() != algebra.blocks.len() {
            return Err(AlgebraError::Dimension {
                context: "number of blocks",
                expected: algebra.blocks.len(),
                found: blocks.len(),
            });
        }
        for (b, &n) in blocks.iter().zip(&algebra.blocks) {
            if b.shape() != (n, n) {
                return Err(AlgebraError::Dimension {
                    context: "block size",
                    expected: n,
                    found: b.nrows().max(b.ncols()),
                });
            }
            if !linalg::is_finite(b) {
                return Err(AlgebraError::NonFinite);
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub fn zero(algebra: &BlockAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            blocks: algebra.blocks.iter().map(|&n| linalg::zeros(n, n)).collect(),
        }
    }

    pub fn one(algebra: &BlockAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            blocks: algebra.blocks.iter().map(|&n| linalg::identity(n)).collect(),
        }
    }

    pub fn basis(algebra: &BlockAlgebra, idx: usize) -> Self {
        let mut e = Self::zero(algebra);
        let (k, i, j) = algebra.basis_entry(idx);
        e.blocks[k][(i, j)] = ONE;
        e
    }

    pub fn from_coords(algebra: &BlockAlgebra, coords: &[Complex64]) -> Result<Self, AlgebraError> {
        if coords.len() != algebra.dim() {
            return Err(AlgebraError::Dimension {
                context: "algebra coordinates",
                expected: algebra.dim(),
                found: coords.len(),
            });
        }
        let mut e = Self::zero(algebra);
        for (idx, &z) in coords.iter().enumerate() {
            let (k, i, j) = algebra.basis_entry(idx);
            e.blocks[k][(i, j)] = z;
        }
        Ok(e)
    }

    /// Coordinates in the matrix-unit basis.
    pub fn coords(&self) -> Vec<Complex64> {
        self.blocks.iter().flat_map(|b| b.transpose().iter().copied().collect::<Vec<_>>()).collect()
    }

    /// Compresses a `size x size` matrix onto the diagonal blocks.
    pub fn from_matrix(algebra: &BlockAlgebra, m: &CMatrix) -> Result<Self, AlgebraError> {
        if m.shape() != (algebra.size(), algebra.size()) {
            return Err(AlgebraError::Dimension {
                context: "concrete realization",
                expected: algebra.size(),
                found: m.nrows(),
            });
        }
        let blocks = (0..algebra.blocks.len())
            .map(|k| {
                let off = algebra.size_offset(k);
                let n = algebra.blocks[k];
                m.view((off, off), (n, n)).into_owned()
            })
            .collect();
        Self::from_blocks(algebra, blocks)
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// Block-diagonal realization in `M_{size}(C)`.
    pub fn to_matrix(&self) -> CMatrix {
        linalg::direct_sum(&self.blocks)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// C*-norm, the largest block operator norm.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// Unnormalized trace `sum_k tr(a_k)`.
    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(|b| b.trace()).sum()
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|b| b * z).collect(),
        }
    }

    pub fn ensure_same_algebra(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.algebra != other.algebra {
            return Err(AlgebraError::AlgebraMismatch {
                left: self.algebra.blocks.clone(),
                right: other.algebra.blocks.clone(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Self {
        self.ensure_same_algebra(other)
            .expect("algebra elements over different algebras");
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.ensure_same_algebra(other)?;
        Ok(self.zip_with(other, |a, b| a * b))
    }

    /// Entry `(I, J)` of an element of `base.amplify(n)`.
    pub fn entry(&self, base: &BlockAlgebra, n: usize, big_i: usize, big_j: usize) -> AlgebraElement {
        debug_assert_eq!(self.algebra, base.amplify(n));
        let blocks = base
            .blocks
            .iter()
            .enumerate()
            .map(|(k, &nk)| {
                self.blocks[k]
                    .view((big_i * nk, big_j * nk), (nk, nk))
                    .into_owned()
            })
            .collect();
        AlgebraElement {
            algebra: base.clone(),
            blocks,
        }
    }

    /// Assembles an `n x n` array over `base` into an element of `base.amplify(n)`.
    pub fn from_entries(base: &BlockAlgebra, entries: &[Vec<AlgebraElement>]) -> Result<Self, AlgebraError> {
        let n = entries.len();
        if n == 0 {
            return Err(AlgebraError::Ragged("empty array"));
        }
        if entries.iter().any(|row| row.len() != n) {
            return Err(AlgebraError::Ragged("array must be square"));
        }
        for e in entries.iter().flatten() {
            if &e.algebra != base {
                return Err(AlgebraError::AlgebraMismatch {
                    left: base.blocks.clone(),
                    right: e.algebra.blocks.clone(),
                });
            }
        }
        let big = base.amplify(n);
        let blocks = base
            .blocks
            .iter()
            .enumerate()
            .map(|(k, &nk)| {
                let mut b = linalg::zeros(n * nk, n * nk);
                for (bi, row) in entries.iter().enumerate() {
                    for (bj, e) in row.iter().enumerate() {
                        b.view_mut((bi * nk, bj * nk), (nk, nk)).copy_from(&e.blocks[k]);
                    }
                }
                b
            })
            .collect();
        Ok(AlgebraElement { algebra: big, blocks })
    }

    /// Realization of an element of `base.amplify(n)` as the `n x n` array of
    /// concrete `size x size` matrices.
    pub fn array_matrix(&self, base: &BlockAlgebra, n: usize) -> CMatrix {
        let s = base.size();
        let mut out = linalg::zeros(n * s, n * s);
        for i in 0..n {
            for j in 0..n {
                out.view_mut((i * s, j * s), (s, s))
                    .copy_from(&self.entry(base, n, i, j).to_matrix());
            }
        }
        out
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    /// Panics on mismatched algebras; see [`AlgebraElement::try_mul`].
    fn mul(self, rhs: Self) -> AlgebraElement {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(-ONE)
    }
}

/// The free right Hilbert module `A^m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "HilbertModuleRepr")]
pub struct HilbertModule {
    algebra: BlockAlgebra,
    m: usize,
}

#[derive(Deserialize)]
struct HilbertModuleRepr {
    algebra: BlockAlgebra,
    m: usize,
}

impl TryFrom<HilbertModuleRepr> for HilbertModule {
    type Error = AlgebraError;
    fn try_from(r: HilbertModuleRepr) -> Result<Self, Self::Error> {
        Self::new(r.algebra, r.m)
    }
}

impl HilbertModule {
    pub fn new(algebra: BlockAlgebra, m: usize) -> Result<Self, AlgebraError> {
        if m == 0 {
            return Err(AlgebraError::ZeroRank);
        }
        Ok(Self { algebra, m })
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    /// Complex dimension `m * dim A`.
    pub fn dim(&self) -> usize {
        self.m * self.algebra.dim()
    }

    /// `(slot, algebra basis index)` of module basis element `b`.
    pub fn basis_entry(&self, b: usize) -> (usize, usize) {
        (b / self.algebra.dim(), b % self.algebra.dim())
    }

    /// `<b, b'>` for module basis elements, as an algebra basis index.
    pub fn basis_inner(&self, b: usize, b2: usize) -> Option<usize> {
        let (s, p) = self.basis_entry(b);
        let (t, q) = self.basis_entry(b2);
        if s != t {
            return None;
        }
        self.algebra.basis_product(self.algebra.basis_adjoint(p), q)
    }

    /// `K(E) = M_m(A)`.
    pub fn compacts(&self) -> BlockAlgebra {
        self.algebra.amplify(self.m)
    }

    /// `L(E) = M_{m+1}(A)`, with `K(E)` in the upper-left corner.
    pub fn linking_algebra(&self) -> BlockAlgebra {
        self.algebra.amplify(self.m + 1)
    }

    /// `M_n(E)` as a Hilbert module over `M_n(A)`.
    pub fn amplify(&self, n: usize) -> HilbertModule {
        HilbertModule {
            algebra: self.algebra.amplify(n),
            m: self.m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleElement {
    module: HilbertModule,
    coords: Vec<AlgebraElement>,
}

impl ModuleElement {
    pub fn new(module: &HilbertModule, coords: Vec<AlgebraElement>) -> Result<Self, AlgebraError> {
        if coords.len() != module.m {
            return Err(AlgebraError::Dimension {
                context: "module coordinates",
                expected: module.m,
                found: coords.len(),
            });
        }
        for c in &coords {
            if c.algebra != module.algebra {
                return Err(AlgebraError::AlgebraMismatch {
                    left: module.algebra.blocks.clone(),
                    right: c.algebra.blocks.clone(),
                });
            }
        }
        Ok(Self {
            module: module.clone(),
            coords,
        })
    }

    pub fn zero(module: &HilbertModule) -> Self {
        Self {
            module: module.clone(),
            coords: vec![AlgebraElement::zero(&module.algebra); module.m],
        }
    }

    pub fn basis(module: &HilbertModule, b: usize) -> Self {
        let (s, p) = module.basis_entry(b);
        let mut x = Self::zero(module);
        x.coords[s] = AlgebraElement::basis(&module.algebra, p);
        x
    }

    pub fn from_vector(module: &HilbertModule, v: &[Complex64]) -> Result<Self, AlgebraError> {
        if v.len() != module.dim() {
            return Err(AlgebraError::Dimension {
                context: "module vector",
                expected: module.dim(),
                found: v.len(),
            });
        }
        let d = module.algebra.dim();
        let coords = v
            .chunks(d)
            .map(|c| AlgebraElement::from_coords(&module.algebra, c))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            module: module.clone(),
            coords,
        })
    }

    /// Coordinates in the module basis.
    pub fn to_vector(&self) -> Vec<Complex64> {
        self.coords.iter().flat_map(AlgebraElement::coords).collect()
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn coords(&self) -> &[AlgebraElement] {
        &self.coords
    }

    /// Column realization: the `m * size x size` stack of coordinates, so that
    /// `<x, y> = X* Y`.
    pub fn to_matrix(&self) -> CMatrix {
        let s = self.module.algebra.size();
        let parts: Vec<_> = self.coords.iter().map(AlgebraElement::to_matrix).collect();
        linalg::vstack(&parts, s)
    }

    /// `<x, y> = sum_i x_i* y_i`.
    pub fn inner_product(&self, other: &Self) -> Result<AlgebraElement, AlgebraError> {
        if self.module != other.module {
            return Err(AlgebraError::ModuleMismatch);
        }
        let mut acc = AlgebraElement::zero(&self.module.algebra);
        for (x, y) in self.coords.iter().zip(&other.coords) {
            acc = &acc + &(&x.adjoint() * y);
        }
        Ok(acc)
    }

    /// Right action `(x a)_i = x_i a`.
    pub fn act(&self, a: &AlgebraElement) -> Result<Self, AlgebraError> {
        if a.algebra != self.module.algebra {
            return Err(AlgebraError::AlgebraMismatch {
                left: self.module.algebra.blocks.clone(),
                right: a.algebra.blocks.clone(),
            });
        }
        Ok(Self {
            module: self.module.clone(),
            coords: self.coords.iter().map(|x| x * a).collect(),
        })
    }

    /// `||x|| = ||<x, x>||^(1/2)`.
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.to_matrix())
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            module: self.module.clone(),
            coords: self.coords.iter().map(|x| x.scale(z)).collect(),
        }
    }

    /// Rank-one compact `theta_{x,y}: z -> x <y, z>`, entries `x_i y_j*`.
    pub fn theta(&self, y: &Self) -> Result<AlgebraElement, AlgebraError> {
        if self.module != y.module {
            return Err(AlgebraError::ModuleMismatch);
        }
        let entries: Vec<Vec<_>> = self
            .coords
            .iter()
            .map(|xi| y.coords.iter().map(|yj| xi * &yj.adjoint()).collect())
            .collect();
        AlgebraElement::from_entries(&self.module.algebra, &entries)
    }

    /// Action of a compact `T in M_m(A)`: `(T x)_i = sum_j T_ij x_j`.
    pub fn apply_compact(&self, t: &AlgebraElement) -> Result<Self, AlgebraError> {
        let base = &self.module.algebra;
        let m = self.module.m;
        if t.algebra != self.module.compacts() {
            return Err(AlgebraError::AlgebraMismatch {
                left: self.module.compacts().blocks.clone(),
                right: t.algebra.blocks.clone(),
            });
        }
        let coords = (0..m)
            .map(|i| {
                (0..m).fold(AlgebraElement::zero(base), |acc, j| {
                    &acc + &(&t.entry(base, m, i, j) * &self.coords[j])
                })
            })
            .collect();
        Ok(Self {
            module: self.module.clone(),
            coords,
        })
    }
}

impl Add for &ModuleElement {
    type Output = ModuleElement;
    fn add(self, rhs: Self) -> ModuleElement {
        assert_eq!(self.module, rhs.module, "module elements over different modules");
        ModuleElement {
            module: self.module.clone(),
            coords: self.coords.iter().zip(&rhs.coords).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ModuleElement {
    type Output = ModuleElement;
    fn sub(self, rhs: Self) -> ModuleElement {
        self + &rhs.scale(-ONE)
    }
}

/// Amplifies an `n x n` array over `E` to an element of `M_n(E)`, a Hilbert
/// module over `M_n(A)` whose inner product is `[sum_k <x_ki, y_kj>]`.
pub fn amplify_module(array: &[Vec<ModuleElement>]) -> Result<ModuleElement, AlgebraError> {
    let n = array.len();
    if n == 0 || array.iter().any(|row| row.len() != n) {
        return Err(AlgebraError::Ragged("module array must be square and non-empty"));
    }
    let module = array[0][0].module.clone();
    if array.iter().flatten().any(|x| x.module != module) {
        return Err(AlgebraError::ModuleMismatch);
    }
    let coords = (0..module.m)
        .map(|s| {
            let entries: Vec<Vec<_>> = array
                .iter()
                .map(|row| row.iter().map(|x| x.coords[s].clone()).collect())
                .collect();
            AlgebraElement::from_entries(&module.algebra, &entries)
        })
        .collect::<Result<_, _>>()?;
    Ok(ModuleElement {
        module: module.amplify(n),
        coords,
    })
}

/// An element `[[T, x], [y*, a]]` of the linking algebra, kept in its formal
/// block form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkingElement {
    pub t: AlgebraElement,
    pub x: ModuleElement,
    pub y: ModuleElement,
    pub a: AlgebraElement,
}

impl LinkingElement {
    pub fn new(
        t: AlgebraElement,
        x: ModuleElement,
        y: ModuleElement,
        a: AlgebraElement,
    ) -> Result<Self, AlgebraError> {
        let module = x.module.clone();
        if y.module != module {
            return Err(AlgebraError::ModuleMismatch);
        }
        if t.algebra != module.compacts() {
            return Err(AlgebraError::AlgebraMismatch {
                left: module.compacts().blocks.clone(),
                right: t.algebra.blocks.clone(),
            });
        }
        if a.algebra != module.algebra {
            return Err(AlgebraError::AlgebraMismatch {
                left: module.algebra.blocks.clone(),
                right: a.algebra.blocks.clone(),
            });
        }
        Ok(Self { t, x, y, a })
    }

    pub fn zero(module: &HilbertModule) -> Self {
        Self {
            t: AlgebraElement::zero(&module.compacts()),
            x: ModuleElement::zero(module),
            y: ModuleElement::zero(module),
            a: AlgebraElement::zero(&module.algebra),
        }
    }

    pub fn identity(module: &HilbertModule) -> Self {
        Self {
            t: AlgebraElement::one(&module.compacts()),
            a: AlgebraElement::one(&module.algebra),
            ..Self::zero(module)
        }
    }

    pub fn module(&self) -> &HilbertModule {
        &self.x.module
    }

    /// The same element as a member of the block algebra `M_{m+1}(A)`.
    pub fn to_block_element(&self) -> AlgebraElement {
        let module = self.module();
        let (base, m) = (&module.algebra, module.m);
        let entries: Vec<Vec<_>> = (0..=m)
            .map(|i| {
                (0..=m)
                    .map(|j| match (i < m, j < m) {
                        (true, true) => self.t.entry(base, m, i, j),
                        (true, false) => self.x.coords[i].clone(),
                        (false, true) => self.y.coords[j].adjoint(),
                        (false, false) => self.a.clone(),
                    })
                    .collect()
            })
            .collect();
        AlgebraElement::from_entries(base, &entries).expect("consistent linking entries")
    }

    pub fn from_block_element(module: &HilbertModule, e: &AlgebraElement) -> Result<Self, AlgebraError> {
        let (base, m) = (&module.algebra, module.m);
        if e.algebra != module.linking_algebra() {
            return Err(AlgebraError::AlgebraMismatch {
                left: module.linking_algebra().blocks.clone(),
                right: e.algebra.blocks.clone(),
            });
        }
        let t_entries: Vec<Vec<_>> = (0..m)
            .map(|i| (0..m).map(|j| e.entry(base, m + 1, i, j)).collect())
            .collect();
        Ok(Self {
            t: AlgebraElement::from_entries(base, &t_entries)?,
            x: ModuleElement {
                module: module.clone(),
                coords: (0..m).map(|i| e.entry(base, m + 1, i, m)).collect(),
            },
            y: ModuleElement {
                module: module.clone(),
                coords: (0..m).map(|j| e.entry(base, m + 1, m, j).adjoint()).collect(),
            },
            a: e.entry(base, m + 1, m, m),
        })
    }

    /// Concrete `(m + 1) * size` square realization.
    pub fn to_matrix(&self) -> CMatrix {
        let module = self.module();
        self.to_block_element()
            .array_matrix(&module.algebra, module.m + 1)
    }

    /// Formal adjoint `[[T*, y], [x*, a*]]`.
    pub fn adjoint(&self) -> Self {
        Self {
            t: self.t.adjoint(),
            x: self.y.clone(),
            y: self.x.clone(),
            a: self.a.adjoint(),
        }
    }

    /// Formal product computed with the module rules:
    /// `[[T1 T2 + theta(x1, y2), T1 x2 + x1 a2], [(T2* y1 + y2 a1*)*, <y1, x2> + a1 a2]]`.
    pub fn formal_mul(&self, rhs: &Self) -> Result<Self, AlgebraError> {
        if self.module() != rhs.module() {
            return Err(AlgebraError::ModuleMismatch);
        }
        let t = &self.t.try_mul(&rhs.t)? + &self.x.theta(&rhs.y)?;
        let x = &rhs.x.apply_compact(&self.t)? + &self.x.act(&rhs.a)?;
        let y = &self.y.apply_compact(&rhs.t.adjoint())? + &rhs.y.act(&self.a.adjoint())?;
        let a = &self.y.inner_product(&rhs.x)? + &self.a.try_mul(&rhs.a)?;
        Ok(Self { t, x, y, a })
    }
}

/// `[[T, x], [y*, a]]` in `L(E)`.
pub fn embed_linking(
    t: AlgebraElement,
    x: ModuleElement,
    y: ModuleElement,
    a: AlgebraElement,
) -> Result<LinkingElement, AlgebraError> {
    LinkingElement::new(t, x, y, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn scalar(z: f64) -> AlgebraElement {
        AlgebraElement::from_coords(&BlockAlgebra::scalars(), &[C::new(z, 0.0)]).unwrap()
    }

    #[test]
    fn block_algebra_dims() {
        let a = BlockAlgebra::new(vec![2, 3]).unwrap();
        assert_eq!((a.dim(), a.size()), (13, 5));
        assert!(BlockAlgebra::new(vec![]).is_err());
        assert!(BlockAlgebra::new(vec![2, 0]).is_err());
        for idx in 0..a.dim() {
            let (k, i, j) = a.basis_entry(idx);
            assert_eq!(a.basis_index(k, i, j), idx);
            let (bi, bj, inner) = a.split_amplified(3, a.join_amplified(3, 2, 1, idx));
            assert_eq!((bi, bj, inner), (2, 1, idx));
        }
        assert_eq!(a.unit_indices().len(), 5);
    }

    #[test]
    fn basis_product_matches_matrix_product() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        for p in 0..a.dim() {
            for q in 0..a.dim() {
                let direct = &AlgebraElement::basis(&a, p) * &AlgebraElement::basis(&a, q);
                let expected = a
                    .basis_product(p, q)
                    .map_or_else(|| AlgebraElement::zero(&a), |r| AlgebraElement::basis(&a, r));
                assert_eq!(direct, expected);
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let e = HilbertModule::new(BlockAlgebra::scalars(), 2).unwrap();
        let x = ModuleElement::new(&e, vec![scalar(1.0), scalar(0.0)]).unwrap();
        let y = ModuleElement::new(&e, vec![scalar(0.0), scalar(1.0)]).unwrap();
        assert_eq!(x.inner_product(&y).unwrap().coords(), vec![C::new(0.0, 0.0)]);
        let z = ModuleElement::new(&e, vec![scalar(1.0), scalar(1.0)]).unwrap();
        assert_eq!(z.inner_product(&z).unwrap().coords(), vec![C::new(2.0, 0.0)]);

        // A = M2, x = e12: x* x = e21 e12 = e22
        let m2 = BlockAlgebra::full(2);
        let e1 = HilbertModule::new(m2.clone(), 1).unwrap();
        let shift = ModuleElement::new(&e1, vec![AlgebraElement::basis(&m2, 1)]).unwrap();
        assert_eq!(
            shift.inner_product(&shift).unwrap(),
            AlgebraElement::basis(&m2, 3)
        );

        let other = HilbertModule::new(BlockAlgebra::scalars(), 1).unwrap();
        assert_eq!(
            x.inner_product(&ModuleElement::zero(&other)),
            Err(AlgebraError::ModuleMismatch)
        );
    }

    #[test]
    fn module_action_unit_and_zero() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        let e = HilbertModule::new(a.clone(), 2).unwrap();
        let v: Vec<C> = (0..e.dim()).map(|i| C::new(i as f64, 1.0 - i as f64)).collect();
        let x = ModuleElement::from_vector(&e, &v).unwrap();
        assert_eq!(x.act(&AlgebraElement::one(&a)).unwrap(), x);
        assert_eq!(x.act(&AlgebraElement::zero(&a)).unwrap(), ModuleElement::zero(&e));
        assert_eq!(x.to_vector(), v);
        assert!(x.act(&AlgebraElement::one(&BlockAlgebra::full(2))).is_err());
    }

    #[test]
    fn compacts_examples() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        assert_eq!(HilbertModule::new(a.clone(), 1).unwrap().compacts(), a);
        let c2 = HilbertModule::new(BlockAlgebra::scalars(), 2).unwrap();
        assert_eq!(c2.compacts(), BlockAlgebra::full(2));
        let m22 = HilbertModule::new(BlockAlgebra::full(2), 2).unwrap();
        assert_eq!(m22.compacts().blocks(), &[4]);
    }

    #[test]
    fn linking_zero_and_identity() {
        let e = HilbertModule::new(BlockAlgebra::new(vec![2, 1]).unwrap(), 2).unwrap();
        let n = 3 * e.algebra().size();
        assert_eq!(LinkingElement::zero(&e).to_matrix(), linalg::zeros(n, n));
        assert_eq!(LinkingElement::identity(&e).to_matrix(), linalg::identity(n));
    }

    #[test]
    fn module_basis_inner_products() {
        let e = HilbertModule::new(BlockAlgebra::new(vec![2, 1]).unwrap(), 2).unwrap();
        for b in 0..e.dim() {
            for b2 in 0..e.dim() {
                let direct = ModuleElement::basis(&e, b)
                    .inner_product(&ModuleElement::basis(&e, b2))
                    .unwrap();
                let expected = e.basis_inner(b, b2).map_or_else(
                    || AlgebraElement::zero(e.algebra()),
                    |r| AlgebraElement::basis(e.algebra(), r),
                );
                assert_eq!(direct, expected);
            }
        }
    }
}
