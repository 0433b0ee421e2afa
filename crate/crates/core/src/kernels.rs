//! Operator-valued positive definite kernels on finite point sets and their
//! Kolmogorov decompositions.

use serde::{Deserialize, Serialize};

use crate::algebra::ModuleElement;
use crate::error::{AlgebraError, KernelError};
use crate::linalg::{self, serde_cmatrix, CMatrix, IsometryClass, Tolerance};
use crate::maps::OperatorMap;

/// A kernel `k(x_i, x_j)` on `N` labelled points, each value a `dim_h` square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct FiniteKernel {
    points: Vec<String>,
    dim_h: usize,
    gram: Vec<Vec<CMatrix>>,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    points: Vec<String>,
    #[serde(rename = "dim_H")]
    dim_h: usize,
    #[serde(with = "serde_cmatrix::nested")]
    gram: Vec<Vec<CMatrix>>,
}

impl TryFrom<KernelRepr> for FiniteKernel {
    type Error = KernelError;
    fn try_from(r: KernelRepr) -> Result<Self, KernelError> {
        let n = r.points.len();
        let gram = r
            .gram
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|m| linalg::with_shape(m, r.dim_h, r.dim_h))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        if gram.len() != n {
            return Err(KernelError::Dimension {
                context: "kernel gram rows",
                expected: n,
                found: gram.len(),
            });
        }
        FiniteKernel::new(r.points, r.dim_h, gram)
    }
}

impl From<FiniteKernel> for KernelRepr {
    fn from(k: FiniteKernel) -> Self {
        Self {
            points: k.points,
            dim_h: k.dim_h,
            gram: k.gram,
        }
    }
}

impl FiniteKernel {
    /// Checks shapes only; formal Hermitian symmetry is a tolerance question
    /// and is left to [`FiniteKernel::is_formally_hermitian`].
    pub fn new(points: Vec<String>, dim_h: usize, gram: Vec<Vec<CMatrix>>) -> Result<Self, KernelError> {
        let n = points.len();
        if gram.len() != n || gram.iter().any(|row| row.len() != n) {
            return Err(AlgebraError::Ragged("kernel gram must be N x N").into());
        }
        for m in gram.iter().flatten() {
            if m.shape() != (dim_h, dim_h) {
                return Err(KernelError::Dimension {
                    context: "kernel value size",
                    expected: dim_h,
                    found: m.nrows().max(m.ncols()),
                });
            }
            if !linalg::is_finite(m) {
                return Err(AlgebraError::NonFinite.into());
            }
        }
        Ok(Self { points, dim_h, gram })
    }

    /// Default labels `x0, x1, ...`.
    pub fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    /// `k(x_i, x_j) = Phi(x_i)* Phi(x_j)`.
    pub fn from_map(ops: &[CMatrix], dim_h: usize) -> Result<Self, KernelError> {
        let rows = ops.first().map_or(0, CMatrix::nrows);
        for op in ops {
            if op.shape() != (rows, dim_h) {
                return Err(KernelError::Dimension {
                    context: "point operator",
                    expected: dim_h,
                    found: op.ncols(),
                });
            }
        }
        let gram = ops
            .iter()
            .map(|a| ops.iter().map(|b| a.adjoint() * b).collect())
            .collect();
        Self::new(Self::labels(ops.len()), dim_h, gram)
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn value(&self, i: usize, j: usize) -> &CMatrix {
        &self.gram[i][j]
    }

    /// The `N dim_h` square block matrix `[k(x_i, x_j)]`.
    pub fn block_gram(&self) -> CMatrix {
        let (n, d) = (self.len(), self.dim_h);
        let mut g = linalg::zeros(n * d, n * d);
        for i in 0..n {
            for j in 0..n {
                g.view_mut((i * d, j * d), (d, d)).copy_from(&self.gram[i][j]);
            }
        }
        g
    }

    pub fn is_formally_hermitian(&self, tol: &Tolerance) -> bool {
        linalg::is_hermitian(&self.block_gram(), tol)
    }
}

pub fn is_positive_definite(k: &FiniteKernel, tol: &Tolerance) -> bool {
    linalg::is_psd(&k.block_gram(), tol).unwrap_or(false)
}

/// `k(x, y) = nu(x)* nu(y)` with `nu(x): C^dim_h -> C^dim_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovPair {
    #[serde(rename = "dim_K")]
    pub dim_k: usize,
    #[serde(with = "serde_cmatrix::vec")]
    pub nu: Vec<CMatrix>,
    pub minimal: bool,
}

impl KolmogorovPair {
    /// Builds a pair and decides minimality from the rank of the spanning vectors.
    pub fn new(dim_k: usize, nu: Vec<CMatrix>, tol: &Tolerance) -> Result<Self, KernelError> {
        let dim_h = nu.first().map_or(0, CMatrix::ncols);
        if let Some(bad) = nu.iter().find(|v| v.shape() != (dim_k, dim_h)) {
            return Err(KernelError::Dimension {
                context: "Kolmogorov operator rows",
                expected: dim_k,
                found: bad.nrows(),
            });
        }
        let span = linalg::hstack(&nu, dim_k);
        let minimal = linalg::numerical_rank(&span, tol) == dim_k;
        Ok(Self { dim_k, nu, minimal })
    }

    pub fn dim_h(&self) -> usize {
        self.nu.first().map_or(0, CMatrix::ncols)
    }

    /// `[nu(x_1) ... nu(x_N)]`.
    pub fn spanning_vectors(&self) -> CMatrix {
        linalg::hstack(&self.nu, self.dim_k)
    }

    pub fn kernel(&self, points: Vec<String>) -> Result<FiniteKernel, KernelError> {
        let mut k = FiniteKernel::from_map(&self.nu, self.dim_h())?;
        k.points = points;
        Ok(k)
    }

    /// Relative Frobenius residual between `nu(x)* nu(y)` and `k`.
    pub fn residual(&self, k: &FiniteKernel) -> f64 {
        if self.nu.len() != k.len() || self.dim_h() != k.dim_h() && !k.is_empty() {
            return f64::INFINITY;
        }
        let s = self.spanning_vectors();
        linalg::rel_residual(&(s.adjoint() * &s), &k.block_gram())
    }

    /// Reproduction and minimality checks against `k`.
    pub fn verify(&self, k: &FiniteKernel, tol: &Tolerance) -> Result<f64, KernelError> {
        let r = self.residual(k);
        if r > tol.eps_eq {
            return Err(KernelError::KernelMismatch { residual: r });
        }
        let rank = linalg::numerical_rank(&self.spanning_vectors(), tol);
        if self.minimal != (rank == self.dim_k) {
            return Err(KernelError::Dimension {
                context: "minimality flag vs span rank",
                expected: self.dim_k,
                found: rank,
            });
        }
        Ok(r)
    }
}

/// Minimal decomposition from the rank-revealing factor of the block Gram.
pub fn minimal_kolmogorov(k: &FiniteKernel, tol: &Tolerance) -> Result<KolmogorovPair, KernelError> {
    let g = k.block_gram();
    if !linalg::is_psd(&g, tol)? {
        return Err(KernelError::NotPositiveDefinite {
            min_eigenvalue: linalg::min_eigenvalue(&g),
        });
    }
    let f = linalg::psd_factor(&g, tol)?.factor;
    let d = k.dim_h();
    let nu = (0..k.len()).map(|i| linalg::columns(&f, i * d, d)).collect();
    let pair = KolmogorovPair::new(f.nrows(), nu, tol)?;
    if !pair.minimal {
        return Err(KernelError::Dimension {
            context: "minimal Kolmogorov span rank",
            expected: pair.dim_k,
            found: linalg::numerical_rank(&pair.spanning_vectors(), tol),
        });
    }
    Ok(pair)
}

/// The isometry `V: K -> L` with `V nu(x) = upsilon(x)`, solved by least
/// squares on the spanning vectors of the minimal pair.
pub fn equivalence_isometry(
    minimal: &KolmogorovPair,
    other: &KolmogorovPair,
    tol: &Tolerance,
) -> Result<CMatrix, KernelError> {
    if minimal.nu.len() != other.nu.len() || minimal.dim_h() != other.dim_h() {
        return Err(KernelError::Dimension {
            context: "decomposition point count",
            expected: minimal.nu.len(),
            found: other.nu.len(),
        });
    }
    if !minimal.minimal {
        return Err(KernelError::Dimension {
            context: "first decomposition must be minimal; span rank",
            expected: minimal.dim_k,
            found: linalg::numerical_rank(&minimal.spanning_vectors(), tol),
        });
    }
    let n = minimal.spanning_vectors();
    let u = other.spanning_vectors();
    let kernel_residual = linalg::rel_residual(&(u.adjoint() * &u), &(n.adjoint() * &n));
    if kernel_residual > tol.eps_eq {
        return Err(KernelError::KernelMismatch {
            residual: kernel_residual,
        });
    }
    let v = intertwiner(&n, &u, tol)?;
    let fit = linalg::rel_residual(&(&v * &n), &u);
    if fit > tol.eps_eq {
        return Err(KernelError::KernelMismatch { residual: fit });
    }
    match linalg::classify_isometry(&v, tol) {
        IsometryClass::Isometry | IsometryClass::Unitary => Ok(v),
        class => Err(KernelError::NotIsometry(class)),
    }
}

/// Least-squares `X` with `X from = to`.
pub fn intertwiner(from: &CMatrix, to: &CMatrix, tol: &Tolerance) -> Result<CMatrix, crate::error::LinalgError> {
    Ok(linalg::lsq_solve(&from.adjoint(), &to.adjoint(), tol)?.adjoint())
}

/// `Lambda_Phi(x, y) = Phi(x)* Phi(y)`.
pub fn kernel_from_map(ops: &[CMatrix], dim_h: usize) -> Result<FiniteKernel, KernelError> {
    FiniteKernel::from_map(ops, dim_h)
}

/// `k(x_i, x_j) = phi(<x_i, x_j>)` on a finite sample of one module.
pub fn kernel_from_cp(phi: &OperatorMap, sample: &[ModuleElement]) -> Result<FiniteKernel, KernelError> {
    if let Some(first) = sample.first() {
        if first.module().algebra() != phi.domain() {
            return Err(AlgebraError::AlgebraMismatch {
                left: phi.domain().blocks().to_vec(),
                right: first.module().algebra().blocks().to_vec(),
            }
            .into());
        }
        if sample.iter().any(|x| x.module() != first.module()) {
            return Err(AlgebraError::ModuleMismatch.into());
        }
    }
    if !phi.is_square_valued() {
        return Err(crate::error::MapError::NotSquareValued {
            rows: phi.dim_k(),
            cols: phi.dim_h(),
        }
        .into());
    }
    let gram = sample
        .iter()
        .map(|x| {
            sample
                .iter()
                .map(|y| Ok(phi.apply(&x.inner_product(y)?)?))
                .collect::<Result<Vec<_>, KernelError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    FiniteKernel::new(FiniteKernel::labels(sample.len()), phi.dim_h(), gram)
}

/// Searches the canonical bases of `A^1 ... A^max_rank` for a sample on which
/// `phi(<x_i, x_j>)` fails to be positive definite.
pub fn find_violating_sample(
    phi: &OperatorMap,
    max_rank: usize,
    tol: &Tolerance,
) -> Result<Option<Vec<ModuleElement>>, KernelError> {
    for m in 1..=max_rank {
        let e = crate::algebra::HilbertModule::new(phi.domain().clone(), m)?;
        let sample: Vec<_> = (0..e.dim()).map(|b| ModuleElement::basis(&e, b)).collect();
        if !is_positive_definite(&kernel_from_cp(phi, &sample)?, tol) {
            return Ok(Some(sample));
        }
    }
    Ok(None)
}
