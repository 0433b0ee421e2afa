//! Dense complex matrix backbone.
//!
//! Everything in the toolkit is eventually a `CMatrix`: operators between
//! finite-dimensional Hilbert spaces, images of maps, Gram matrices. The
//! routines here decide positivity, rank and isometry type with explicit,
//! relative tolerances so that randomly scaled instances behave the same.

use faer::{c64, Mat, MatRef, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::LinalgError;

/// Dense complex matrix, row/column counts may be zero.
pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative tolerances used by every numerical decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Relative eigenvalue floor for positivity.
    pub eps_psd: f64,
    /// Relative singular-value cutoff for rank decisions.
    pub eps_rank: f64,
    /// Relative residual for equality checks.
    pub eps_eq: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            eps_psd: 1e-9,
            eps_rank: 1e-10,
            eps_eq: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(eps_psd: f64, eps_rank: f64, eps_eq: f64) -> Result<Self, LinalgError> {
        let tol = Self {
            eps_psd,
            eps_rank,
            eps_eq,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<(), LinalgError> {
        for (name, v) in [
            ("eps_psd", self.eps_psd),
            ("eps_rank", self.eps_rank),
            ("eps_eq", self.eps_eq),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(LinalgError::InvalidTolerance { name, value: v });
            }
        }
        Ok(())
    }
}

/// Conjugate transpose.
pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Matrix unit `E_ij` in `M_{rows x cols}`.
pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(rows, cols);
    m[(i, j)] = ONE;
    m
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn to_faer(m: &CMatrix) -> Mat<c64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        c64::new(z.re, z.im)
    })
}

fn from_faer(m: MatRef<'_, c64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        Complex64::new(z.re, z.im)
    })
}

/// Thin SVD `m = U diag(s) V*`, singular values descending.
struct Svd {
    u: CMatrix,
    s: Vec<f64>,
    v: CMatrix,
}

// nalgebra's complex SVD stops early on inputs with clustered singular
// values (reconstruction errors near 1e-8), so decompositions go through faer.
fn svd(m: &CMatrix) -> Svd {
    let f = to_faer(m).thin_svd().expect("SVD did not converge");
    Svd {
        u: from_faer(f.U()),
        s: f.S().column_vector().iter().map(|z| z.re).collect(),
        v: from_faer(f.V()),
    }
}

fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("SVD did not converge")
}

/// Largest singular value (0 for empty matrices).
pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of the Hermitian part.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    if m.nrows() == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = to_faer(&hermitian_part(m))
        .self_adjoint_eigen(Side::Lower)
        .expect("eigendecomposition did not converge");
    let values = eig.S().column_vector().iter().map(|z| z.re).collect();
    (values, from_faer(eig.U()))
}

/// Smallest eigenvalue of the Hermitian part (0 for empty matrices).
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

fn require_square(m: &CMatrix) -> Result<(), LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Relative distance `||a - b||_F / max(1, ||b||_F)`.
pub fn rel_residual(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    frobenius(&(a - b)) / frobenius(b).max(1.0)
}

/// Equality up to `eps_eq`, measured in Frobenius norm relative to `max(1, ||b||)`.
pub fn approx_eq(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> bool {
    a.shape() == b.shape() && rel_residual(a, b) <= tol.eps_eq
}

pub fn is_hermitian(m: &CMatrix, tol: &Tolerance) -> bool {
    m.is_square() && frobenius(&(m - m.adjoint())) <= tol.eps_eq * op_norm(m).max(1.0)
}

/// Positive semidefiniteness with tolerances relative to `max(1, ||M||)`.
pub fn is_psd(m: &CMatrix, tol: &Tolerance) -> Result<bool, LinalgError> {
    require_square(m)?;
    if m.is_empty() {
        return Ok(true);
    }
    let scale = op_norm(m).max(1.0);
    if frobenius(&(m - m.adjoint())) > tol.eps_eq * scale {
        return Ok(false);
    }
    Ok(min_eigenvalue(m) >= -tol.eps_psd * scale)
}

/// Rank-revealing factorization `G = F* F` of a PSD matrix.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    /// `rank x n`, rows mutually orthogonal.
    pub factor: CMatrix,
    pub rank: usize,
}

/// Factor a PSD matrix through its Hermitian eigendecomposition, dropping
/// eigenvalues at or below `eps_rank * lambda_max`.
pub fn psd_factor(g: &CMatrix, tol: &Tolerance) -> Result<PsdFactor, LinalgError> {
    if !is_psd(g, tol)? {
        return Err(LinalgError::NotPsd {
            min_eigenvalue: if g.is_square() { min_eigenvalue(g) } else { f64::NAN },
        });
    }
    let n = g.nrows();
    let (values, vectors) = hermitian_eigen(g);
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..n)
        .rev()
        .filter(|&i| lambda_max > 0.0 && values[i] > tol.eps_rank * lambda_max)
        .collect();
    let rank = kept.len();
    let factor = CMatrix::from_fn(rank, n, |r, c| {
        let i = kept[r];
        vectors[(c, i)].conj() * values[i].sqrt()
    });
    Ok(PsdFactor { factor, rank })
}

/// Rank-revealing factor of `N* N` computed from `N` directly, without
/// forming the (possibly much larger) Gram matrix.
pub fn gram_factor_from_root(root: &CMatrix, tol: &Tolerance) -> PsdFactor {
    let n = root.ncols();
    if root.is_empty() {
        return PsdFactor {
            factor: zeros(0, n),
            rank: 0,
        };
    }
    // N N* = U S^2 U*, and F = U_r* N has F* F = N* N.
    let (values, vectors) = hermitian_eigen(&(root * root.adjoint()));
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..values.len())
        .rev()
        .filter(|&i| lambda_max > 0.0 && values[i] > tol.eps_rank * lambda_max)
        .collect();
    let basis = CMatrix::from_fn(root.nrows(), kept.len(), |r, c| vectors[(r, kept[c])]);
    PsdFactor {
        factor: basis.adjoint() * root,
        rank: kept.len(),
    }
}

/// Number of singular values above `eps_rank * sigma_max`.
pub fn numerical_rank(m: &CMatrix, tol: &Tolerance) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol.eps_rank * smax).count()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn range_basis(m: &CMatrix, tol: &Tolerance) -> CMatrix {
    if m.is_empty() {
        return zeros(m.nrows(), 0);
    }
    let svd = svd(m);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let rank = svd.s.iter().filter(|&&s| smax > 0.0 && s > tol.eps_rank * smax).count();
    svd.u.columns(0, rank).into_owned()
}

/// Least-squares solution of `A X = B` through the pseudo-inverse with
/// relative singular-value cutoff `eps_rank`.
pub fn lsq_solve(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> Result<CMatrix, LinalgError> {
    if a.nrows() != b.nrows() {
        return Err(LinalgError::DimensionMismatch {
            context: "lsq_solve",
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if a.is_empty() {
        return Ok(zeros(a.ncols(), b.ncols()));
    }
    let svd = svd(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let ub = svd.u.adjoint() * b;
    let mut scaled = zeros(svd.s.len(), b.ncols());
    for (i, &s) in svd.s.iter().enumerate() {
        if smax > 0.0 && s > tol.eps_rank * smax {
            let inv = Complex64::new(1.0 / s, 0.0);
            for c in 0..b.ncols() {
                scaled[(i, c)] = ub[(i, c)] * inv;
            }
        }
    }
    Ok(svd.v * scaled)
}

/// Isometry type of an operator, strongest applicable label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsometryClass {
    Unitary,
    Isometry,
    Coisometry,
    PartialIsometry,
    Contraction,
    None,
}

impl IsometryClass {
    /// `M* M` is a projection.
    pub fn is_partial_isometry(self) -> bool {
        matches!(
            self,
            Self::Unitary | Self::Isometry | Self::Coisometry | Self::PartialIsometry
        )
    }

    pub fn is_contraction(self) -> bool {
        self != Self::None
    }
}

pub fn classify_isometry(m: &CMatrix, tol: &Tolerance) -> IsometryClass {
    let close = |a: &CMatrix, b: &CMatrix| op_norm(&(a - b)) <= tol.eps_eq;
    let mm = m.adjoint() * m;
    let mmt = m * m.adjoint();
    let iso = close(&mm, &identity(m.ncols()));
    let coiso = close(&mmt, &identity(m.nrows()));
    match (iso, coiso) {
        (true, true) => IsometryClass::Unitary,
        (true, false) => IsometryClass::Isometry,
        (false, true) => IsometryClass::Coisometry,
        _ if close(&(&mm * &mm), &mm) => IsometryClass::PartialIsometry,
        _ if op_norm(m) <= 1.0 + tol.eps_eq => IsometryClass::Contraction,
        _ => IsometryClass::None,
    }
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Horizontal concatenation of equally tall matrices.
pub fn hstack(parts: &[CMatrix], rows: usize) -> CMatrix {
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        debug_assert_eq!(p.nrows(), rows);
        out.view_mut((0, c), p.shape()).copy_from(p);
        c += p.ncols();
    }
    out
}

/// Vertical concatenation of equally wide matrices.
pub fn vstack(parts: &[CMatrix], cols: usize) -> CMatrix {
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        debug_assert_eq!(p.ncols(), cols);
        out.view_mut((r, 0), p.shape()).copy_from(p);
        r += p.nrows();
    }
    out
}

/// Columns `start..start + len` as an owned matrix.
pub fn columns(m: &CMatrix, start: usize, len: usize) -> CMatrix {
    m.view((0, start), (m.nrows(), len)).into_owned()
}

/// Rebuild a matrix read from nested arrays whose empty shape lost one of
/// its dimensions.
pub fn with_shape(m: CMatrix, rows: usize, cols: usize) -> Result<CMatrix, LinalgError> {
    if m.shape() == (rows, cols) {
        Ok(m)
    } else if m.is_empty() && rows * cols == 0 {
        Ok(zeros(rows, cols))
    } else {
        Err(LinalgError::ShapeMismatch {
            expected: (rows, cols),
            found: m.shape(),
        })
    }
}

/// Serde helpers: complex scalars as `[re, im]`, matrices as row-major
/// nested arrays.
pub mod serde_cmatrix {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
            .collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("ragged matrix rows".into());
        }
        if rows.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite matrix entry".into());
        }
        Ok(CMatrix::from_fn(nrows, ncols, |r, c| {
            Complex64::new(rows[r][c][0], rows[r][c][1])
        }))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[CMatrix], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMatrix>, D::Error> {
            let all = Vec::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
            all.iter()
                .map(|rows| from_rows(rows).map_err(D::Error::custom))
                .collect()
        }
    }

    pub mod nested {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[Vec<CMatrix>], s: S) -> Result<S::Ok, S::Error> {
            ms.iter()
                .map(|row| row.iter().map(to_rows).collect::<Vec<_>>())
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Vec<Vec<CMatrix>>, D::Error> {
            let all = Vec::<Vec<Vec<Vec<[f64; 2]>>>>::deserialize(d)?;
            all.iter()
                .map(|row| {
                    row.iter()
                        .map(|rows| from_rows(rows).map_err(D::Error::custom))
                        .collect()
                })
                .collect()
        }
    }
}
