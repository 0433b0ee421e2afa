//! Linear operator-valued maps stored by their images on a canonical basis.
//!
//! [`OperatorMap`] lives on a block algebra, [`ModuleMap`] on a free Hilbert
//! module. Linearity is structural: a map *is* its list of basis images.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BlockAlgebra, HilbertModule, ModuleElement};
use crate::error::{AlgebraError, LinalgError, MapError};
use crate::linalg::{self, serde_cmatrix, CMatrix, Tolerance};
use crate::random;

/// A linear map `A -> B(C^dim_h, C^dim_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorMapRepr", into = "OperatorMapRepr")]
pub struct OperatorMap {
    domain: BlockAlgebra,
    dim_h: usize,
    dim_k: usize,
    images: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
struct OperatorMapRepr {
    domain: BlockAlgebra,
    #[serde(rename = "dim_H")]
    dim_h: usize,
    #[serde(rename = "dim_K", default, skip_serializing_if = "Option::is_none")]
    dim_k: Option<usize>,
    #[serde(with = "serde_cmatrix::vec")]
    images: Vec<CMatrix>,
}

impl TryFrom<OperatorMapRepr> for OperatorMap {
    type Error = MapError;
    fn try_from(r: OperatorMapRepr) -> Result<Self, MapError> {
        let dim_k = r.dim_k.unwrap_or(r.dim_h);
        let images = r
            .images
            .into_iter()
            .map(|m| linalg::with_shape(m, dim_k, r.dim_h))
            .collect::<Result<_, _>>()?;
        Self::new(r.domain, dim_k, r.dim_h, images)
    }
}

impl From<OperatorMap> for OperatorMapRepr {
    fn from(m: OperatorMap) -> Self {
        Self {
            dim_k: (m.dim_k != m.dim_h).then_some(m.dim_k),
            domain: m.domain,
            dim_h: m.dim_h,
            images: m.images,
        }
    }
}

impl OperatorMap {
    /// Images are `dim_k x dim_h`, one per basis element of `domain`.
    pub fn new(
        domain: BlockAlgebra,
        dim_k: usize,
        dim_h: usize,
        images: Vec<CMatrix>,
    ) -> Result<Self, MapError> {
        if images.len() != domain.dim() {
            return Err(MapError::Dimension {
                context: "number of basis images",
                expected: domain.dim(),
                found: images.len(),
            });
        }
        for img in &images {
            if img.shape() != (dim_k, dim_h) {
                return Err(linalg_shape(dim_k, dim_h, img));
            }
            if !linalg::is_finite(img) {
                return Err(AlgebraError::NonFinite.into());
            }
        }
        Ok(Self {
            domain,
            dim_h,
            dim_k,
            images,
        })
    }

    /// Tabulates `f` on the canonical basis.
    pub fn from_fn(
        domain: &BlockAlgebra,
        dim_k: usize,
        dim_h: usize,
        f: impl Fn(&AlgebraElement) -> CMatrix,
    ) -> Result<Self, MapError> {
        let images = (0..domain.dim())
            .map(|i| f(&AlgebraElement::basis(domain, i)))
            .collect();
        Self::new(domain.clone(), dim_k, dim_h, images)
    }

    pub fn zero(domain: &BlockAlgebra, dim_k: usize, dim_h: usize) -> Self {
        Self {
            domain: domain.clone(),
            dim_h,
            dim_k,
            images: vec![linalg::zeros(dim_k, dim_h); domain.dim()],
        }
    }

    /// `a -> a` on the concrete realization of `domain`.
    pub fn identity(domain: &BlockAlgebra) -> Self {
        let s = domain.size();
        Self::from_fn(domain, s, s, AlgebraElement::to_matrix).expect("identity shapes")
    }

    /// `a -> sum_j K_j* a K_j` with `K_j: C^dim_h -> C^size`.
    pub fn from_kraus(domain: &BlockAlgebra, kraus: &[CMatrix]) -> Result<Self, MapError> {
        let dim_h = kraus.first().map_or(0, |k| k.ncols());
        for k in kraus {
            if k.shape() != (domain.size(), dim_h) {
                return Err(linalg_shape(domain.size(), dim_h, k));
            }
        }
        Self::from_fn(domain, dim_h, dim_h, |a| {
            let am = a.to_matrix();
            kraus
                .iter()
                .fold(linalg::zeros(dim_h, dim_h), |acc, k| acc + k.adjoint() * &am * k)
        })
    }

    pub fn domain(&self) -> &BlockAlgebra {
        &self.domain
    }

    /// Input dimension.
    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    /// Output dimension.
    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn image(&self, idx: usize) -> &CMatrix {
        &self.images[idx]
    }

    pub fn is_square_valued(&self) -> bool {
        self.dim_h == self.dim_k
    }

    pub fn apply(&self, a: &AlgebraElement) -> Result<CMatrix, MapError> {
        if a.algebra() != &self.domain {
            return Err(AlgebraError::AlgebraMismatch {
                left: self.domain.blocks().to_vec(),
                right: a.algebra().blocks().to_vec(),
            }
            .into());
        }
        Ok(combine(&self.images, &a.coords(), self.dim_k, self.dim_h))
    }

    /// `phi(1)`.
    pub fn unit_image(&self) -> CMatrix {
        self.domain
            .unit_indices()
            .into_iter()
            .fold(linalg::zeros(self.dim_k, self.dim_h), |acc, i| acc + &self.images[i])
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            images: self.images.iter().map(|m| m * z).collect(),
            ..self.clone()
        }
    }

    /// `a -> left * phi(a) * right`.
    pub fn compress(&self, left: &CMatrix, right: &CMatrix) -> Result<Self, MapError> {
        if left.ncols() != self.dim_k || right.nrows() != self.dim_h {
            return Err(MapError::Dimension {
                context: "compression",
                expected: self.dim_k,
                found: left.ncols(),
            });
        }
        Self::new(
            self.domain.clone(),
            left.nrows(),
            right.ncols(),
            self.images.iter().map(|m| left * m * right).collect(),
        )
    }

    /// Entrywise amplification `phi_n([a_ij]) = [phi(a_ij)]` on `M_n(A)`.
    pub fn amplify(&self, n: usize) -> Self {
        let big = self.domain.amplify(n);
        let images = (0..big.dim())
            .map(|idx| {
                let (bi, bj, inner) = self.domain.split_amplified(n, idx);
                linalg::kron(&linalg::unit(n, n, bi, bj), &self.images[inner])
            })
            .collect();
        Self {
            domain: big,
            dim_h: n * self.dim_h,
            dim_k: n * self.dim_k,
            images,
        }
    }

    /// `phi(a*) = phi(a)*` on the basis.
    pub fn is_star_preserving(&self, tol: &Tolerance) -> bool {
        self.is_square_valued()
            && (0..self.domain.dim()).all(|p| {
                let q = self.domain.basis_adjoint(p);
                close(&self.images[p].adjoint(), &self.images[q], tol)
            })
    }

    /// Verifies that the map is a (not necessarily unital) *-homomorphism.
    ///
    /// On each block with matrix units `E_ij` it suffices that the map is
    /// *-preserving, `pi(E_ij) = pi(E_i1) pi(E_1j)`, `pi(E_1i) pi(E_j1) = d_ij pi(E_11)`,
    /// and `pi(E_1i) pi(E_j1) = 0` across different blocks.
    pub fn check_star_homomorphism(&self, tol: &Tolerance) -> Result<(), MapError> {
        let fail = |msg: String| Err(MapError::NotRepresentation(msg));
        if !self.is_square_valued() {
            return fail(format!("images are {}x{}", self.dim_k, self.dim_h));
        }
        if !self.is_star_preserving(tol) {
            return fail("not *-preserving".into());
        }
        let d = &self.domain;
        let img = |k: usize, i: usize, j: usize| &self.images[d.basis_index(k, i, j)];
        let zero = linalg::zeros(self.dim_k, self.dim_h);
        for (k, &n) in d.blocks().iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    if !close(&(img(k, i, 0) * img(k, 0, j)), img(k, i, j), tol) {
                        return fail(format!("block {k}: pi(E_{i}{j}) != pi(E_{i}1) pi(E_1{j})"));
                    }
                    let expected = if i == j { img(k, 0, 0) } else { &zero };
                    if !close(&(img(k, 0, i) * img(k, j, 0)), expected, tol) {
                        return fail(format!("block {k}: matrix-unit relation fails at ({i}, {j})"));
                    }
                }
            }
            for (l, &nl) in d.blocks().iter().enumerate().filter(|&(l, _)| l != k) {
                for i in 0..n {
                    for j in 0..nl {
                        if !close(&(img(k, 0, i) * img(l, j, 0)), &zero, tol) {
                            return fail(format!("blocks {k} and {l} are not orthogonal"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_star_homomorphism(&self, tol: &Tolerance) -> bool {
        self.check_star_homomorphism(tol).is_ok()
    }
}

fn linalg_shape(rows: usize, cols: usize, m: &CMatrix) -> MapError {
    MapError::Linalg(LinalgError::ShapeMismatch {
        expected: (rows, cols),
        found: m.shape(),
    })
}

/// `||a - b||_F <= eps_eq * max(1, ||b||_F)`.
pub(crate) fn close(a: &CMatrix, b: &CMatrix, tol: &Tolerance) -> bool {
    linalg::rel_residual(a, b) <= tol.eps_eq
}

fn combine(images: &[CMatrix], coeffs: &[Complex64], rows: usize, cols: usize) -> CMatrix {
    let mut acc = linalg::zeros(rows, cols);
    for (img, &z) in images.iter().zip(coeffs) {
        if z != linalg::ZERO {
            acc += img * z;
        }
    }
    acc
}

/// A `C`-linear map `E -> B(C^dim_h, C^dim_out)` on a free Hilbert module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModuleMapRepr", into = "ModuleMapRepr")]
pub struct ModuleMap {
    module: HilbertModule,
    dim_h: usize,
    dim_out: usize,
    images: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
struct ModuleMapRepr {
    module: HilbertModule,
    #[serde(rename = "dim_H")]
    dim_h: usize,
    dim_out: usize,
    #[serde(with = "serde_cmatrix::vec")]
    images: Vec<CMatrix>,
}

impl TryFrom<ModuleMapRepr> for ModuleMap {
    type Error = MapError;
    fn try_from(r: ModuleMapRepr) -> Result<Self, MapError> {
        let images = r
            .images
            .into_iter()
            .map(|m| linalg::with_shape(m, r.dim_out, r.dim_h))
            .collect::<Result<_, _>>()?;
        Self::new(r.module, r.dim_out, r.dim_h, images)
    }
}

impl From<ModuleMap> for ModuleMapRepr {
    fn from(m: ModuleMap) -> Self {
        Self {
            module: m.module,
            dim_h: m.dim_h,
            dim_out: m.dim_out,
            images: m.images,
        }
    }
}

impl ModuleMap {
    /// Images are `dim_out x dim_h`, one per basis element of `module`.
    pub fn new(
        module: HilbertModule,
        dim_out: usize,
        dim_h: usize,
        images: Vec<CMatrix>,
    ) -> Result<Self, MapError> {
        if images.len() != module.dim() {
            return Err(MapError::Dimension {
                context: "number of module basis images",
                expected: module.dim(),
                found: images.len(),
            });
        }
        for img in &images {
            if img.shape() != (dim_out, dim_h) {
                return Err(linalg_shape(dim_out, dim_h, img));
            }
            if !linalg::is_finite(img) {
                return Err(AlgebraError::NonFinite.into());
            }
        }
        Ok(Self {
            module,
            dim_h,
            dim_out,
            images,
        })
    }

    pub fn from_fn(
        module: &HilbertModule,
        dim_out: usize,
        dim_h: usize,
        f: impl Fn(&ModuleElement) -> CMatrix,
    ) -> Result<Self, MapError> {
        let images = (0..module.dim())
            .map(|b| f(&ModuleElement::basis(module, b)))
            .collect();
        Self::new(module.clone(), dim_out, dim_h, images)
    }

    pub fn zero(module: &HilbertModule, dim_out: usize, dim_h: usize) -> Self {
        Self {
            module: module.clone(),
            dim_h,
            dim_out,
            images: vec![linalg::zeros(dim_out, dim_h); module.dim()],
        }
    }

    /// Reads an operator map on `A` as a module map on `E = A^1`.
    pub fn from_operator_map(map: &OperatorMap) -> Self {
        let module = HilbertModule::new(map.domain().clone(), 1).expect("rank one");
        Self {
            module,
            dim_h: map.dim_h(),
            dim_out: map.dim_k(),
            images: map.images().to_vec(),
        }
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn image(&self, b: usize) -> &CMatrix {
        &self.images[b]
    }

    pub fn apply(&self, x: &ModuleElement) -> Result<CMatrix, MapError> {
        if x.module() != &self.module {
            return Err(AlgebraError::ModuleMismatch.into());
        }
        Ok(combine(&self.images, &x.to_vector(), self.dim_out, self.dim_h))
    }

    /// `[Phi(b_1) ... Phi(b_D)]`, whose columns span `[Phi(E) H]`.
    pub fn stacked(&self) -> CMatrix {
        linalg::hstack(&self.images, self.dim_out)
    }

    /// Gram of `Phi` on `E (x) C^dim_h`: entry `((b,h),(b',k)) = <h, Phi(b)* Phi(b') k>`.
    pub fn gram(&self) -> CMatrix {
        let s = self.stacked();
        s.adjoint() * s
    }

    /// `x -> left * Phi(x)`.
    pub fn left_mul(&self, left: &CMatrix) -> Result<Self, MapError> {
        if left.ncols() != self.dim_out {
            return Err(MapError::Dimension {
                context: "left factor",
                expected: self.dim_out,
                found: left.ncols(),
            });
        }
        Self::new(
            self.module.clone(),
            left.nrows(),
            self.dim_h,
            self.images.iter().map(|m| left * m).collect(),
        )
    }

    /// `x -> Phi(x) * right`.
    pub fn right_mul(&self, right: &CMatrix) -> Result<Self, MapError> {
        if right.nrows() != self.dim_h {
            return Err(MapError::Dimension {
                context: "right factor",
                expected: self.dim_h,
                found: right.nrows(),
            });
        }
        Self::new(
            self.module.clone(),
            self.dim_out,
            right.ncols(),
            self.images.iter().map(|m| m * right).collect(),
        )
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            images: self.images.iter().map(|m| m * z).collect(),
            ..self.clone()
        }
    }

    /// `Phi_n([x_ij]) = [Phi(x_ij)]`.
    pub fn apply_amplified(&self, array: &[Vec<ModuleElement>]) -> Result<CMatrix, MapError> {
        let n = array.len();
        if array.iter().any(|row| row.len() != n) {
            return Err(AlgebraError::Ragged("module array must be square").into());
        }
        let mut out = linalg::zeros(n * self.dim_out, n * self.dim_h);
        for (i, row) in array.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                out.view_mut((i * self.dim_out, j * self.dim_h), (self.dim_out, self.dim_h))
                    .copy_from(&self.apply(x)?);
            }
        }
        Ok(out)
    }

    /// Maximum relative residual between two maps on the module basis.
    pub fn residual_to(&self, other: &ModuleMap) -> f64 {
        if self.module != other.module || self.dim_out != other.dim_out || self.dim_h != other.dim_h {
            return f64::INFINITY;
        }
        self.images
            .iter()
            .zip(&other.images)
            .map(|(a, b)| linalg::rel_residual(a, b))
            .fold(0.0, f64::max)
    }
}

/// Access needed to sample amplifications of a linear map whose domain has a
/// concrete matrix realization (`A` block-diagonally, `E` as columns), so that
/// the norm of an element of `M_n(domain)` is the operator norm of its
/// realization.
pub trait LinearOperatorMap {
    fn basis_len(&self) -> usize;
    fn basis_image(&self, idx: usize) -> &CMatrix;
    fn basis_realization(&self, idx: usize) -> CMatrix;
}

impl LinearOperatorMap for OperatorMap {
    fn basis_len(&self) -> usize {
        self.domain.dim()
    }
    fn basis_image(&self, idx: usize) -> &CMatrix {
        &self.images[idx]
    }
    fn basis_realization(&self, idx: usize) -> CMatrix {
        AlgebraElement::basis(&self.domain, idx).to_matrix()
    }
}

impl LinearOperatorMap for ModuleMap {
    fn basis_len(&self) -> usize {
        self.module.dim()
    }
    fn basis_image(&self, idx: usize) -> &CMatrix {
        &self.images[idx]
    }
    fn basis_realization(&self, idx: usize) -> CMatrix {
        ModuleElement::basis(&self.module, idx).to_matrix()
    }
}

/// Samples used per amplification level by [`cb_lower_bound`].
pub const CB_SAMPLES_PER_LEVEL: usize = 12;

/// Certified lower bound for `||Phi||_cb`: the largest ratio
/// `||Phi_n(x)|| / ||x||` over random `x in M_n(domain)` for `n <= levels`,
/// together with every canonical basis element.
pub fn cb_lower_bound<M: LinearOperatorMap, R: Rng + ?Sized>(map: &M, levels: usize, rng: &mut R) -> f64 {
    let len = map.basis_len();
    let mut best: f64 = 0.0;
    for b in 0..len {
        let denom = linalg::op_norm(&map.basis_realization(b));
        if denom > 0.0 {
            best = best.max(linalg::op_norm(map.basis_image(b)) / denom);
        }
    }
    let realizations: Vec<CMatrix> = (0..len).map(|b| map.basis_realization(b)).collect();
    for n in 1..=levels {
        for _ in 0..CB_SAMPLES_PER_LEVEL {
            let coeffs: Vec<CMatrix> = (0..len).map(|_| random::gaussian_matrix(rng, n, n)).collect();
            let x = coeffs
                .iter()
                .zip(&realizations)
                .map(|(c, r)| linalg::kron(c, r))
                .reduce(|a, b| a + b);
            let y = coeffs
                .iter()
                .enumerate()
                .map(|(b, c)| linalg::kron(c, map.basis_image(b)))
                .reduce(|a, b| a + b);
            if let (Some(x), Some(y)) = (x, y) {
                let denom = linalg::op_norm(&x);
                if denom > 0.0 {
                    best = best.max(linalg::op_norm(&y) / denom);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn apply_is_linear_combination_of_images() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        let phi = OperatorMap::identity(&a);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = random::algebra_element(&mut rng, &a);
        assert!(linalg::rel_residual(&phi.apply(&x).unwrap(), &x.to_matrix()) < 1e-15);
        assert!(phi.apply(&AlgebraElement::one(&BlockAlgebra::full(2))).is_err());
        assert_eq!(phi.unit_image(), linalg::identity(3));
    }

    #[test]
    fn amplify_level_one_is_identity_and_identity_stays_identity() {
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let phi = random::cp_map(&mut rng, &a, 2, 2);
        assert_eq!(phi.amplify(1), phi);
        // identity on A amplifies to identity on M_2(A), realized as arrays
        let id2 = OperatorMap::identity(&a).amplify(2);
        let base = a.clone();
        for idx in 0..id2.domain().dim() {
            let e = AlgebraElement::basis(id2.domain(), idx);
            assert_eq!(id2.image(idx), &e.array_matrix(&base, 2));
        }
    }

    #[test]
    fn star_homomorphism_check() {
        let tol = Tolerance::default();
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        assert!(OperatorMap::identity(&a).is_star_homomorphism(&tol));
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let pi = random::representation(&mut rng, &a, &[2, 1]);
        assert!(pi.is_star_homomorphism(&tol));
        assert!(!pi.scale(Complex64::new(2.0, 0.0)).is_star_homomorphism(&tol));
        // transpose is *-preserving but anti-multiplicative
        let transpose = OperatorMap::from_fn(&a, 3, 3, |x| x.to_matrix().transpose()).unwrap();
        assert!(transpose.is_star_preserving(&tol));
        assert!(!transpose.is_star_homomorphism(&tol));
        assert!(OperatorMap::zero(&a, 2, 2).is_star_homomorphism(&tol));
    }

    #[test]
    fn star_homomorphism_check_agrees_with_all_pairs() {
        let tol = Tolerance::default();
        let a = BlockAlgebra::new(vec![2, 2]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let pi = random::representation(&mut rng, &a, &[1, 2]);
        let kraus = [random::gaussian_matrix(&mut rng, 4, 3)];
        let not_rep = OperatorMap::from_kraus(&a, &kraus).unwrap();
        for map in [&pi, &not_rep] {
            let all_pairs = (0..a.dim()).all(|p| {
                (0..a.dim()).all(|q| {
                    let prod = map.image(p) * map.image(q);
                    let expected = a
                        .basis_product(p, q)
                        .map_or_else(|| linalg::zeros(map.dim_k(), map.dim_h()), |r| map.image(r).clone());
                    close(&prod, &expected, &tol)
                })
            }) && map.is_star_preserving(&tol);
            assert_eq!(all_pairs, map.is_star_homomorphism(&tol));
        }
    }

    #[test]
    fn cb_lower_bound_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let a = BlockAlgebra::new(vec![2]).unwrap();
        assert_eq!(cb_lower_bound(&OperatorMap::zero(&a, 2, 2), 3, &mut rng), 0.0);
        let pi = random::representation(&mut rng, &a, &[2]);
        let lb = cb_lower_bound(&pi, 2, &mut rng);
        assert!((1.0 - 1e-6..=1.0 + 1e-9).contains(&lb));
    }

    #[test]
    fn module_map_json_roundtrip_keeps_empty_shapes() {
        let e = HilbertModule::new(BlockAlgebra::scalars(), 2).unwrap();
        let zero = ModuleMap::zero(&e, 0, 3);
        let json = serde_json::to_string(&zero).unwrap();
        let back: ModuleMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, zero);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let phi = random::linear_module_map(&mut rng, &e, 2, 3);
        let back: ModuleMap = serde_json::from_str(&serde_json::to_string(&phi).unwrap()).unwrap();
        assert_eq!(back, phi);
        let x = ModuleElement::basis(&e, 1).scale(ONE);
        assert_eq!(&phi.apply(&x).unwrap(), phi.image(1));
    }
}
