//! Completely bounded module maps: a dominating trace-type CP map, the
//! dilation `Phi = W* Psi V`, the factorization `Phi = S Gamma` through a
//! phi-map, and the completely positive extension to the linking algebra.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, HilbertModule, LinkingElement, ModuleElement};
use crate::cp;
use crate::error::CbError;
use crate::linalg::{self, serde_cmatrix, CMatrix, Tolerance};
use crate::maps::{self, ModuleMap, OperatorMap};
use crate::phi::{self, CanonicalRepData, PhiContext};
use crate::SCHEMA;

fn schema() -> String {
    SCHEMA.to_string()
}

fn violation(msg: impl Into<String>) -> CbError {
    CbError::Violation(msg.into())
}

/// `T_ij = tr(<b_i, b_j>)` on the module basis.
pub fn trace_gram(module: &HilbertModule) -> CMatrix {
    let a = module.algebra();
    let n = module.dim();
    CMatrix::from_fn(n, n, |i, j| match module.basis_inner(i, j) {
        Some(p) => AlgebraElement::basis(a, p).trace(),
        None => linalg::ZERO,
    })
}

/// `c = lambda_max((T^-1/2 (x) I) G_Phi (T^-1/2 (x) I))`, the least `c` with
/// `c tr(<x, y>) I` dominating `Phi(x)* Phi(y)`.
pub fn domination_constant(map: &ModuleMap) -> f64 {
    let g = map.gram();
    if g.iter().all(|z| *z == linalg::ZERO) {
        return 0.0;
    }
    let (values, vectors) = linalg::hermitian_eigen(&trace_gram(map.module()));
    let inv_sqrt = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|v| num_complex::Complex64::new(1.0 / v.sqrt(), 0.0)),
    ));
    let t = &vectors * inv_sqrt * vectors.adjoint();
    let k = linalg::kron(&t, &linalg::identity(map.dim_h()));
    let whitened = &k * g * &k;
    linalg::hermitian_eigen(&linalg::hermitian_part(&whitened))
        .0
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(0.0)
}

/// `psi(a) = c tr(a) I_H` with `c` from [`domination_constant`].
pub fn dominating_cp(map: &ModuleMap) -> OperatorMap {
    let c = domination_constant(map);
    let d = map.dim_h();
    OperatorMap::from_fn(map.module().algebra(), d, d, |a| {
        linalg::identity(d) * (a.trace() * c)
    })
    .expect("square images")
}

/// Relative residual of `Phi(b) = W* Psi(b) V` over the basis.
fn dilation_residual(map: &ModuleMap, rep: &ModuleMap, v: &CMatrix, w: &CMatrix) -> Result<f64, CbError> {
    let rhs = rep.right_mul(v)?.left_mul(&w.adjoint())?;
    Ok(linalg::rel_residual(&rhs.stacked(), &map.stacked()))
}

fn map_residual(a: &OperatorMap, b: &OperatorMap) -> f64 {
    if a.domain() != b.domain() || a.dim_h() != b.dim_h() || a.dim_k() != b.dim_k() {
        return f64::INFINITY;
    }
    let sa = linalg::hstack(a.images(), a.dim_k());
    let sb = linalg::hstack(b.images(), b.dim_k());
    linalg::rel_residual(&sa, &sb)
}

/// `Phi(x) = W* Psi(x) V` with `Psi` a pi-representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationCertificate {
    #[serde(default = "schema")]
    pub schema: String,
    pub psi: OperatorMap,
    pub pi: OperatorMap,
    pub rep: CanonicalRepData,
    #[serde(rename = "V", with = "serde_cmatrix")]
    pub v: CMatrix,
    #[serde(rename = "W", with = "serde_cmatrix")]
    pub w: CMatrix,
    pub residual: f64,
    pub tolerance: Tolerance,
}

impl DilationCertificate {
    /// Re-checks every identity carried by the certificate against `Phi`.
    pub fn verify(&self, map: &ModuleMap) -> Result<f64, CbError> {
        let tol = &self.tolerance;
        let v = linalg::with_shape(self.v.clone(), self.pi.dim_k(), self.psi.dim_h())?;
        let w = linalg::with_shape(self.w.clone(), self.rep.dim_kpi, map.dim_out())?;
        if !cp::is_completely_positive(&self.psi, tol) {
            return Err(violation("dominating map is not completely positive"));
        }
        self.pi.check_star_homomorphism(tol)?;
        let compressed = self.pi.compress(&v.adjoint(), &v)?;
        let psi_residual = map_residual(&compressed, &self.psi);
        if psi_residual > tol.eps_eq {
            return Err(violation(format!("psi != V* pi V (residual {psi_residual:e})")));
        }
        let rep_residual = phi::phi_map_residual(&self.rep.rep_map, &self.pi)?;
        if rep_residual > tol.eps_eq {
            return Err(violation(format!("Psi is not a pi-map (residual {rep_residual:e})")));
        }
        if !phi::is_completely_semi_phi_map(map, &self.psi, tol) {
            return Err(violation("Phi is not dominated by psi"));
        }
        if !linalg::classify_isometry(&w, tol).is_contraction() {
            return Err(violation(format!("W is not a contraction (norm {})", linalg::op_norm(&w))));
        }
        let r = dilation_residual(map, &self.rep.rep_map, &v, &w)?;
        if r > tol.eps_eq {
            return Err(violation(format!("Phi != W* Psi V (residual {r:e})")));
        }
        Ok(r)
    }
}

/// Dilation through the dominating map: `psi`, its minimal Stinespring
/// `(pi, V)`, `Psi_pi`, and the semi-phi factorization of `Phi` against `psi`.
pub fn dilate(map: &ModuleMap, tol: &Tolerance) -> Result<DilationCertificate, CbError> {
    let psi = dominating_cp(map);
    let ctx = PhiContext::new(&psi, map.module(), tol)?;
    let f = phi::factor_semi_phi_map(map, &ctx, tol)?;
    let residual = dilation_residual(map, &ctx.crep.rep_map, &ctx.triple.v, &f.w.op)?;
    if residual > tol.eps_eq {
        return Err(violation(format!("dilation residual {residual:e}")));
    }
    Ok(DilationCertificate {
        schema: schema(),
        psi,
        pi: ctx.triple.pi,
        rep: ctx.crep,
        v: ctx.triple.v,
        w: f.w.op,
        residual,
        tolerance: *tol,
    })
}

/// `Phi = S Gamma` with `Gamma` a phi-map for the CP map `phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCertificate {
    #[serde(default = "schema")]
    pub schema: String,
    pub phi: OperatorMap,
    #[serde(rename = "Gamma")]
    pub gamma: ModuleMap,
    #[serde(rename = "S", with = "serde_cmatrix")]
    pub s: CMatrix,
    pub residual: f64,
    pub cb_upper: f64,
    pub tolerance: Tolerance,
}

/// Residuals of a re-verified factorization certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResiduals {
    pub factorization: f64,
    pub phi_map: f64,
    pub cb_upper: f64,
}

impl FactorizationCertificate {
    pub fn verify(&self, map: &ModuleMap) -> Result<FactorizationResiduals, CbError> {
        let tol = &self.tolerance;
        let s = linalg::with_shape(self.s.clone(), map.dim_out(), self.gamma.dim_out())
            .map_err(|e| violation(format!("S: {e}")))?;
        if !cp::is_completely_positive(&self.phi, tol) {
            return Err(violation("phi is not completely positive"));
        }
        let phi_map = phi::phi_map_residual(&self.gamma, &self.phi)?;
        if phi_map > tol.eps_eq {
            return Err(violation(format!("Gamma is not a phi-map (residual {phi_map:e})")));
        }
        let factorization = linalg::rel_residual(&self.gamma.left_mul(&s)?.stacked(), &map.stacked());
        if factorization > tol.eps_eq {
            return Err(violation(format!("Phi != S Gamma (residual {factorization:e})")));
        }
        let expected = cb_upper(&s, &self.phi, tol)?;
        let cb = (self.cb_upper - expected).abs() / expected.max(1.0);
        if cb > tol.eps_eq {
            return Err(violation(format!(
                "recorded cb_upper {} differs from ||S|| ||phi||_cb^1/2 = {expected}",
                self.cb_upper
            )));
        }
        Ok(FactorizationResiduals {
            factorization,
            phi_map,
            cb_upper: cb,
        })
    }
}

fn cb_upper(s: &CMatrix, phi: &OperatorMap, tol: &Tolerance) -> Result<f64, CbError> {
    Ok(linalg::op_norm(s) * cp::cb_norm_cp(phi, tol)?.sqrt())
}

/// `Gamma(x) = Psi(x) V`, `phi(a) = V* pi(a) V` and `S = W*` from a dilation.
pub fn factor_from_dilation(
    map: &ModuleMap,
    dil: &DilationCertificate,
    tol: &Tolerance,
) -> Result<FactorizationCertificate, CbError> {
    let gamma = dil.rep.rep_map.right_mul(&dil.v)?;
    let phi = dil.pi.compress(&dil.v.adjoint(), &dil.v)?;
    let s = dil.w.adjoint();
    let phi_map = phi::phi_map_residual(&gamma, &phi)?;
    if phi_map > tol.eps_eq {
        return Err(violation(format!("Gamma is not a phi-map (residual {phi_map:e})")));
    }
    let residual = linalg::rel_residual(&gamma.left_mul(&s)?.stacked(), &map.stacked());
    if residual > tol.eps_eq {
        return Err(violation(format!("Phi != S Gamma (residual {residual:e})")));
    }
    Ok(FactorizationCertificate {
        schema: schema(),
        cb_upper: cb_upper(&s, &phi, tol)?,
        phi,
        gamma,
        s,
        residual,
        tolerance: *tol,
    })
}

pub fn factor_cb(map: &ModuleMap, tol: &Tolerance) -> Result<FactorizationCertificate, CbError> {
    factor_from_dilation(map, &dilate(map, tol)?, tol)
}

/// Outcome of sampling `||Phi_n(x)|| <= cb_upper ||x||`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbBoundReport {
    pub levels: usize,
    pub samples: usize,
    /// Largest observed `||Phi_n(x)|| / ||x||`.
    pub max_ratio: f64,
    pub cb_lower: f64,
    pub cb_upper: f64,
}

/// Realization of `x in M_n(E)` as an operator, so `||x|| = ||<x, x>||^1/2`.
pub fn module_array_norm(x: &[Vec<ModuleElement>]) -> f64 {
    let parts: Vec<CMatrix> = x
        .iter()
        .map(|row| {
            let cells: Vec<CMatrix> = row.iter().map(ModuleElement::to_matrix).collect();
            let rows = cells.first().map_or(0, CMatrix::nrows);
            linalg::hstack(&cells, rows)
        })
        .collect();
    let cols = parts.first().map_or(0, CMatrix::ncols);
    linalg::op_norm(&linalg::vstack(&parts, cols))
}

/// Validates the certificate, then checks the norm bound on random elements of
/// `M_n(E)` for `n <= levels` and that the sampled lower bound stays below it.
pub fn verify_cb_bound<R: Rng + ?Sized>(
    cert: &FactorizationCertificate,
    map: &ModuleMap,
    levels: usize,
    rng: &mut R,
) -> Result<CbBoundReport, CbError> {
    cert.verify(map)?;
    let tol = &cert.tolerance;
    let mut max_ratio: f64 = 0.0;
    let mut samples = 0;
    for n in 1..=levels {
        for _ in 0..maps::CB_SAMPLES_PER_LEVEL {
            let x = crate::random::module_array(rng, map.module(), n);
            let norm = module_array_norm(&x);
            let image = linalg::op_norm(&map.apply_amplified(&x)?);
            samples += 1;
            if norm > 0.0 {
                max_ratio = max_ratio.max(image / norm);
            }
            let bound = cert.cb_upper * norm;
            if image > bound + tol.eps_eq * bound.max(1.0) {
                return Err(violation(format!(
                    "level {n}: ||Phi_n(x)|| = {image} exceeds cb_upper ||x|| = {bound}"
                )));
            }
        }
    }
    let cb_lower = maps::cb_lower_bound(map, levels, rng);
    if cb_lower > cert.cb_upper + tol.eps_eq * cert.cb_upper.max(1.0) {
        return Err(violation(format!(
            "cb lower bound {cb_lower} exceeds cb_upper {}",
            cert.cb_upper
        )));
    }
    Ok(CbBoundReport {
        levels,
        samples,
        max_ratio,
        cb_lower,
        cb_upper: cert.cb_upper,
    })
}

/// `[[phi1, Phi], [Phi*, phi2]]` completely positive on the linking algebra,
/// with the witness `phi1 = W* sigma W`, `phi2 = V* pi V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPExtensionCertificate {
    #[serde(default = "schema")]
    pub schema: String,
    pub phi1: OperatorMap,
    pub phi2: OperatorMap,
    pub gamma: ModuleMap,
    pub sigma: OperatorMap,
    pub pi: OperatorMap,
    #[serde(rename = "V", with = "serde_cmatrix")]
    pub v: CMatrix,
    #[serde(rename = "W", with = "serde_cmatrix")]
    pub w: CMatrix,
    pub choi_min_eig: f64,
    pub corner_residual: f64,
    pub tolerance: Tolerance,
}

/// Residuals of a re-verified CP extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResiduals {
    pub choi_min_eig: f64,
    pub corner: f64,
    pub witness: f64,
}

impl CPExtensionCertificate {
    pub fn block_map(&self) -> Result<OperatorMap, CbError> {
        Ok(cp::block_map(&self.phi1, &self.gamma, &self.phi2)?)
    }

    pub fn verify(&self, map: &ModuleMap) -> Result<ExtensionResiduals, CbError> {
        let tol = &self.tolerance;
        let k = self.pi.dim_k();
        let v = linalg::with_shape(self.v.clone(), k, self.phi2.dim_h())?;
        let w = linalg::with_shape(self.w.clone(), self.sigma.dim_k(), self.phi1.dim_h())?;
        let gamma_residual = linalg::rel_residual(&self.gamma.stacked(), &map.stacked());
        if self.gamma.module() != map.module() || gamma_residual > tol.eps_eq {
            return Err(violation(format!("corner map differs from Phi (residual {gamma_residual:e})")));
        }
        self.sigma.check_star_homomorphism(tol)?;
        self.pi.check_star_homomorphism(tol)?;
        let witness = map_residual(&self.sigma.compress(&w.adjoint(), &w)?, &self.phi1)
            .max(map_residual(&self.pi.compress(&v.adjoint(), &v)?, &self.phi2));
        if witness > tol.eps_eq {
            return Err(violation(format!("phi1/phi2 differ from their witnesses (residual {witness:e})")));
        }
        let block = self.block_map()?;
        let choi_min_eig = cp::min_choi_eigenvalue(&block)?;
        let scale = cp::choi_blocks(&block)?
            .iter()
            .map(linalg::op_norm)
            .fold(1.0, f64::max);
        if choi_min_eig < -tol.eps_psd * scale {
            return Err(violation(format!("block map Choi eigenvalue {choi_min_eig:e}")));
        }
        let corner = corner_residual(&block, map)?;
        if corner > tol.eps_eq {
            return Err(violation(format!("corner residual {corner:e}")));
        }
        Ok(ExtensionResiduals {
            choi_min_eig,
            corner,
            witness,
        })
    }
}

/// Max relative residual of the `(1,2)` corner of `block([[0, x], [0, 0]])` against `Phi(x)`.
pub fn corner_residual(block: &OperatorMap, map: &ModuleMap) -> Result<f64, CbError> {
    let module = map.module();
    let (ds, dr) = (map.dim_out(), map.dim_h());
    let mut worst: f64 = 0.0;
    for b in 0..module.dim() {
        let x = ModuleElement::basis(module, b);
        let l = crate::algebra::embed_linking(
            AlgebraElement::zero(&module.compacts()),
            x,
            ModuleElement::zero(module),
            AlgebraElement::zero(module.algebra()),
        )?;
        let image = block.apply(&l.to_block_element())?;
        let corner = image.view((0, ds), (ds, dr)).into_owned();
        worst = worst.max(linalg::rel_residual(&corner, map.image(b)));
    }
    Ok(worst)
}

/// `sigma(theta_{x,y}) = Psi(x) Psi(y)*` on the matrix units of `K(E) = M_m(A)`:
/// the unit at array position `(I, J)` carrying `E_rs` in block `k` is
/// `theta_{x,y}` with `x = E_r1` in slot `I` and `y = E_s1` in slot `J`.
pub fn compacts_representation(rep: &ModuleMap) -> Result<OperatorMap, CbError> {
    let module = rep.module();
    let a = module.algebra();
    let m = module.rank();
    let k = rep.dim_out();
    let compacts = module.compacts();
    let images = (0..compacts.dim())
        .map(|idx| {
            let (big_i, big_j, inner) = a.split_amplified(m, idx);
            let (blk, r, s) = a.basis_entry(inner);
            let bx = big_i * a.dim() + a.basis_index(blk, r, 0);
            let by = big_j * a.dim() + a.basis_index(blk, s, 0);
            rep.image(bx) * rep.image(by).adjoint()
        })
        .collect();
    Ok(OperatorMap::new(compacts, k, k, images)?)
}

/// CP extension of `Phi` built from a dilation `Phi = W* Psi V`.
pub fn cp_extend(
    map: &ModuleMap,
    dil: &DilationCertificate,
    tol: &Tolerance,
) -> Result<CPExtensionCertificate, CbError> {
    if dil.rep.rep_map.module() != map.module() {
        return Err(crate::error::AlgebraError::ModuleMismatch.into());
    }
    let sigma = compacts_representation(&dil.rep.rep_map)?;
    sigma.check_star_homomorphism(tol)?;
    let phi1 = sigma.compress(&dil.w.adjoint(), &dil.w)?;
    let phi2 = dil.pi.compress(&dil.v.adjoint(), &dil.v)?;
    let block = cp::block_map(&phi1, map, &phi2)?;
    let choi_min_eig = cp::min_choi_eigenvalue(&block)?;
    let corner = corner_residual(&block, map)?;
    let cert = CPExtensionCertificate {
        schema: schema(),
        phi1,
        phi2,
        gamma: map.clone(),
        sigma,
        pi: dil.pi.clone(),
        v: dil.v.clone(),
        w: dil.w.clone(),
        choi_min_eig,
        corner_residual: corner,
        tolerance: *tol,
    };
    cert.verify(map)?;
    Ok(cert)
}

/// A linear map `psi: A -> B(H, K)` is the corner of a CP map on `M_2(A)`:
/// run the extension with `E = A^1`, where `K(E) = A` and `L(E) = M_2(A)`.
pub fn extend_algebra_map(psi: &OperatorMap, tol: &Tolerance) -> Result<CPExtensionCertificate, CbError> {
    let map = ModuleMap::from_operator_map(psi);
    let dil = dilate(&map, tol)?;
    cp_extend(&map, &dil, tol)
}

/// The linking-algebra element with only the module corner `x` set.
pub fn module_corner(x: &ModuleElement) -> LinkingElement {
    let mut l = LinkingElement::zero(x.module());
    l.x = x.clone();
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BlockAlgebra;
    use crate::random;
    use num_complex::Complex64;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn random_map(seed: u64, blocks: Vec<usize>, m: usize, dim_h: usize, dim_k: usize) -> ModuleMap {
        let mut rng = random::stream_rng(seed, 0);
        let e = HilbertModule::new(BlockAlgebra::new(blocks).unwrap(), m).unwrap();
        random::linear_module_map(&mut rng, &e, dim_h, dim_k)
    }

    #[test]
    fn trace_gram_is_identity_on_matrix_units() {
        let e = HilbertModule::new(BlockAlgebra::new(vec![2, 1]).unwrap(), 2).unwrap();
        assert_eq!(trace_gram(&e), linalg::identity(e.dim()));
    }

    #[test]
    fn dominating_cp_examples() {
        let e = HilbertModule::new(BlockAlgebra::new(vec![2, 1]).unwrap(), 2).unwrap();
        let zero = ModuleMap::zero(&e, 2, 3);
        assert_eq!(domination_constant(&zero), 0.0);
        assert!(dominating_cp(&zero).images().iter().all(|m| m.iter().all(|z| *z == linalg::ZERO)));

        // A = E = C, Phi(1) = z: c = |z|^2
        let c1 = HilbertModule::new(BlockAlgebra::scalars(), 1).unwrap();
        let z = Complex64::new(0.6, -0.8) * 1.5;
        let map = ModuleMap::new(c1, 1, 1, vec![CMatrix::from_element(1, 1, z)]).unwrap();
        assert!((domination_constant(&map) - z.norm_sqr()).abs() < 1e-12);
        assert!(phi::is_completely_semi_phi_map(&map, &dominating_cp(&map), &tol()));

        for seed in 0..10 {
            let map = random_map(seed, vec![2, 1], 2, 3, 2);
            let d = phi::defect_gram(&map, &dominating_cp(&map)).unwrap();
            assert!(linalg::min_eigenvalue(&d) >= -1e-9);
        }
    }

    #[test]
    fn dilation_examples() {
        let mut rng = random::stream_rng(20, 0);
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        let e = HilbertModule::new(a.clone(), 2).unwrap();
        let ctx = PhiContext::new(&random::cp_map(&mut rng, &a, 2, 2), &e, &tol()).unwrap();
        let d = dilate(&ctx.cphi.phi_map, &tol()).unwrap();
        assert!(d.residual < 1e-9);
        assert!(linalg::classify_isometry(&d.w, &tol()).is_contraction());
        d.verify(&ctx.cphi.phi_map).unwrap();

        let zero = ModuleMap::zero(&e, 2, 2);
        let d = dilate(&zero, &tol()).unwrap();
        assert_eq!(d.pi.dim_k(), 0);
        assert_eq!(d.residual, 0.0);

        let map = random_map(21, vec![2, 2], 2, 3, 3);
        let d = dilate(&map, &tol()).unwrap();
        assert!(d.residual < 1e-8);
        d.verify(&map).unwrap();
    }

    #[test]
    fn factorization_examples() {
        let mut rng = random::stream_rng(22, 0);
        let a = BlockAlgebra::new(vec![2, 1]).unwrap();
        let e = HilbertModule::new(a.clone(), 2).unwrap();
        let ctx = PhiContext::new(&random::cp_map(&mut rng, &a, 2, 2), &e, &tol()).unwrap();
        let phi_map = &ctx.cphi.phi_map;
        let cert = factor_cb(phi_map, &tol()).unwrap();
        assert!(linalg::op_norm(&cert.s) <= 1.0 + 1e-8);
        cert.verify(phi_map).unwrap();

        // doubling Phi doubles c^(1/2) and hence cb_upper
        let doubled = factor_cb(&phi_map.scale(Complex64::new(2.0, 0.0)), &tol()).unwrap();
        let ratio = doubled.cb_upper / cert.cb_upper;
        assert!((2.0 - 1e-8..=2.0 + 1e-9).contains(&ratio));

        let zero = factor_cb(&ModuleMap::zero(&e, 2, 2), &tol()).unwrap();
        assert_eq!(zero.s.ncols(), 0);
        assert_eq!(zero.residual, 0.0);
    }

    #[test]
    fn cb_bound_examples() {
        let map = random_map(23, vec![2, 1], 2, 2, 3);
        let cert = factor_cb(&map, &tol()).unwrap();
        let mut rng = random::stream_rng(23, 1);
        let report = verify_cb_bound(&cert, &map, 3, &mut rng).unwrap();
        assert!(report.cb_lower <= report.cb_upper);

        let mut broken = cert.clone();
        broken.s *= Complex64::new(0.5, 0.0);
        assert!(verify_cb_bound(&broken, &map, 3, &mut rng).is_err());

        // canonical phi-map of a unital CP map: S = I gives cb_upper = 1
        let a = BlockAlgebra::new(vec![2]).unwrap();
        let e = HilbertModule::new(a.clone(), 1).unwrap();
        let ctx = PhiContext::new(&OperatorMap::identity(&a), &e, &tol()).unwrap();
        let cert = FactorizationCertificate {
            schema: schema(),
            phi: ctx.phi.clone(),
            gamma: ctx.cphi.phi_map.clone(),
            s: linalg::identity(ctx.cphi.dim_hphi),
            residual: 0.0,
            cb_upper: 1.0,
            tolerance: tol(),
        };
        let report = verify_cb_bound(&cert, &ctx.cphi.phi_map, 3, &mut rng).unwrap();
        assert!(report.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn compacts_representation_matches_theta() {
        let map = random_map(24, vec![2, 1], 2, 2, 2);
        let d = dilate(&map, &tol()).unwrap();
        let sigma = compacts_representation(&d.rep.rep_map).unwrap();
        let e = map.module();
        let mut rng = random::stream_rng(24, 1);
        let x = random::module_element(&mut rng, e);
        let y = random::module_element(&mut rng, e);
        let lhs = sigma.apply(&x.theta(&y).unwrap()).unwrap();
        let rhs = d.rep.rep_map.apply(&x).unwrap() * d.rep.rep_map.apply(&y).unwrap().adjoint();
        assert!(linalg::rel_residual(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn cp_extension_examples() {
        let map = random_map(25, vec![2, 1], 2, 2, 3);
        let d = dilate(&map, &tol()).unwrap();
        let ext = cp_extend(&map, &d, &tol()).unwrap();
        assert!(ext.choi_min_eig >= -1e-9);
        assert!(ext.corner_residual <= 1e-9);
        let corner = ext
            .block_map()
            .unwrap()
            .apply(&module_corner(&ModuleElement::basis(map.module(), 3)).to_block_element())
            .unwrap();
        assert!(linalg::rel_residual(&corner.view((0, 3), (3, 2)).into_owned(), map.image(3)) < 1e-12);

        let zero = ModuleMap::zero(map.module(), 3, 2);
        let ext = cp_extend(&zero, &dilate(&zero, &tol()).unwrap(), &tol()).unwrap();
        assert!(ext.phi1.images().iter().all(|m| linalg::frobenius(m) == 0.0));
    }

    #[test]
    fn algebra_extension_of_transpose() {
        let m2 = BlockAlgebra::full(2);
        let transpose = OperatorMap::from_fn(&m2, 2, 2, |x| x.to_matrix().transpose()).unwrap();
        assert!(!cp::is_completely_positive(&transpose, &tol()));
        let ext = extend_algebra_map(&transpose, &tol()).unwrap();
        assert!(ext.choi_min_eig >= -1e-9);
        assert!(ext.corner_residual <= 1e-9);
        assert_eq!(ext.block_map().unwrap().domain(), &BlockAlgebra::full(4));

        let id = extend_algebra_map(&OperatorMap::identity(&m2), &tol()).unwrap();
        assert!(cp::is_completely_positive(&id.phi1, &tol()));
        assert!(cp::is_completely_positive(&id.phi2, &tol()));
        let zero = extend_algebra_map(&OperatorMap::zero(&m2, 2, 2), &tol()).unwrap();
        assert!(zero.phi2.images().iter().all(|m| linalg::frobenius(m) == 0.0));
    }

    #[test]
    fn certificates_roundtrip_through_json() {
        let map = random_map(26, vec![1, 1], 1, 2, 2);
        let d = dilate(&map, &tol()).unwrap();
        let f = factor_from_dilation(&map, &d, &tol()).unwrap();
        let x = cp_extend(&map, &d, &tol()).unwrap();
        let d2: DilationCertificate = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        let f2: FactorizationCertificate = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        let x2: CPExtensionCertificate = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        assert_eq!((&d2, &f2, &x2), (&d, &f, &x));
        assert!(serde_json::to_string(&f).unwrap().contains("\"schema\":\"cstar-mod/1\""));
        d2.verify(&map).unwrap();
        f2.verify(&map).unwrap();
        x2.verify(&map).unwrap();
    }
}
