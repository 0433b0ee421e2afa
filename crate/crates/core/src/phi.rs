//! Predicates on module maps `E -> B(H, K)` relative to a completely positive
//! map, the canonical phi-map and pi-representation, and the factorizations
//! relating arbitrary (semi-)phi-maps and representations to them.

use serde::{Deserialize, Serialize};

use crate::algebra::{HilbertModule, ModuleElement};
use crate::cp::{self, StinespringTriple};
use crate::error::{MapError, PhiError};
use crate::kernels::intertwiner;
use crate::linalg::{self, serde_cmatrix, CMatrix, IsometryClass, Tolerance};
use crate::maps::{ModuleMap, OperatorMap};

fn check_compatible(map: &ModuleMap, phi: &OperatorMap) -> Result<(), PhiError> {
    if phi.domain() != map.module().algebra() {
        return Err(crate::error::AlgebraError::AlgebraMismatch {
            left: map.module().algebra().blocks().to_vec(),
            right: phi.domain().blocks().to_vec(),
        }
        .into());
    }
    if !phi.is_square_valued() {
        return Err(MapError::NotSquareValued {
            rows: phi.dim_k(),
            cols: phi.dim_h(),
        }
        .into());
    }
    if phi.dim_h() != map.dim_h() {
        return Err(PhiError::Dimension {
            context: "input space of module map vs CP map",
            expected: phi.dim_h(),
            found: map.dim_h(),
        });
    }
    Ok(())
}

/// Gram of `phi` on `E (x) C^dim_h`: entry `((b,h),(b',k)) = <h, phi(<b, b'>) k>`.
pub fn phi_gram(phi: &OperatorMap, module: &HilbertModule) -> CMatrix {
    let d = phi.dim_h();
    let n = module.dim();
    let mut g = linalg::zeros(n * d, n * d);
    for b in 0..n {
        for b2 in 0..n {
            if let Some(p) = module.basis_inner(b, b2) {
                g.view_mut((b * d, b2 * d), (d, d)).copy_from(phi.image(p));
            }
        }
    }
    g
}

/// Relative residual of `Phi(x)* Phi(y) = phi(<x, y>)` over basis pairs.
pub fn phi_map_residual(map: &ModuleMap, phi: &OperatorMap) -> Result<f64, PhiError> {
    check_compatible(map, phi)?;
    Ok(linalg::rel_residual(&map.gram(), &phi_gram(phi, map.module())))
}

/// `[Phi(E) H] = K`.
pub fn is_nondegenerate(map: &ModuleMap, tol: &Tolerance) -> bool {
    linalg::numerical_rank(&map.stacked(), tol) == map.dim_out()
}

/// Basis pairs suffice: both sides are sesquilinear in `(x, y)`.
pub fn is_phi_map(map: &ModuleMap, phi: &OperatorMap, tol: &Tolerance) -> bool {
    phi_map_residual(map, phi).is_ok_and(|r| r <= tol.eps_eq)
}

pub fn is_representation(map: &ModuleMap, pi: &OperatorMap, tol: &Tolerance) -> bool {
    pi.is_star_homomorphism(tol) && is_phi_map(map, pi, tol)
}

/// `D[(b,h),(b',k)] = <h, (phi(<b, b'>) - Phi(b)* Phi(b')) k>`.
pub fn defect_gram(map: &ModuleMap, phi: &OperatorMap) -> Result<CMatrix, PhiError> {
    check_compatible(map, phi)?;
    Ok(phi_gram(phi, map.module()) - map.gram())
}

/// One PSD test on the defect Gram decides domination at every matrix level.
pub fn is_completely_semi_phi_map(map: &ModuleMap, phi: &OperatorMap, tol: &Tolerance) -> bool {
    defect_gram(map, phi).is_ok_and(|d| linalg::is_psd(&d, tol).unwrap_or(false))
}

/// `phi_n(<x, x>) - Phi_n(x)* Phi_n(x)` for `x in M_n(E)`.
pub fn amplified_defect(
    map: &ModuleMap,
    phi: &OperatorMap,
    x: &[Vec<ModuleElement>],
) -> Result<CMatrix, PhiError> {
    check_compatible(map, phi)?;
    let n = x.len();
    let d = map.dim_h();
    let lhs = map.apply_amplified(x)?;
    let mut rhs = linalg::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            let mut inner = crate::algebra::AlgebraElement::zero(phi.domain());
            for row in x {
                inner = &inner + &row[i].inner_product(&row[j])?;
            }
            rhs.view_mut((i * d, j * d), (d, d)).copy_from(&phi.apply(&inner)?);
        }
    }
    Ok(rhs - lhs.adjoint() * lhs)
}

/// A level-`n` element witnessing that `Phi` is not dominated by `phi`.
#[derive(Debug, Clone)]
pub struct SemiPhiViolation {
    pub n: usize,
    pub x: Vec<Vec<ModuleElement>>,
    /// Unit vector in `(C^dim_h)^n` with `<xi, defect xi> = value < 0`.
    pub xi: CMatrix,
    pub value: f64,
}

/// Pulls the lowest eigenvector of the defect Gram back to `M_n(E)` with
/// `n = dim_h`: the first row of `x` is `y_j = sum_b v_(b,j) b` and `xi = (e_j)_j`.
pub fn semi_phi_violation(
    map: &ModuleMap,
    phi: &OperatorMap,
    tol: &Tolerance,
) -> Result<Option<SemiPhiViolation>, PhiError> {
    let defect = defect_gram(map, phi)?;
    if linalg::is_psd(&defect, tol)? {
        return Ok(None);
    }
    let (_, vectors) = linalg::hermitian_eigen(&defect);
    let v = vectors.column(0);
    let module = map.module();
    let d = map.dim_h();
    let mut x = vec![vec![ModuleElement::zero(module); d]; d];
    for (j, slot) in x[0].iter_mut().enumerate() {
        let coords: Vec<_> = (0..module.dim()).map(|b| v[b * d + j]).collect();
        *slot = ModuleElement::from_vector(module, &coords)?;
    }
    let mut xi = linalg::zeros(d * d, 1);
    for j in 0..d {
        xi[(j * d + j, 0)] = linalg::ONE;
    }
    let xi = xi / num_complex::Complex64::new((d as f64).sqrt(), 0.0);
    let value = (xi.adjoint() * amplified_defect(map, phi, &x)? * &xi)[(0, 0)].re;
    Ok(Some(SemiPhiViolation { n: d, x, xi, value }))
}

/// The canonical phi-map `Phi_phi: E -> B(H, H_phi)` of a CP map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPhiData {
    pub phi_map: ModuleMap,
    #[serde(rename = "dim_Hphi")]
    pub dim_hphi: usize,
    /// Quotient map `E (x) C^dim_h -> H_phi`; its column blocks are `Phi_phi(b)`.
    #[serde(with = "serde_cmatrix")]
    pub gram_factor: CMatrix,
}

/// GNS on `E (x) C^dim_h` with the form `<x (x) h, y (x) k> = <h, phi(<x, y>) k>`.
pub fn construct_canonical_phi(
    phi: &OperatorMap,
    module: &HilbertModule,
    tol: &Tolerance,
) -> Result<CanonicalPhiData, PhiError> {
    if !cp::is_completely_positive(phi, tol) {
        return Err(MapError::NotCompletelyPositive {
            min_eigenvalue: cp::min_choi_eigenvalue(phi)?,
        }
        .into());
    }
    let zero = ModuleMap::zero(module, 0, phi.dim_h());
    check_compatible(&zero, phi)?;
    let d = phi.dim_h();
    let factor = linalg::psd_factor(&phi_gram(phi, module), tol)?.factor;
    let r = factor.nrows();
    let images = (0..module.dim()).map(|b| linalg::columns(&factor, b * d, d)).collect();
    let phi_map = ModuleMap::new(module.clone(), r, d, images)?;
    let residual = phi_map_residual(&phi_map, phi)?;
    if residual > tol.eps_eq {
        return Err(PhiError::Contract {
            what: "canonical phi-map",
            detail: format!("phi-map residual {residual:e}"),
        });
    }
    if !is_nondegenerate(&phi_map, tol) {
        return Err(PhiError::Contract {
            what: "canonical phi-map",
            detail: "degenerate range".into(),
        });
    }
    Ok(CanonicalPhiData {
        phi_map,
        dim_hphi: r,
        gram_factor: factor,
    })
}

/// The canonical pi-representation `Psi_pi: E -> B(K, K_pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRepData {
    pub rep_map: ModuleMap,
    #[serde(rename = "dim_Kpi")]
    pub dim_kpi: usize,
}

/// Same GNS construction with a representation in place of `phi`. The Gram
/// `<h, pi(<x, y>) k>` has the explicit root `x -> [pi(x_1); ...; pi(x_m)]`,
/// so the quotient is computed from that root instead of the Gram itself.
pub fn construct_canonical_rep(
    pi: &OperatorMap,
    module: &HilbertModule,
    tol: &Tolerance,
) -> Result<CanonicalRepData, PhiError> {
    pi.check_star_homomorphism(tol)?;
    let zero = ModuleMap::zero(module, 0, pi.dim_h());
    check_compatible(&zero, pi)?;
    let d = pi.dim_h();
    let m = module.rank();
    let row = linalg::hstack(pi.images(), d);
    let root = linalg::kron(&linalg::identity(m), &row);
    let factor = linalg::gram_factor_from_root(&root, tol).factor;
    let r = factor.nrows();
    let images = (0..module.dim()).map(|b| linalg::columns(&factor, b * d, d)).collect();
    let rep_map = ModuleMap::new(module.clone(), r, d, images)?;

    let residual = phi_map_residual(&rep_map, pi)?;
    let action = module_action_residual(&rep_map, pi);
    if residual > tol.eps_eq || action > tol.eps_eq {
        return Err(PhiError::Contract {
            what: "canonical pi-representation",
            detail: format!("pi-map residual {residual:e}, module action residual {action:e}"),
        });
    }
    Ok(CanonicalRepData { rep_map, dim_kpi: r })
}

/// `max ||Psi(b a) - Psi(b) pi(a)||` over basis `b` of `E` and basis `a` of `A`,
/// relative to `max(1, max ||Psi(b)||)`.
pub fn module_action_residual(map: &ModuleMap, pi: &OperatorMap) -> f64 {
    let module = map.module();
    let a = module.algebra();
    let scale = map.images().iter().map(linalg::frobenius).fold(1.0, f64::max);
    let mut worst: f64 = 0.0;
    for b in 0..module.dim() {
        let (slot, p) = module.basis_entry(b);
        for q in 0..a.dim() {
            let rhs = map.image(b) * pi.image(q);
            let lhs = match a.basis_product(p, q) {
                Some(pq) => map.image(slot * a.dim() + pq).clone(),
                None => linalg::zeros(rhs.nrows(), rhs.ncols()),
            };
            worst = worst.max(linalg::frobenius(&(lhs - rhs)) / scale);
        }
    }
    worst
}

/// A connecting operator with its isometry type and fit residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intertwiner {
    #[serde(with = "serde_cmatrix")]
    pub op: CMatrix,
    pub class: IsometryClass,
    pub residual: f64,
}

impl Intertwiner {
    fn fit(from: &CMatrix, to: &CMatrix, tol: &Tolerance) -> Result<Self, PhiError> {
        let op = intertwiner(from, to, tol)?;
        let residual = linalg::rel_residual(&(&op * from), to);
        let class = linalg::classify_isometry(&op, tol);
        Ok(Self { op, class, residual })
    }
}

fn contract(what: &'static str, detail: String) -> PhiError {
    PhiError::Contract { what, detail }
}

/// `W_phi: H_phi -> K_pi` with `W_phi Phi_phi(x) h = Psi_pi(x) V h`.
pub fn connecting_unitary(
    cphi: &CanonicalPhiData,
    crep: &CanonicalRepData,
    triple: &StinespringTriple,
    tol: &Tolerance,
) -> Result<Intertwiner, PhiError> {
    let rank = linalg::numerical_rank(&triple.spanning_vectors(), tol);
    if rank != triple.dim_k() {
        return Err(PhiError::NonMinimalDilation {
            rank,
            dim_k: triple.dim_k(),
        });
    }
    let from = cphi.phi_map.stacked();
    let to = crep.rep_map.right_mul(&triple.v)?.stacked();
    let mut w = Intertwiner::fit(&from, &to, tol)?;
    // Phi_phi(.) = W_phi* Psi_pi(.) V
    w.residual = w
        .residual
        .max(linalg::rel_residual(&(w.op.adjoint() * &to), &from));
    if w.class != IsometryClass::Unitary || w.residual > tol.eps_eq {
        return Err(contract(
            "connecting unitary",
            format!("class {:?}, residual {:e}", w.class, w.residual),
        ));
    }
    Ok(w)
}

/// Everything derived from a CP map `phi` on a module `E`: its minimal
/// Stinespring dilation, `Phi_phi`, `Psi_pi` and `W_phi`.
#[derive(Debug, Clone)]
pub struct PhiContext {
    pub phi: OperatorMap,
    pub triple: StinespringTriple,
    pub cphi: CanonicalPhiData,
    pub crep: CanonicalRepData,
    pub w_phi: Intertwiner,
}

impl PhiContext {
    pub fn new(phi: &OperatorMap, module: &HilbertModule, tol: &Tolerance) -> Result<Self, PhiError> {
        let triple = cp::minimal_stinespring(phi, tol)?;
        let cphi = construct_canonical_phi(phi, module, tol)?;
        let crep = construct_canonical_rep(&triple.pi, module, tol)?;
        let w_phi = connecting_unitary(&cphi, &crep, &triple, tol)?;
        Ok(Self {
            phi: phi.clone(),
            triple,
            cphi,
            crep,
            w_phi,
        })
    }

    pub fn module(&self) -> &HilbertModule {
        self.cphi.phi_map.module()
    }

    /// `[Psi_pi(b) V]_b`.
    fn rep_times_v(&self) -> Result<CMatrix, PhiError> {
        Ok(self.crep.rep_map.right_mul(&self.triple.v)?.stacked())
    }
}

/// `S` with `S Phi_phi = Phi` and `W = W_phi S*` with `Phi = W* Psi_pi V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiFactorization {
    pub s: Intertwiner,
    pub w: Intertwiner,
    pub nondegenerate: bool,
}

fn factor_through(map: &ModuleMap, ctx: &PhiContext, tol: &Tolerance) -> Result<PhiFactorization, PhiError> {
    if map.module() != ctx.module() {
        return Err(crate::error::AlgebraError::ModuleMismatch.into());
    }
    let target = map.stacked();
    let s = Intertwiner::fit(&ctx.cphi.phi_map.stacked(), &target, tol)?;
    let w_op = &ctx.w_phi.op * s.op.adjoint();
    let residual = linalg::rel_residual(&(w_op.adjoint() * ctx.rep_times_v()?), &target);
    let w = Intertwiner {
        class: linalg::classify_isometry(&w_op, tol),
        op: w_op,
        residual,
    };
    Ok(PhiFactorization {
        s,
        w,
        nondegenerate: is_nondegenerate(map, tol),
    })
}

/// Factorization of a phi-map through the canonical one.
pub fn factor_phi_map(map: &ModuleMap, ctx: &PhiContext, tol: &Tolerance) -> Result<PhiFactorization, PhiError> {
    let residual = phi_map_residual(map, &ctx.phi)?;
    if residual > tol.eps_eq {
        return Err(PhiError::NotPhiMap { residual });
    }
    let f = factor_through(map, ctx, tol)?;
    let s_ok = if f.nondegenerate {
        f.s.class == IsometryClass::Unitary
    } else {
        f.s.class == IsometryClass::Isometry
    };
    let w_ok = if f.nondegenerate {
        f.w.class == IsometryClass::Unitary
    } else {
        f.w.class == IsometryClass::Coisometry
    };
    if !s_ok || !w_ok || f.s.residual > tol.eps_eq || f.w.residual > tol.eps_eq {
        return Err(contract(
            "phi-map factorization",
            format!(
                "S {:?} (residual {:e}), W {:?} (residual {:e}), non-degenerate {}",
                f.s.class, f.s.residual, f.w.class, f.w.residual, f.nondegenerate
            ),
        ));
    }
    Ok(f)
}

/// Factorization of a completely semi-phi-map: `S` is a contraction, onto
/// exactly when `Phi` is non-degenerate.
pub fn factor_semi_phi_map(
    map: &ModuleMap,
    ctx: &PhiContext,
    tol: &Tolerance,
) -> Result<PhiFactorization, PhiError> {
    let defect = defect_gram(map, &ctx.phi)?;
    if !linalg::is_psd(&defect, tol)? {
        return Err(PhiError::NotSemiPhiMap {
            min_eigenvalue: linalg::min_eigenvalue(&defect),
        });
    }
    let f = factor_through(map, ctx, tol)?;
    let onto = linalg::numerical_rank(&f.s.op, tol) == map.dim_out();
    if !f.s.class.is_contraction()
        || !f.w.class.is_contraction()
        || onto != f.nondegenerate
        || f.s.residual > tol.eps_eq
        || f.w.residual > tol.eps_eq
    {
        return Err(contract(
            "semi-phi factorization",
            format!(
                "S {:?} (residual {:e}, onto {onto}), W {:?} (residual {:e}), non-degenerate {}",
                f.s.class, f.s.residual, f.w.class, f.w.residual, f.nondegenerate
            ),
        ));
    }
    Ok(f)
}

/// `S_Psi` with `Psi = S_Psi Psi_pi`.
pub fn factor_representation(
    map: &ModuleMap,
    pi: &OperatorMap,
    crep: &CanonicalRepData,
    tol: &Tolerance,
) -> Result<Intertwiner, PhiError> {
    pi.check_star_homomorphism(tol)?;
    let residual = phi_map_residual(map, pi)?;
    if residual > tol.eps_eq {
        return Err(PhiError::NotPhiMap { residual });
    }
    let s = Intertwiner::fit(&crep.rep_map.stacked(), &map.stacked(), tol)?;
    let expected = if is_nondegenerate(map, tol) {
        IsometryClass::Unitary
    } else {
        IsometryClass::Isometry
    };
    if s.class != expected || s.residual > tol.eps_eq {
        return Err(contract(
            "representation factorization",
            format!("S {:?} (expected {expected:?}), residual {:e}", s.class, s.residual),
        ));
    }
    Ok(s)
}

/// `W = S_Psi W_phi S_Phi*` with `Phi = W* Psi V`, for a phi-map `Phi` and a
/// pi-representation `Psi` where `(pi, V)` is the minimal dilation of `phi`.
pub fn relate_phi_and_rep(
    phi_map: &ModuleMap,
    rep: &ModuleMap,
    ctx: &PhiContext,
    tol: &Tolerance,
) -> Result<Intertwiner, PhiError> {
    let s_phi = factor_phi_map(phi_map, ctx, tol)?;
    let s_psi = factor_representation(rep, &ctx.triple.pi, &ctx.crep, tol)?;
    let op = &s_psi.op * &ctx.w_phi.op * s_phi.s.op.adjoint();
    let rhs = rep.right_mul(&ctx.triple.v)?.stacked();
    let residual = linalg::rel_residual(&(op.adjoint() * rhs), &phi_map.stacked());
    let class = linalg::classify_isometry(&op, tol);
    let both = s_phi.nondegenerate && is_nondegenerate(rep, tol);
    if !class.is_partial_isometry() || (both && class != IsometryClass::Unitary) || residual > tol.eps_eq {
        return Err(contract(
            "phi-map / representation relation",
            format!("W {class:?}, residual {residual:e}"),
        ));
    }
    Ok(Intertwiner { op, class, residual })
}
