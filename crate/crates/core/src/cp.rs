//! Completely positive maps on block algebras: Choi certificates, cb-norms,
//! the minimal Stinespring dilation and the corner decomposition of
//! representations of the linking algebra.

use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, HilbertModule, LinkingElement};
use crate::error::MapError;
use crate::linalg::{self, serde_cmatrix, CMatrix, Tolerance};
use crate::maps::{ModuleMap, OperatorMap};

/// One Choi matrix per block: `C_k = sum_ij E_ij (x) phi(E_ij^(k))`.
pub fn choi_blocks(phi: &OperatorMap) -> Result<Vec<CMatrix>, MapError> {
    if !phi.is_square_valued() {
        return Err(MapError::NotSquareValued {
            rows: phi.dim_k(),
            cols: phi.dim_h(),
        });
    }
    let d = phi.domain();
    Ok(d.blocks()
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut c = linalg::zeros(n * phi.dim_h(), n * phi.dim_h());
            for i in 0..n {
                for j in 0..n {
                    c += linalg::kron(&linalg::unit(n, n, i, j), phi.image(d.basis_index(k, i, j)));
                }
            }
            c
        })
        .collect())
}

/// Smallest eigenvalue over all Choi blocks.
pub fn min_choi_eigenvalue(phi: &OperatorMap) -> Result<f64, MapError> {
    Ok(choi_blocks(phi)?
        .iter()
        .map(linalg::min_eigenvalue)
        .fold(f64::INFINITY, f64::min))
}

/// Complete positivity, decided blockwise on the Choi matrices.
pub fn is_completely_positive(phi: &OperatorMap, tol: &Tolerance) -> bool {
    match choi_blocks(phi) {
        Ok(blocks) => blocks.iter().all(|c| linalg::is_psd(c, tol).unwrap_or(false)),
        Err(_) => false,
    }
}

fn require_cp(phi: &OperatorMap, tol: &Tolerance) -> Result<(), MapError> {
    if is_completely_positive(phi, tol) {
        Ok(())
    } else if !phi.is_square_valued() {
        Err(MapError::NotSquareValued {
            rows: phi.dim_k(),
            cols: phi.dim_h(),
        })
    } else {
        Err(MapError::NotCompletelyPositive {
            min_eigenvalue: min_choi_eigenvalue(phi)?,
        })
    }
}

/// `||phi||_cb = ||phi(1)||` for completely positive `phi`.
pub fn cb_norm_cp(phi: &OperatorMap, tol: &Tolerance) -> Result<f64, MapError> {
    require_cp(phi, tol)?;
    Ok(linalg::op_norm(&phi.unit_image()))
}

/// A Stinespring dilation `phi(a) = V* pi(a) V`.
#[derive(Debug, Clone, PartialEq)]
pub struct StinespringTriple {
    pub pi: OperatorMap,
    /// `dim_k x dim_h`.
    pub v: CMatrix,
}

/// Contract residuals of a Stinespring triple against its map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StinespringResiduals {
    /// `max_a ||phi(a) - V* pi(a) V|| / (1 + ||phi(1)||)` over the basis.
    pub contract: f64,
    /// `||V* V - phi(1)|| / (1 + ||phi(1)||)`.
    pub unit: f64,
    /// Numerical rank of `{pi(a) V h}`.
    pub span_rank: usize,
    pub homomorphism: bool,
}

impl StinespringTriple {
    pub fn dim_k(&self) -> usize {
        self.v.nrows()
    }

    /// `[pi(b_1) V ... pi(b_D) V]`.
    pub fn spanning_vectors(&self) -> CMatrix {
        let parts: Vec<_> = self.pi.images().iter().map(|p| p * &self.v).collect();
        linalg::hstack(&parts, self.dim_k())
    }

    pub fn residuals(&self, phi: &OperatorMap, tol: &Tolerance) -> Result<StinespringResiduals, MapError> {
        if self.pi.domain() != phi.domain()
            || self.v.ncols() != phi.dim_h()
            || self.pi.dim_k() != self.v.nrows()
        {
            return Err(MapError::Dimension {
                context: "Stinespring triple vs map",
                expected: phi.dim_h(),
                found: self.v.ncols(),
            });
        }
        let scale = 1.0 + linalg::op_norm(&phi.unit_image());
        let contract = phi
            .images()
            .iter()
            .zip(self.pi.images())
            .map(|(f, p)| linalg::op_norm(&(f - self.v.adjoint() * p * &self.v)))
            .fold(0.0, f64::max)
            / scale;
        let unit = linalg::op_norm(&(self.v.adjoint() * &self.v - phi.unit_image())) / scale;
        Ok(StinespringResiduals {
            contract,
            unit,
            span_rank: linalg::numerical_rank(&self.spanning_vectors(), tol),
            homomorphism: self.pi.is_star_homomorphism(tol),
        })
    }

    /// Contract, homomorphism and minimality checks.
    pub fn verify(&self, phi: &OperatorMap, tol: &Tolerance) -> Result<StinespringResiduals, MapError> {
        let r = self.residuals(phi, tol)?;
        if !r.homomorphism {
            return Err(MapError::NotRepresentation("Stinespring pi".into()));
        }
        if r.contract > tol.eps_eq || r.unit > tol.eps_eq {
            return Err(MapError::Breakdown(format!(
                "Stinespring contract residual {:e} / unit residual {:e}",
                r.contract, r.unit
            )));
        }
        if r.span_rank != self.dim_k() {
            return Err(MapError::Breakdown(format!(
                "dilation not minimal: span rank {} < dim_K {}",
                r.span_rank,
                self.dim_k()
            )));
        }
        Ok(r)
    }
}

/// Minimal Stinespring dilation by the GNS construction on `A (x) C^dim_h`.
///
/// The Gram `G[(a,h),(b,k)] = <h, phi(a* b) k>` is factored as `F* F`; the
/// columns of `F` are the classes of `a (x) h` in `K = C^rank`, `pi(a)` is left
/// multiplication pushed through the quotient, and `V h` is the class of `1 (x) h`.
pub fn minimal_stinespring(phi: &OperatorMap, tol: &Tolerance) -> Result<StinespringTriple, MapError> {
    require_cp(phi, tol)?;
    let d = phi.domain();
    let dh = phi.dim_h();
    let n = d.dim() * dh;
    let mut gram = linalg::zeros(n, n);
    for p in 0..d.dim() {
        let p_adj = d.basis_adjoint(p);
        for q in 0..d.dim() {
            if let Some(r) = d.basis_product(p_adj, q) {
                gram.view_mut((p * dh, q * dh), (dh, dh)).copy_from(phi.image(r));
            }
        }
    }
    let factor = linalg::psd_factor(&gram, tol)
        .map_err(|e| MapError::Breakdown(format!("GNS Gram: {e}")))?
        .factor;
    let rank = factor.nrows();
    // factor has full row rank, so factor * pinv = I_rank
    let pinv = linalg::lsq_solve(&factor, &linalg::identity(rank), tol)?;

    let pi_images = (0..d.dim())
        .map(|c| {
            // (F L_c) column (q, t) is F column (c q, t)
            let mut fl = linalg::zeros(rank, n);
            for q in 0..d.dim() {
                if let Some(r) = d.basis_product(c, q) {
                    fl.view_mut((0, q * dh), (rank, dh))
                        .copy_from(&factor.view((0, r * dh), (rank, dh)));
                }
            }
            fl * &pinv
        })
        .collect();
    let pi = OperatorMap::new(d.clone(), rank, rank, pi_images)?;
    let mut v = linalg::zeros(rank, dh);
    for u in d.unit_indices() {
        v += factor.view((0, u * dh), (rank, dh));
    }
    Ok(StinespringTriple { pi, v })
}

/// Serializable Stinespring certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StinespringCertificate {
    pub pi_images: OperatorMap,
    #[serde(rename = "V", with = "serde_cmatrix")]
    pub v: CMatrix,
    #[serde(rename = "dim_K")]
    pub dim_k: usize,
    pub residuals: StinespringResiduals,
    pub tolerance: Tolerance,
}

impl StinespringCertificate {
    pub fn new(phi: &OperatorMap, triple: &StinespringTriple, tol: &Tolerance) -> Result<Self, MapError> {
        Ok(Self {
            residuals: triple.residuals(phi, tol)?,
            pi_images: triple.pi.clone(),
            v: triple.v.clone(),
            dim_k: triple.dim_k(),
            tolerance: *tol,
        })
    }

    /// The triple, with `V` reshaped to `dim_K x dim_h` (empty JSON arrays lose their shape).
    pub fn triple(&self, dim_h: usize) -> Result<StinespringTriple, MapError> {
        Ok(StinespringTriple {
            pi: self.pi_images.clone(),
            v: linalg::with_shape(self.v.clone(), self.dim_k, dim_h)?,
        })
    }

    pub fn verify(&self, phi: &OperatorMap) -> Result<StinespringResiduals, MapError> {
        self.triple(phi.dim_h())?.verify(phi, &self.tolerance)
    }
}

/// Splitting of a representation of `L(E)` along its two corner projections.
#[derive(Debug, Clone)]
pub struct CornerDecomposition {
    pub module: HilbertModule,
    /// `pi_L(diag(0, 1_A))`.
    pub p1: CMatrix,
    /// `pi_L(diag(1_K(E), 0))`.
    pub p2: CMatrix,
    /// Orthonormal bases of the ranges of `p1` and `p2`.
    pub q1: CMatrix,
    pub q2: CMatrix,
    pub rho: OperatorMap,
    pub sigma: OperatorMap,
    pub gamma0: ModuleMap,
    /// Dimension of the complement of `p1 + p2`, carrying the zero representation.
    pub null_dim: usize,
    /// Maximum relative reassembly residual over the basis of `L(E)`.
    pub residual: f64,
}

impl CornerDecomposition {
    /// `[[sigma(T), Gamma0(x)], [Gamma0(y)*, rho(a)]]` mapped back to the input space.
    pub fn reassemble(&self, l: &LinkingElement) -> Result<CMatrix, MapError> {
        let s = self.q2.clone() * self.sigma.apply(&l.t)? * self.q2.adjoint();
        let x = self.q2.clone() * self.gamma0.apply(&l.x)? * self.q1.adjoint();
        let y = self.q1.clone() * self.gamma0.apply(&l.y)?.adjoint() * self.q2.adjoint();
        let a = self.q1.clone() * self.rho.apply(&l.a)? * self.q1.adjoint();
        Ok(s + x + y + a)
    }
}

/// Decomposes a representation `pi_L` of the linking algebra into
/// `[[sigma, Gamma0], [Gamma0*, rho]]` on `range(P2) (+) range(P1)`, with the
/// complement of `P1 + P2` carrying the zero representation.
pub fn corner_decompose(
    pi_l: &OperatorMap,
    module: &HilbertModule,
    tol: &Tolerance,
) -> Result<CornerDecomposition, MapError> {
    if pi_l.domain() != &module.linking_algebra() {
        return Err(MapError::Dimension {
            context: "linking algebra dimension",
            expected: module.linking_algebra().dim(),
            found: pi_l.domain().dim(),
        });
    }
    pi_l.check_star_homomorphism(tol)?;
    let eval = |l: &LinkingElement| pi_l.apply(&l.to_block_element());

    let mut upper = LinkingElement::zero(module);
    upper.t = AlgebraElement::one(&module.compacts());
    let mut lower = LinkingElement::zero(module);
    lower.a = AlgebraElement::one(module.algebra());
    let p2 = eval(&upper)?;
    let p1 = eval(&lower)?;
    let q1 = linalg::range_basis(&p1, tol);
    let q2 = linalg::range_basis(&p2, tol);
    let (r1, r2) = (q1.ncols(), q2.ncols());

    let sigma = OperatorMap::from_fn(&module.compacts(), r2, r2, |t| {
        let mut l = LinkingElement::zero(module);
        l.t = t.clone();
        q2.adjoint() * eval(&l).expect("domain checked") * &q2
    })?;
    let rho = OperatorMap::from_fn(module.algebra(), r1, r1, |a| {
        let mut l = LinkingElement::zero(module);
        l.a = a.clone();
        q1.adjoint() * eval(&l).expect("domain checked") * &q1
    })?;
    let gamma0 = ModuleMap::from_fn(module, r2, r1, |x| {
        let mut l = LinkingElement::zero(module);
        l.x = x.clone();
        q2.adjoint() * eval(&l).expect("domain checked") * &q1
    })?;

    let mut decomposition = CornerDecomposition {
        module: module.clone(),
        null_dim: pi_l.dim_k() - r1 - r2,
        p1,
        p2,
        q1,
        q2,
        rho,
        sigma,
        gamma0,
        residual: 0.0,
    };
    let linking = module.linking_algebra();
    let mut residual: f64 = 0.0;
    for idx in 0..linking.dim() {
        let l = LinkingElement::from_block_element(module, &AlgebraElement::basis(&linking, idx))?;
        residual = residual.max(linalg::rel_residual(&decomposition.reassemble(&l)?, pi_l.image(idx)));
    }
    decomposition.residual = residual;
    if linalg::frobenius(&(&decomposition.p1 * &decomposition.p2)) > tol.eps_eq
        || residual > tol.eps_eq
    {
        return Err(MapError::Breakdown(format!(
            "corner reassembly residual {residual:e}"
        )));
    }
    Ok(decomposition)
}

/// `[[T, x], [y*, a]] -> [[s(T), g(x)], [g(y)*, r(a)]]` as an operator map on
/// `L(E)`, with `s`, `r` square-valued and `g: E -> B(H_r, H_s)`.
pub fn block_map(sigma: &OperatorMap, gamma: &ModuleMap, rho: &OperatorMap) -> Result<OperatorMap, MapError> {
    let module = gamma.module();
    let (ds, dr) = (sigma.dim_k(), rho.dim_k());
    if sigma.domain() != &module.compacts()
        || rho.domain() != module.algebra()
        || gamma.dim_out() != ds
        || gamma.dim_h() != dr
        || !sigma.is_square_valued()
        || !rho.is_square_valued()
    {
        return Err(MapError::Dimension {
            context: "block map corners",
            expected: ds + dr,
            found: gamma.dim_out() + gamma.dim_h(),
        });
    }
    let linking = module.linking_algebra();
    OperatorMap::from_fn(&linking, ds + dr, ds + dr, |e| {
        let l = LinkingElement::from_block_element(module, e).expect("linking basis");
        let mut out = linalg::zeros(ds + dr, ds + dr);
        out.view_mut((0, 0), (ds, ds)).copy_from(&sigma.apply(&l.t).expect("compacts"));
        out.view_mut((0, ds), (ds, dr)).copy_from(&gamma.apply(&l.x).expect("module"));
        out.view_mut((ds, 0), (dr, ds))
            .copy_from(&gamma.apply(&l.y).expect("module").adjoint());
        out.view_mut((ds, ds), (dr, dr)).copy_from(&rho.apply(&l.a).expect("algebra"));
        out
    })
}
