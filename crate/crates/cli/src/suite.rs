//! `run suite`: every invariant of the toolkit on seeded random instances.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use cstar_core::cb;
use cstar_core::cp::{self, StinespringCertificate};
use cstar_core::kernels::{self, KolmogorovPair};
use cstar_core::linalg::{self, CMatrix};
use cstar_core::phi;
use cstar_core::{maps, random, IsometryClass, LinkingElement, ModuleMap, OperatorMap};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::document::Generator;
use crate::report::{ensure, Failure, Report, Trial, TrialResult};

type Check = fn(&mut Generator, &mut Trial) -> Result<(), Failure>;

pub const CHECKS: [(&str, Check); 11] = [
    ("psd-factor", psd_factor),
    ("stinespring", stinespring),
    ("cb-lower-bound", cb_lower_bound),
    ("corner-decomposition", corner_decomposition),
    ("kolmogorov", kolmogorov),
    ("canonical-phi", canonical_phi),
    ("phi-uniqueness", phi_uniqueness),
    ("semi-phi-oracle", semi_phi_oracle),
    ("factor-cb", factor_cb),
    ("extend-algebra-map", extend_algebra_map),
    ("falsification", falsification),
];

pub fn run_suite(config: &RunConfig) -> Report {
    let jobs: Vec<(usize, usize)> = (0..CHECKS.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(c, trial)| run_trial(config, c, trial))
        .collect();
    Report::new("suite", config, results)
}

fn run_trial(config: &RunConfig, check: usize, trial: usize) -> TrialResult {
    let (name, f) = CHECKS[check];
    let stream = 1_000 + (check as u64) * 1_000_000 + trial as u64;
    let mut g = Generator::new(config, stream);
    let mut t = Trial::default();
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut g, &mut t)))
        .unwrap_or_else(|_| Err(Failure::Breakdown("panic during trial".into())));
    t.finish(format!("{name}-{trial:04}"), outcome, start.elapsed().as_secs_f64())
}

fn eps(g: &Generator) -> f64 {
    g.config.tol.eps_eq
}

fn psd_factor(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let n = g.rng.random_range(1..=6);
    let r = g.rng.random_range(1..=6);
    let root = random::gaussian_matrix(&mut g.rng, r, n);
    t.instance(&serde_json::json!({ "root": linalg::serde_cmatrix::to_rows(&root) }));
    let gram = root.adjoint() * &root;
    let f = linalg::psd_factor(&gram, &g.config.tol)?;
    ensure(f.rank == r.min(n), format!("rank {} != {}", f.rank, r.min(n)))?;
    t.bound("reconstruction", linalg::rel_residual(&(f.factor.adjoint() * &f.factor), &gram), 1e-10)
}

fn choi_rank_dimension(phi: &OperatorMap, tol: &linalg::Tolerance) -> Result<usize, Failure> {
    Ok(cp::choi_blocks(phi)?
        .iter()
        .zip(phi.domain().blocks())
        .map(|(c, n)| n * linalg::numerical_rank(c, tol))
        .sum())
}

fn stinespring(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let a = g.algebra();
    let phi = g.cp_map(&a);
    t.instance(&phi);
    let tol = g.config.tol;
    let triple = cp::minimal_stinespring(&phi, &tol)?;
    let r = StinespringCertificate::new(&phi, &triple, &tol)?.verify(&phi)?;
    t.bound("contract", r.contract, 1e-9)?;
    let oracle = choi_rank_dimension(&phi, &tol)?;
    ensure(
        triple.dim_k() == oracle,
        format!("dim_K {} != Choi-rank dimension {oracle}", triple.dim_k()),
    )?;
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let x = random::algebra_element(&mut g.rng, &a);
        let y = random::algebra_element(&mut g.rng, &a);
        let lhs = triple.pi.apply(&x)? * triple.pi.apply(&y)?;
        worst = worst.max(linalg::rel_residual(&lhs, &triple.pi.apply(&x.try_mul(&y)?)?));
    }
    t.bound("multiplicativity", worst, eps(g))
}

fn cb_lower_bound(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let a = g.algebra();
    let phi = g.cp_map(&a);
    t.instance(&phi);
    let exact = cp::cb_norm_cp(&phi, &g.config.tol)?;
    let lower = maps::cb_lower_bound(&phi, g.config.levels.min(2), &mut g.rng);
    t.residual("cb_norm", exact);
    t.bound("excess", lower - exact, 1e-6)
}

fn corner_decomposition(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let e = g.module();
    let l = e.linking_algebra();
    let mut mult: Vec<usize> = l.blocks().iter().map(|_| g.rng.random_range(0..=2)).collect();
    mult[0] = mult[0].max(1);
    let pi_l = random::representation(&mut g.rng, &l, &mult);
    t.instance(&pi_l);
    let c = cp::corner_decompose(&pi_l, &e, &g.config.tol)?;
    let el = random::algebra_element(&mut g.rng, &l);
    let back = c.reassemble(&LinkingElement::from_block_element(&e, &el)?)?;
    t.bound("decomposition", c.residual, eps(g))?;
    t.bound("reassembly", linalg::rel_residual(&back, &pi_l.apply(&el)?), eps(g))
}

fn kolmogorov(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let n = g.rng.random_range(1..=5);
    let (dim_h, dim_k) = (g.dim(), g.dim());
    let ops = random::point_operators(&mut g.rng, n, dim_h, dim_k);
    let k = kernels::kernel_from_map(&ops, dim_h)?;
    t.instance(&k);
    let tol = g.config.tol;
    ensure(kernels::is_positive_definite(&k, &tol), "generated kernel is not positive definite")?;
    let pair = kernels::minimal_kolmogorov(&k, &tol)?;
    t.bound("reconstruction", pair.verify(&k, &tol)?, 1e-9)?;
    // independent minimal decomposition: compress the generators onto their span
    let q = linalg::range_basis(&linalg::hstack(&ops, dim_k), &tol);
    let u = random::unitary(&mut g.rng, q.ncols());
    let left = u * q.adjoint();
    let other = KolmogorovPair::new(left.nrows(), ops.iter().map(|o| &left * o).collect(), &tol)?;
    let v = kernels::equivalence_isometry(&pair, &other, &tol)?;
    let class = linalg::classify_isometry(&v, &tol);
    ensure(class == IsometryClass::Unitary, format!("equivalence operator is {class:?}"))
}

fn canonical_phi(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let ctx = g.phi_context()?;
    t.instance(&ctx.phi);
    ensure(ctx.w_phi.class == IsometryClass::Unitary, format!("W_phi is {:?}", ctx.w_phi.class))?;
    t.bound("intertwining", ctx.w_phi.residual, 1e-9)?;
    let e = ctx.module().clone();
    let d = ctx.phi.dim_h();
    let mut lhs = linalg::zeros(ctx.cphi.dim_hphi, 1);
    let mut rhs = linalg::zeros(ctx.crep.dim_kpi, 1);
    for _ in 0..3 {
        let x = random::module_element(&mut g.rng, &e);
        let h = random::gaussian_matrix(&mut g.rng, d, 1);
        lhs += ctx.cphi.phi_map.apply(&x)? * &h;
        rhs += ctx.crep.rep_map.apply(&x)? * &ctx.triple.v * &h;
    }
    let (a, b) = (linalg::frobenius(&lhs), linalg::frobenius(&rhs));
    t.bound("norm_identity", (a - b).abs() / a.max(1.0), 1e-9)?;
    t.bound("module_action", phi::module_action_residual(&ctx.crep.rep_map, &ctx.triple.pi), eps(g))
}

fn phi_uniqueness(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let ctx = g.phi_context()?;
    t.instance(&ctx.phi);
    let tol = g.config.tol;
    let u = random::unitary(&mut g.rng, ctx.cphi.dim_hphi);
    let rotated = ctx.cphi.phi_map.left_mul(&u)?;
    let f = phi::factor_phi_map(&rotated, &ctx, &tol)?;
    ensure(f.s.class == IsometryClass::Unitary, format!("phi-map connector is {:?}", f.s.class))?;
    t.bound("phi_map_connector", linalg::rel_residual(&f.s.op, &u), 1e-8)?;
    let w = random::unitary(&mut g.rng, ctx.crep.dim_kpi);
    let rep = ctx.crep.rep_map.left_mul(&w)?;
    let s = phi::factor_representation(&rep, &ctx.triple.pi, &ctx.crep, &tol)?;
    ensure(s.class == IsometryClass::Unitary, format!("representation connector is {:?}", s.class))?;
    t.bound("representation_connector", linalg::rel_residual(&s.op, &w), 1e-8)
}

fn semi_phi_oracle(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let ctx = g.phi_context()?;
    let tol = g.config.tol;
    let p = &ctx.cphi.phi_map;
    let map = if g.rng.random_bool(0.5) {
        let out = g.dim();
        p.left_mul(&random::with_norm(&mut g.rng, out, ctx.cphi.dim_hphi, 0.1, 0.95))?
    } else {
        p.scale(Complex64::new(g.rng.random_range(1.2..2.0), 0.0))
    };
    t.instance(&serde_json::json!({ "map": map, "phi": ctx.phi }));
    let verdict = phi::is_completely_semi_phi_map(&map, &ctx.phi, &tol);
    if verdict {
        for n in 1..=g.config.levels {
            let x = random::module_array(&mut g.rng, map.module(), n);
            let d = phi::amplified_defect(&map, &ctx.phi, &x)?;
            let scaled = linalg::min_eigenvalue(&d) / linalg::op_norm(&d).max(1.0);
            ensure(scaled >= -tol.eps_psd, format!("level {n} defect eigenvalue {scaled:e}"))?;
        }
        Ok(())
    } else {
        let v = phi::semi_phi_violation(&map, &ctx.phi, &tol)?
            .ok_or_else(|| Failure::Verdict("Gram rejects but no violating element found".into()))?;
        let d = phi::amplified_defect(&map, &ctx.phi, &v.x)?;
        let value = (v.xi.adjoint() * d * &v.xi)[(0, 0)].re;
        t.residual("violation", value);
        ensure(value < 0.0, "exhibited element does not violate")
    }
}

fn factor_cb(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let e = g.module();
    let map = g.module_map(&e);
    t.instance(&map);
    let tol = g.config.tol;
    let dil = cb::dilate(&map, &tol)?;
    let cert = cb::factor_from_dilation(&map, &dil, &tol)?;
    t.bound("factorization", cert.residual, 1e-8)?;
    let report = cb::verify_cb_bound(&cert, &map, g.config.levels, &mut g.rng)?;
    t.residual("cb_lower", report.cb_lower);
    t.residual("cb_upper", report.cb_upper);
    let ext = cb::cp_extend(&map, &dil, &tol)?;
    t.residual("choi_min_eig", ext.choi_min_eig);
    ensure(ext.choi_min_eig >= -1e-9, "extension is not completely positive")
}

fn extend_algebra_map(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let a = g.algebra();
    let (dim_k, dim_h) = (g.dim(), g.dim());
    let map = random::linear_map(&mut g.rng, &a, dim_k, dim_h);
    t.instance(&map);
    let ext = cb::extend_algebra_map(&map, &g.config.tol)?;
    t.residual("choi_min_eig", ext.choi_min_eig);
    t.bound("corner", ext.corner_residual, 1e-9)?;
    ensure(ext.choi_min_eig >= -1e-9, "extension is not completely positive")
}

fn perturb(g: &mut Generator, m: &CMatrix) -> CMatrix {
    let noise = random::gaussian_matrix(&mut g.rng, m.nrows(), m.ncols());
    let scale = 1e-3 * linalg::frobenius(m) / linalg::frobenius(&noise).max(f64::MIN_POSITIVE);
    m + noise * Complex64::new(scale, 0.0)
}

fn falsification(g: &mut Generator, t: &mut Trial) -> Result<(), Failure> {
    let e = g.module();
    let map = g.module_map(&e);
    t.instance(&map);
    let tol = g.config.tol;
    let cert = cb::factor_cb(&map, &tol)?;
    cert.verify(&map)?;
    let bad_s = cb::FactorizationCertificate {
        s: perturb(g, &cert.s),
        ..cert.clone()
    };
    ensure(bad_s.verify(&map).is_err(), "perturbed S accepted")?;
    let gamma: Vec<CMatrix> = cert.gamma.images().iter().map(|m| perturb(g, m)).collect();
    let bad_gamma = cb::FactorizationCertificate {
        gamma: ModuleMap::new(e.clone(), cert.gamma.dim_out(), cert.gamma.dim_h(), gamma)?,
        ..cert.clone()
    };
    ensure(bad_gamma.verify(&map).is_err(), "perturbed Gamma accepted")?;

    let phi = g.cp_map(e.algebra());
    let triple = cp::minimal_stinespring(&phi, &tol)?;
    let sc = StinespringCertificate::new(&phi, &triple, &tol)?;
    sc.verify(&phi)?;
    let bad_v = StinespringCertificate {
        v: perturb(g, &sc.v),
        ..sc
    };
    ensure(bad_v.verify(&phi).is_err(), "perturbed V accepted")?;
    Ok(())
}
