mod common;

use cstar_core::linalg::{self, IsometryClass, Tolerance};
use cstar_core::phi::{self, PhiContext};
use cstar_core::random;
use cstar_core::{HilbertModule, ModuleMap, OperatorMap};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn context(rng: &mut ChaCha20Rng) -> PhiContext {
    let a = random::algebra(rng, 2, 2);
    let m = rng.random_range(1..=2);
    let e = HilbertModule::new(a, m).unwrap();
    let dim_h = rng.random_range(1..=3);
    let kraus = rng.random_range(1..=3);
    let phi = random::cp_map(rng, e.algebra(), dim_h, kraus);
    PhiContext::new(&phi, &e, &tol()).unwrap()
}

/// `<Phi(x), Phi(y)> = phi(<x, y>)` on random (not basis) pairs.
fn pair_residual(map: &ModuleMap, phi: &OperatorMap, rng: &mut ChaCha20Rng, pairs: usize) -> f64 {
    let e = map.module();
    (0..pairs)
        .map(|_| {
            let x = random::module_element(rng, e);
            let y = random::module_element(rng, e);
            let lhs = map.apply(&x).unwrap().adjoint() * map.apply(&y).unwrap();
            let rhs = phi.apply(&x.inner_product(&y).unwrap()).unwrap();
            linalg::rel_residual(&lhs, &rhs)
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(25))]

    #[test]
    fn basis_check_decides_phi_maps(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 20);
        let ctx = context(&mut rng);
        let e = ctx.module().clone();
        let direct = common::direct_rep(&ctx.triple.pi, &e).right_mul(&ctx.triple.v).unwrap();
        prop_assert!(phi::is_phi_map(&direct, &ctx.phi, &tol()));
        prop_assert!(pair_residual(&direct, &ctx.phi, &mut rng, 4) < 1e-9);
        prop_assert!(pair_residual(&ctx.cphi.phi_map, &ctx.phi, &mut rng, 4) < 1e-9);
        let other = random::linear_module_map(&mut rng, &e, ctx.phi.dim_h(), 2);
        prop_assert!(!phi::is_phi_map(&other, &ctx.phi, &tol()));
        prop_assert!(pair_residual(&other, &ctx.phi, &mut rng, 4) > 1e-6);
    }

    #[test]
    fn canonical_maps_are_linear(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 21);
        let ctx = context(&mut rng);
        let e = ctx.module().clone();
        let x = random::module_element(&mut rng, &e);
        let y = random::module_element(&mut rng, &e);
        let z = random::complex_gaussian(&mut rng);
        let sum = cstar_core::ModuleElement::new(
            &e,
            x.coords().iter().zip(y.coords()).map(|(p, q)| {
                cstar_core::AlgebraElement::from_coords(
                    e.algebra(),
                    &p.coords().iter().zip(q.coords()).map(|(u, v)| z * u + v).collect::<Vec<_>>(),
                ).unwrap()
            }).collect(),
        ).unwrap();
        for map in [&ctx.cphi.phi_map, &ctx.crep.rep_map] {
            let lhs = map.apply(&sum).unwrap();
            let rhs = map.apply(&x).unwrap() * z + map.apply(&y).unwrap();
            prop_assert!(linalg::rel_residual(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn representation_respects_module_action(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 22);
        let ctx = context(&mut rng);
        let e = ctx.module().clone();
        let pi = &ctx.triple.pi;
        prop_assert!(phi::module_action_residual(&ctx.crep.rep_map, pi) < 1e-9);
        prop_assert!(phi::is_representation(&ctx.crep.rep_map, pi, &tol()));
        let x = random::module_element(&mut rng, &e);
        let a = random::algebra_element(&mut rng, e.algebra());
        let lhs = ctx.crep.rep_map.apply(&x.act(&a).unwrap()).unwrap();
        let rhs = ctx.crep.rep_map.apply(&x).unwrap() * pi.apply(&a).unwrap();
        prop_assert!(linalg::rel_residual(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn norm_identity_through_connecting_unitary(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 23);
        let ctx = context(&mut rng);
        prop_assert_eq!(ctx.w_phi.class, IsometryClass::Unitary);
        let e = ctx.module().clone();
        let d = ctx.phi.dim_h();
        let mut lhs = linalg::zeros(ctx.cphi.dim_hphi, 1);
        let mut rhs = linalg::zeros(ctx.crep.dim_kpi, 1);
        for _ in 0..3 {
            let x = random::module_element(&mut rng, &e);
            let h = random::gaussian_matrix(&mut rng, d, 1);
            lhs += ctx.cphi.phi_map.apply(&x).unwrap() * &h;
            rhs += ctx.crep.rep_map.apply(&x).unwrap() * &ctx.triple.v * &h;
        }
        let (a, b) = (linalg::frobenius(&lhs), linalg::frobenius(&rhs));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        // W_phi carries one vector onto the other
        prop_assert!(linalg::rel_residual(&(&ctx.w_phi.op * &lhs), &rhs) < 1e-9);
    }

    #[test]
    fn phi_maps_unique_up_to_unitary(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 24);
        let ctx = context(&mut rng);
        let u = random::unitary(&mut rng, ctx.cphi.dim_hphi);
        let rotated = ctx.cphi.phi_map.left_mul(&u).unwrap();
        let f = phi::factor_phi_map(&rotated, &ctx, &tol()).unwrap();
        prop_assert!(f.nondegenerate);
        prop_assert_eq!(f.s.class, IsometryClass::Unitary);
        prop_assert!(linalg::rel_residual(&f.s.op, &u) < 1e-8);
        // degenerate phi-maps factor through an isometry
        let j = random::isometry(&mut rng, ctx.cphi.dim_hphi + 2, ctx.cphi.dim_hphi);
        let padded = ctx.cphi.phi_map.left_mul(&j).unwrap();
        let g = phi::factor_phi_map(&padded, &ctx, &tol()).unwrap();
        prop_assert!(!g.nondegenerate);
        prop_assert_eq!(g.s.class, IsometryClass::Isometry);
    }

    #[test]
    fn equivalence_loop(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 25);
        let ctx = context(&mut rng);
        let e = ctx.module().clone();
        let phi_map = common::compress_to_range(
            &common::direct_rep(&ctx.triple.pi, &e).right_mul(&ctx.triple.v).unwrap(), &mut rng, &tol());
        let rep = common::compress_to_range(&common::direct_rep(&ctx.triple.pi, &e), &mut rng, &tol());
        let w = phi::relate_phi_and_rep(&phi_map, &rep, &ctx, &tol()).unwrap();
        prop_assert_eq!(w.class, IsometryClass::Unitary);
        let back = rep.right_mul(&ctx.triple.v).unwrap().left_mul(&w.op.adjoint()).unwrap();
        prop_assert!(back.residual_to(&phi_map) < 1e-8);
    }

    #[test]
    fn semi_phi_verdict_matches_levels(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 26);
        let ctx = context(&mut rng);
        let c = random::with_norm(&mut rng, 2, ctx.cphi.dim_hphi, 0.1, 0.99);
        let dominated = ctx.cphi.phi_map.left_mul(&c).unwrap();
        prop_assert!(phi::is_completely_semi_phi_map(&dominated, &ctx.phi, &tol()));
        let f = phi::factor_semi_phi_map(&dominated, &ctx, &tol()).unwrap();
        prop_assert!(f.s.class.is_contraction());
        for n in 1..=3 {
            let x = random::module_array(&mut rng, &ctx.module().clone(), n);
            let d = phi::amplified_defect(&dominated, &ctx.phi, &x).unwrap();
            prop_assert!(linalg::min_eigenvalue(&d) >= -1e-9 * linalg::op_norm(&d).max(1.0));
        }
        let s = rng.random_range(1.1..3.0);
        let scaled = ctx.cphi.phi_map.scale(Complex64::new(s, 0.0));
        prop_assert!(!phi::is_completely_semi_phi_map(&scaled, &ctx.phi, &tol()));
        let v = phi::semi_phi_violation(&scaled, &ctx.phi, &tol()).unwrap().unwrap();
        let d = phi::amplified_defect(&scaled, &ctx.phi, &v.x).unwrap();
        prop_assert!((v.xi.adjoint() * d * &v.xi)[(0, 0)].re < 0.0);
    }

    #[test]
    fn domination_is_monotone(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 27);
        let ctx = context(&mut rng);
        let c = random::with_norm(&mut rng, 2, ctx.cphi.dim_hphi, 0.1, 1.0);
        let map = ctx.cphi.phi_map.left_mul(&c).unwrap();
        let extra = random::cp_map(&mut rng, ctx.phi.domain(), ctx.phi.dim_h(), 1);
        let bigger = OperatorMap::new(
            ctx.phi.domain().clone(),
            ctx.phi.dim_k(),
            ctx.phi.dim_h(),
            ctx.phi.images().iter().zip(extra.images()).map(|(p, q)| p + q).collect(),
        ).unwrap();
        prop_assert!(phi::is_completely_semi_phi_map(&map, &bigger, &tol()));
    }
}
