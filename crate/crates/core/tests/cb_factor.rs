mod common;

use cstar_core::cb::{self, CPExtensionCertificate, DilationCertificate, FactorizationCertificate};
use cstar_core::cp;
use cstar_core::linalg::{self, Tolerance};
use cstar_core::phi;
use cstar_core::random;
use cstar_core::{HilbertModule, ModuleMap};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

fn tol() -> Tolerance {
    Tolerance::default()
}

fn random_map(rng: &mut ChaCha20Rng) -> ModuleMap {
    let a = random::algebra(rng, 2, 2);
    let m = rng.random_range(1..=2);
    let e = HilbertModule::new(a, m).unwrap();
    let dim_h = rng.random_range(1..=3);
    let dim_k = rng.random_range(1..=3);
    random::linear_module_map(rng, &e, dim_h, dim_k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn factorization_through_phi_map(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 30);
        let map = random_map(&mut rng);
        let cert = cb::factor_cb(&map, &tol()).unwrap();
        prop_assert!(cert.residual <= 1e-8);
        prop_assert!(cp::is_completely_positive(&cert.phi, &tol()));
        prop_assert!(phi::phi_map_residual(&cert.gamma, &cert.phi).unwrap() <= 1e-9);
        let back = cert.gamma.left_mul(&cert.s).unwrap();
        prop_assert!(back.residual_to(&map) <= 1e-8);
        let report = cb::verify_cb_bound(&cert, &map, 3, &mut rng).unwrap();
        prop_assert!(report.cb_lower <= report.cb_upper * (1.0 + 1e-12));
        prop_assert!(report.max_ratio <= report.cb_upper * (1.0 + 1e-12));
    }

    #[test]
    fn cp_extension_has_map_in_corner(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 31);
        let map = random_map(&mut rng);
        let dil = cb::dilate(&map, &tol()).unwrap();
        let ext = cb::cp_extend(&map, &dil, &tol()).unwrap();
        let r = ext.verify(&map).unwrap();
        prop_assert!(r.choi_min_eig >= -1e-9);
        prop_assert!(r.corner <= 1e-9);
        let block = ext.block_map().unwrap();
        prop_assert!(cb::corner_residual(&block, &map).unwrap() <= 1e-9);
        prop_assert!(cp::is_completely_positive(&block, &tol()));
    }

    #[test]
    fn dominating_map_dominates(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 32);
        let map = random_map(&mut rng);
        let psi = cb::dominating_cp(&map);
        prop_assert!(cp::is_completely_positive(&psi, &tol()));
        prop_assert!(phi::is_completely_semi_phi_map(&map, &psi, &tol()));
        // the constant is the smallest that works, so the defect is singular
        let defect = phi::defect_gram(&map, &psi).unwrap();
        prop_assert!(linalg::min_eigenvalue(&defect) <= 1e-9 * linalg::op_norm(&defect).max(1.0));
    }

    #[test]
    fn cb_upper_scales_linearly(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 33);
        let map = random_map(&mut rng);
        let s = rng.random_range(0.5..4.0);
        let one = cb::factor_cb(&map, &tol()).unwrap();
        let scaled = cb::factor_cb(&map.scale(Complex64::new(s, 0.0)), &tol()).unwrap();
        prop_assert!((scaled.cb_upper / one.cb_upper - s).abs() <= 1e-9 * s);
    }

    #[test]
    fn certificates_survive_json(seed in any::<u64>()) {
        let mut rng = random::stream_rng(seed, 34);
        let map = random_map(&mut rng);
        let dil = cb::dilate(&map, &tol()).unwrap();
        let fac = cb::factor_from_dilation(&map, &dil, &tol()).unwrap();
        let ext = cb::cp_extend(&map, &dil, &tol()).unwrap();
        let dil2: DilationCertificate = serde_json::from_str(&serde_json::to_string(&dil).unwrap()).unwrap();
        let fac2: FactorizationCertificate = serde_json::from_str(&serde_json::to_string(&fac).unwrap()).unwrap();
        let ext2: CPExtensionCertificate = serde_json::from_str(&serde_json::to_string(&ext).unwrap()).unwrap();
        prop_assert!(dil2.verify(&map).is_ok());
        prop_assert!(fac2.verify(&map).is_ok());
        prop_assert!(ext2.verify(&map).is_ok());
        prop_assert_eq!(fac2.schema.as_str(), cstar_core::SCHEMA);
    }
}

#[test]
fn cp_maps_extend_with_small_cb_norm() {
    let mut rng = random::stream_rng(9, 35);
    let a = random::algebra(&mut rng, 2, 2);
    let phi = random::cp_map(&mut rng, &a, 2, 2);
    let ext = cb::extend_algebra_map(&phi, &tol()).unwrap();
    assert!(ext.choi_min_eig >= -1e-9);
    let cert = cb::factor_cb(&ModuleMap::from_operator_map(&phi), &tol()).unwrap();
    // for CP maps the cb norm is ||phi(1)||, and the certified bound can only be larger
    let exact = cp::cb_norm_cp(&phi, &tol()).unwrap();
    assert!(exact <= cert.cb_upper * (1.0 + 1e-12));
}

#[test]
fn transpose_on_m2_extends() {
    let m2 = cstar_core::BlockAlgebra::full(2);
    let t = common::transpose_map(&m2);
    let ext = cb::extend_algebra_map(&t, &tol()).unwrap();
    assert!(ext.choi_min_eig >= -1e-9);
    assert!(ext.corner_residual <= 1e-9);
    assert_eq!(ext.block_map().unwrap().domain(), &cstar_core::BlockAlgebra::full(4));
}
