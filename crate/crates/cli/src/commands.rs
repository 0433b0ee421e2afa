//! Single-instance pipelines behind `run <command>`.

use cstar_core::cb::{self, CPExtensionCertificate, DilationCertificate, FactorizationCertificate};
use cstar_core::cp::{self, StinespringCertificate};
use cstar_core::kernels::{self, KolmogorovPair};
use cstar_core::phi::{self, PhiContext};
use cstar_core::{linalg, random, HilbertModule, IsometryClass, ModuleMap, OperatorMap};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::config::{GenKind, RunCommand, RunConfig};
use crate::document::{Generator, Instance};
use crate::report::{ensure, Failure, Trial};

/// Stream for the RNG a command uses after its instance is fixed.
const CHECK_STREAM: u64 = 100;
const DEFAULT_STREAM: u64 = 200;

fn wrong_kind(command: RunCommand, inst: &Instance, expected: &str) -> Failure {
    Failure::Schema(format!(
        "{} expects a {expected} document, got {}",
        command.name(),
        inst.kind()
    ))
}

/// Serializes a certificate and checks that the parsed copy still verifies.
fn reparse<T: Serialize + DeserializeOwned>(cert: &T) -> Result<T, Failure> {
    let text = serde_json::to_string(cert).map_err(|e| Failure::Breakdown(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Failure::Breakdown(format!("certificate does not parse back: {e}")))
}

fn module_map(command: RunCommand, inst: &Instance) -> Result<ModuleMap, Failure> {
    match inst {
        Instance::ModuleMap { map, .. } => Ok(map.clone()),
        Instance::LinearMap { map } | Instance::CpMap { map, .. } => Ok(ModuleMap::from_operator_map(map)),
        _ => Err(wrong_kind(command, inst, "module-map or linear-map")),
    }
}

fn operator_map(command: RunCommand, inst: &Instance) -> Result<OperatorMap, Failure> {
    match inst {
        Instance::CpMap { map, .. } | Instance::LinearMap { map } => Ok(map.clone()),
        _ => Err(wrong_kind(command, inst, "cp-map or linear-map")),
    }
}

/// The instance a command runs on when no `--input` is given.
pub fn default_instance(command: RunCommand, config: &RunConfig) -> Result<Instance, Failure> {
    let mut g = Generator::new(config, DEFAULT_STREAM);
    Ok(match command {
        RunCommand::Stinespring | RunCommand::CanonicalPhi => g.instance(GenKind::CpMap),
        RunCommand::Kolmogorov => g.instance(GenKind::Kernel),
        RunCommand::FactorCb | RunCommand::Dilate | RunCommand::CpExtend => g.instance(GenKind::ModuleMap),
        RunCommand::ExtendAlgebraMap => g.instance(GenKind::LinearMap),
        RunCommand::FactorPhi => {
            // a contraction after the canonical phi-map is completely semi-phi
            let ctx = g.phi_context()?;
            let out = g.dim();
            let c = random::with_norm(&mut g.rng, out, ctx.cphi.dim_hphi, 0.1, 1.0);
            Instance::ModuleMap {
                map: ctx.cphi.phi_map.left_mul(&c)?,
                phi: Some(ctx.phi.clone()),
            }
        }
        RunCommand::Suite => return Err(Failure::Schema("suite takes no instance".into())),
    })
}

pub fn run(command: RunCommand, inst: &Instance, config: &RunConfig, t: &mut Trial) -> Result<(), Failure> {
    t.instance(inst);
    let tol = &config.tol;
    match command {
        RunCommand::Stinespring => {
            let map = operator_map(command, inst)?;
            if let Ok(e) = cp::min_choi_eigenvalue(&map) {
                t.residual("min_choi_eigenvalue", e);
            }
            let triple = cp::minimal_stinespring(&map, tol)?;
            let cert = StinespringCertificate::new(&map, &triple, tol)?;
            let r = reparse(&cert)?.verify(&map)?;
            t.residual("contract", r.contract);
            t.residual("unit", r.unit);
            t.residual("dim_K", cert.dim_k as f64);
            t.certificate(&cert);
            Ok(())
        }
        RunCommand::Kolmogorov => {
            let Instance::Kernel { kernel } = inst else {
                return Err(wrong_kind(command, inst, "kernel"));
            };
            let pair = kernels::minimal_kolmogorov(kernel, tol)?;
            let residual = reparse::<KolmogorovPair>(&pair)?.verify(kernel, tol)?;
            t.bound("reconstruction", residual, tol.eps_eq)?;
            t.residual("dim_K", pair.dim_k as f64);
            t.certificate(&pair);
            Ok(())
        }
        RunCommand::CanonicalPhi => {
            let Instance::CpMap { map, module_rank } = inst else {
                return Err(wrong_kind(command, inst, "cp-map"));
            };
            let e = HilbertModule::new(map.domain().clone(), *module_rank)?;
            let ctx = PhiContext::new(map, &e, tol)?;
            t.bound("phi_map", phi::phi_map_residual(&ctx.cphi.phi_map, map)?, tol.eps_eq)?;
            t.bound("module_action", phi::module_action_residual(&ctx.crep.rep_map, &ctx.triple.pi), tol.eps_eq)?;
            t.bound("connecting_unitary", ctx.w_phi.residual, tol.eps_eq)?;
            ensure(
                ctx.w_phi.class == IsometryClass::Unitary,
                format!("connecting operator is {:?}, not unitary", ctx.w_phi.class),
            )?;
            t.certificate(&json!({
                "canonical_phi": ctx.cphi,
                "canonical_rep": ctx.crep,
                "W_phi": ctx.w_phi,
            }));
            Ok(())
        }
        RunCommand::FactorPhi => {
            let Instance::ModuleMap { map, phi } = inst else {
                return Err(wrong_kind(command, inst, "module-map"));
            };
            let phi = phi.clone().unwrap_or_else(|| cb::dominating_cp(map));
            let ctx = PhiContext::new(&phi, map.module(), tol)?;
            let defect = phi::defect_gram(map, &phi)?;
            t.residual("min_defect_eigenvalue", linalg::min_eigenvalue(&defect));
            let f = phi::factor_semi_phi_map(map, &ctx, tol)?;
            t.residual("S", f.s.residual);
            t.residual("W", f.w.residual);
            t.certificate(&json!({ "phi": phi, "factorization": f }));
            Ok(())
        }
        RunCommand::FactorCb => {
            let map = module_map(command, inst)?;
            let cert = cb::factor_cb(&map, tol)?;
            let mut rng = random::stream_rng(config.seed, CHECK_STREAM);
            let parsed: FactorizationCertificate = reparse(&cert)?;
            let bound = cb::verify_cb_bound(&parsed, &map, config.levels, &mut rng)?;
            t.bound("factorization", cert.residual, tol.eps_eq)?;
            t.residual("cb_upper", bound.cb_upper);
            t.residual("cb_lower", bound.cb_lower);
            t.residual("max_ratio", bound.max_ratio);
            t.certificate(&cert);
            Ok(())
        }
        RunCommand::Dilate => {
            let map = module_map(command, inst)?;
            let cert = cb::dilate(&map, tol)?;
            let residual = reparse::<DilationCertificate>(&cert)?.verify(&map)?;
            t.bound("dilation", residual, tol.eps_eq)?;
            t.certificate(&cert);
            Ok(())
        }
        RunCommand::CpExtend => {
            let map = module_map(command, inst)?;
            let dil = cb::dilate(&map, tol)?;
            let cert = cb::cp_extend(&map, &dil, tol)?;
            extension_residuals(&cert, &map, t)
        }
        RunCommand::ExtendAlgebraMap => {
            let map = operator_map(command, inst)?;
            let cert = cb::extend_algebra_map(&map, tol)?;
            extension_residuals(&cert, &ModuleMap::from_operator_map(&map), t)
        }
        RunCommand::Suite => Err(Failure::Schema("suite takes no instance".into())),
    }
}

fn extension_residuals(cert: &CPExtensionCertificate, map: &ModuleMap, t: &mut Trial) -> Result<(), Failure> {
    let r = reparse(cert)?.verify(map)?;
    t.residual("choi_min_eig", r.choi_min_eig);
    t.residual("corner", r.corner);
    t.residual("witness", r.witness);
    t.certificate(cert);
    Ok(())
}
