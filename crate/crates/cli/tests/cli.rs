use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use cstar_cli::{Document, Instance, Report, Status};
use cstar_core::cb::{CPExtensionCertificate, FactorizationCertificate};
use cstar_core::kernels;
use cstar_core::{BlockAlgebra, ModuleMap, OperatorMap, Tolerance};
use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cstar-mod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(o: &Output) -> Report {
    serde_json::from_str(&stdout(o)).expect("report parses")
}

fn strip_times(mut v: Value) -> Value {
    if let Some(results) = v.get_mut("results").and_then(Value::as_array_mut) {
        for r in results {
            r.as_object_mut().unwrap().remove("wall_time_s");
        }
    }
    v
}

#[test]
fn gen_is_deterministic() {
    for kind in ["cp-map", "linear-map", "module-map", "kernel", "representation"] {
        let a = cli(&["gen", kind, "--seed", "7"]);
        let b = cli(&["gen", kind, "--seed", "7"]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{kind}");
        let c = cli(&["gen", kind, "--seed", "8"]);
        assert_ne!(a.stdout, c.stdout, "{kind}");
    }
}

#[test]
fn generated_documents_round_trip() {
    for kind in ["cp-map", "linear-map", "module-map", "kernel", "representation"] {
        let text = stdout(&cli(&["gen", kind, "--seed", "11"]));
        let doc = Document::parse(&text).unwrap();
        assert_eq!(doc.schema, cstar_core::SCHEMA);
        let again = Document::parse(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(again, doc, "{kind}");
    }
}

#[test]
fn generated_kernels_are_positive_definite() {
    for seed in 0..5 {
        let text = stdout(&cli(&["gen", "kernel", "--seed", &seed.to_string()]));
        let Instance::Kernel { kernel } = Document::parse(&text).unwrap().instance else {
            panic!("kernel document expected");
        };
        assert!(kernels::is_positive_definite(&kernel, &Tolerance::default()));
    }
}

#[test]
fn factor_cb_on_generated_linear_map() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&cli(&["gen", "linear-map", "--seed", "5"]));
    let input = write(dir.path(), "map.json", &text);
    let o = cli(&["run", "factor-cb", "--input", &input, "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(&o);
    assert_eq!(r.results.len(), 1);
    let result = &r.results[0];
    assert!(result.residuals["factorization"] < 1e-8);
    assert!(result.residuals["cb_lower"] <= result.residuals["cb_upper"] * (1.0 + 1e-12));
    // the emitted certificate re-validates
    let cert: FactorizationCertificate = serde_json::from_value(result.certificate.clone().unwrap()).unwrap();
    let Instance::LinearMap { map } = Document::parse(&text).unwrap().instance else {
        panic!("linear-map document expected");
    };
    assert!(cert.verify(&ModuleMap::from_operator_map(&map)).is_ok());
}

#[test]
fn cp_extend_certificate_revalidates() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&cli(&["gen", "module-map", "--seed", "9"]));
    let input = write(dir.path(), "map.json", &text);
    let o = cli(&["run", "cp-extend", "--input", &input]);
    assert_eq!(o.status.code(), Some(0));
    let cert: CPExtensionCertificate =
        serde_json::from_value(report(&o).results[0].certificate.clone().unwrap()).unwrap();
    let Instance::ModuleMap { map, .. } = Document::parse(&text).unwrap().instance else {
        panic!("module-map document expected");
    };
    let r = cert.verify(&map).unwrap();
    assert!(r.choi_min_eig >= -1e-9);
}

#[test]
fn stinespring_rejects_transpose() {
    let m2 = BlockAlgebra::full(2);
    let t = OperatorMap::from_fn(&m2, 2, 2, |x| x.to_matrix().transpose()).unwrap();
    let doc = Document::new(Instance::LinearMap { map: t });
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "t.json", &serde_json::to_string(&doc).unwrap());
    let o = cli(&["run", "stinespring", "--input", &input]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&o);
    assert_eq!(r.results[0].status, Status::Fail);
    assert_eq!(r.results[0].verdict, "not completely positive");
    assert!(r.results[0].instance.is_some(), "failures carry the offending instance");
    // the same map is still the corner of a CP map on M_2(M_2)
    let o = cli(&["run", "extend-algebra-map", "--input", &input]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn schema_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let garbage = write(dir.path(), "g.json", "{ not json");
    assert_eq!(cli(&["run", "dilate", "--input", &garbage]).status.code(), Some(2));
    let text = stdout(&cli(&["gen", "cp-map", "--seed", "1"])).replace("cstar-mod/1", "cstar-mod/0");
    let old = write(dir.path(), "old.json", &text);
    assert_eq!(cli(&["run", "stinespring", "--input", &old]).status.code(), Some(2));
    let kernel = write(dir.path(), "k.json", &stdout(&cli(&["gen", "kernel"])));
    assert_eq!(cli(&["run", "stinespring", "--input", &kernel]).status.code(), Some(2));
    assert_eq!(cli(&["run", "suite", "--tol-eq", "2"]).status.code(), Some(2));
    assert_eq!(cli(&["gen", "no-such-kind"]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    for command in ["stinespring", "kolmogorov", "canonical-phi", "factor-phi", "factor-cb", "dilate"] {
        let a: Value = serde_json::from_str(&stdout(&cli(&["run", command, "--seed", "4"]))).unwrap();
        let b: Value = serde_json::from_str(&stdout(&cli(&["run", command, "--seed", "4"]))).unwrap();
        assert_eq!(a["results"][0]["status"], "pass", "{command}");
        assert_eq!(strip_times(a), strip_times(b), "{command}");
    }
}

#[test]
fn report_goes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = cli(&["run", "dilate", "--seed", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Report = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r.command, "dilate");
    assert_eq!(r.summary.passed, 1);
}

#[test]
fn suite_passes_quickly() {
    let start = Instant::now();
    let o = cli(&["run", "suite", "--seed", "1", "--trials", "20"]);
    let elapsed = start.elapsed().as_secs_f64();
    let r = report(&o);
    let failed: Vec<_> = r.results.iter().filter(|x| x.status != Status::Pass).map(|x| &x.id).collect();
    assert_eq!(o.status.code(), Some(0), "failing trials: {failed:?}");
    assert!(elapsed < 60.0, "suite took {elapsed:.1} s");
    assert_eq!(r.summary.total, r.summary.passed);
    let ids: Vec<&String> = r.results.iter().map(|x| &x.id).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    let a = strip_times(serde_json::to_value(&r).unwrap());
    let b = strip_times(serde_json::from_str(&stdout(&cli(&["run", "suite", "--seed", "1", "--trials", "20"]))).unwrap());
    assert_eq!(a, b);
}
