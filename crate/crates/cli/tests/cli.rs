use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn locsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locsym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn xor_file(dir: &Path) -> PathBuf {
    write(dir, "xor.rule", "n 2\nk 2\ntable 0 1 1 0\n")
}

#[test]
fn classify_xor() {
    let dir = tempfile::tempdir().unwrap();
    let xor = xor_file(dir.path());
    let o = locsym(&["classify", "--rule", xor.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "MS SET TOT\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("# seed 0"));
}

#[test]
fn count_matches_enumeration() {
    let o = locsym(&["count", "--family", "kset", "--n", "2", "--k", "2"]);
    assert!(o.status.success());
    let count: usize = stdout(&o).trim().parse().unwrap();
    let e = locsym(&["enumerate", "--family", "kset", "--n", "2", "--k", "2"]);
    assert_eq!(stdout(&e).lines().count(), count);
}

#[test]
fn check_sim_finds_witness_for_xor_squared() {
    let dir = tempfile::tempdir().unwrap();
    let xor = xor_file(dir.path());
    let r = locsym(&["rescale", "--rule", xor.to_str().unwrap(), "--t", "2"]);
    assert!(r.status.success());
    let xor2 = write(dir.path(), "xor2.rule", &stdout(&r));
    let o = locsym(&[
        "check-sim",
        "--b",
        xor.to_str().unwrap(),
        "--a",
        xor2.to_str().unwrap(),
        "--max",
        "2",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let params: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(params[0], "params");
    assert_eq!(params.len(), 7);
    assert_eq!(text.lines().filter(|l| l.starts_with("map ")).count(), 2);
}

#[test]
fn evolve_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let xor = xor_file(dir.path());
    let trace = dir.path().join("t.trace");
    let o = locsym(&[
        "evolve",
        "--rule",
        xor.to_str().unwrap(),
        "--config",
        "1 0",
        "--steps",
        "2",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let r = locsym(&["render", "--trace", trace.to_str().unwrap()]);
    assert_eq!(stdout(&r), "P2\n2 3\n255\n255 0\n255 255\n0 0\n");
    let a = locsym(&["render", "--trace", trace.to_str().unwrap(), "--ascii"]);
    assert_eq!(stdout(&a), "#.\n##\n..\n");
    let zero = write(dir.path(), "z.trace", "n 2 period 3 steps 0\n0 1 1\n");
    let z = locsym(&["render", "--trace", zero.to_str().unwrap()]);
    assert_eq!(stdout(&z), "P2\n3 1\n255\n0 255 255\n");
}

#[test]
fn malformed_trace_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.trace", "hello\n");
    let o = locsym(&["render", "--trace", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(locsym(&["count", "--bogus"]).status.code(), Some(2));
    assert_eq!(locsym(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn inconclusive_is_reported_distinctly() {
    let dir = tempfile::tempdir().unwrap();
    // two fixed points need a second search node
    let b = write(dir.path(), "b.rule", "n 2\nk 1\ntable 0 1\n");
    let a = write(dir.path(), "a.rule", "n 3\nk 1\ntable 0 2 1\n");
    let o = locsym(&["check-sub", "--b", b.to_str().unwrap(), "--a", a.to_str().unwrap(), "--budget", "1"]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(o.status.code(), Some(1));
    assert!(err.contains("inconclusive"), "{err}");
}

#[test]
fn sampling_replays_byte_identically() {
    let args = ["sample", "--family", "ms", "--n", "3", "--k", "3", "--seed", "42"];
    let a = locsym(&args);
    let b = locsym(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, locsym(&["sample", "--family", "ms", "--n", "3", "--k", "3", "--seed", "43"]).stdout);
}

#[test]
fn density_manifest_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let and = write(dir.path(), "and.rule", "n 2\nk 2\ntable 0 0 0 1\n");
    let manifest = write(
        dir.path(),
        "run.manifest",
        "construction = captive-fullshift\na0 = and.rule\npath = fixed-k:2\nfrom = 2\nto = 40\nseed = 7\n",
    );
    let m = locsym(&["density", "--manifest", manifest.to_str().unwrap(), "--format", "csv"]);
    assert!(m.status.success());
    let f = locsym(&[
        "density",
        "--construction",
        "captive-fullshift",
        "--a0",
        and.to_str().unwrap(),
        "--path",
        "fixed-k:2",
        "--format",
        "csv",
    ]);
    assert_eq!(m.stdout, f.stdout);
    let text = stdout(&m);
    assert_eq!(text.lines().next(), Some("x,n,k,j_count,alpha_exact,bound,kind"));
    let row34 = text.lines().find(|l| l.starts_with("34,")).unwrap();
    assert!(row34.contains(",1/4,"), "{row34}");
}

#[test]
fn construction_verification_and_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let xor = xor_file(dir.path());
    let base = ["verify-construction", "--construction", "ms", "--a0", xor.to_str().unwrap(), "--n", "10", "--k", "8", "--j", "3", "--seeds", "3"];
    let ok = locsym(&base);
    assert!(stdout(&ok).ends_with("3/3 passed\n"));
    let mut mutated = base.to_vec();
    mutated.push("--mutate");
    let bad = locsym(&mutated);
    assert!(stdout(&bad).contains("FAILED at step 1"));
    let out = locsym(&["build-constraints", "--construction", "ms", "--a0", xor.to_str().unwrap(), "--n", "10", "--k", "8", "--j", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "classify", "count", "enumerate", "sample", "evolve", "render", "rescale", "check-sub",
        "check-sim", "encode", "verify-encoding", "build-constraints", "density", "verify-construction",
    ] {
        let o = locsym(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
    }
}

#[test]
fn encode_and_verify_xor() {
    let dir = tempfile::tempdir().unwrap();
    let xor = xor_file(dir.path());
    let e = locsym(&["encode", "--rule", xor.to_str().unwrap(), "--kind", "set"]);
    assert!(e.status.success());
    assert!(stdout(&e).starts_with("n 9\n"));
    let v = locsym(&["verify-encoding", "--rule", xor.to_str().unwrap(), "--kind", "kset", "--trials", "2", "--steps", "4"]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
    assert!(stdout(&v).ends_with("PASSED\n"));
}
