use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coupling-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_config_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[potential]\nfamily = \"quadratic\"\n[perturbation]\nfamily = \"linear\"\na = \"half\"\n").unwrap();
    let o = run(&["constants", "--scenario", path.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("perturbation.a"), "{}", stderr(&o));
}

#[test]
fn missing_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bounds"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rejected_scenario_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bounds", "--scenario", scenario("double_well_rejected.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn constants_and_bounds_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("ou_linear.toml");
    for cmd in ["constants", "bounds"] {
        let o = run(&[cmd, "--scenario", s.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
    }
    assert_eq!(header(&dir.path().join("kappa_u.csv")), "r,phi,Phi,g,f,fprime");
    assert_eq!(header(&dir.path().join("envelopes.csv")), "t,grad_env,hess_env");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn zero_perturbation_bounds_are_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.toml");
    fs::write(&path, "[potential]\nfamily = \"quadratic\"\n[perturbation]\nfamily = \"zero\"\n").unwrap();
    let o = run(&["bounds", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("bounds.json")).unwrap()).unwrap();
    let lips = json["lipschitz"].as_array().unwrap();
    assert!(!lips.is_empty());
    for b in lips {
        assert_eq!(b["closed"].as_f64(), Some(1.0), "{b}");
    }
}

#[test]
fn couple_writes_contraction_curves() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("ou_linear.toml");
    let o = run(&["couple", "--scenario", s.to_str().unwrap(), "--n-paths", "2000", "--dt", "1e-2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(header(&dir.path().join("contraction.csv")), "t,mean_f_delta,se_f_delta,envelope_f,frac_distinct,envelope_q");
    assert_eq!(header(&dir.path().join("paths.csv")), "path_id,t,x,xhat");
}

#[test]
fn quick_verify_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["verify", "--quick", "--no-rerun", "--only", "1,2,3,4,5", "--seed", "3"];
    for out in [&a, &b] {
        let o = run(&args, out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        assert_eq!(String::from_utf8_lossy(&o.stdout).lines().filter(|l| l.starts_with("[PASS]")).count(), 5);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}
