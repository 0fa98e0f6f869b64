use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinldp"))
}

fn inputs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/inputs").canonicalize().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let text = body.replace("@INPUTS@", inputs().to_str().unwrap());
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MGF: &str = r#"
experiment = "mgf"
output_dir = "out"

[state]
kind = "fcs"
triple = "@INPUTS@/product_mixed.toml"

[observable]
interaction = "@INPUTS@/magnetization.toml"

[grid]
alpha_min = -2.0
alpha_max = 2.0
alpha_steps = 9
n = [4, 6]
mode = "direct"
"#;

#[test]
fn mgf_on_product_state_is_log_cosh() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mgf.toml", MGF);
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/mgf.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,f,f_err"));
    let mut saw_zero = false;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!((v[1] - v[0].cosh().ln()).abs() < 1e-12, "{line}");
        if v[0] == 0.0 {
            saw_zero = true;
            assert!(v[1].abs() < 1e-14);
        }
    }
    assert!(saw_zero);
    assert!(dir.path().join("out/manifest.toml").is_file());
}

#[test]
fn inconsistent_triple_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.toml",
        "experiment = \"fcs-validate\"\noutput_dir = \"out\"\n\n[state]\nkind = \"fcs\"\ntriple = \"@INPUTS@/product_inconsistent.toml\"\n",
    );
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.contains("unitality violation")).unwrap();
    let v: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((v - 1e-3).abs() < 1e-9, "{line}");
    assert!(stderr(&o).contains("unitality"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/fcs_validate.json")).unwrap()).unwrap();
    assert!((report["violations"]["unitality"].as_f64().unwrap() - 1e-3).abs() < 1e-9);
}

#[test]
fn consistent_triple_passes_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "v.toml",
        "experiment = \"fcs-validate\"\noutput_dir = \"out\"\nseed = 4\n\n[state]\nkind = \"fcs\"\ntriple = \"@INPUTS@/markov.toml\"\n\n[fcs_validate]\ncone_samples = 20\n",
    );
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/fcs_validate.json")).unwrap()).unwrap();
    assert_eq!(report["primitivity"]["cone_violations"], 0);
}

const EXPANSIONAL: &str = "experiment = \"expansional-validate\"\noutput_dir = \"out\"\nseed = 12\n\n[expansional]\nsamples = 4\nterms = 25\n";

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path(), "e.toml", EXPANSIONAL);
        let o = run(&["run", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("out/expansional.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mgf.toml", MGF);
    assert!(run(&["run", cfg.to_str().unwrap()]).status.success());
    let manifest = dir.path().join("out/manifest.toml");
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("library_version"));
    let first = fs::read(dir.path().join("out/mgf.csv")).unwrap();
    let o = run(&["run", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("out/mgf.csv")).unwrap(), first);
    assert_eq!(fs::read_to_string(&manifest).unwrap(), text);
}

#[test]
fn schema_describes_run_configs() {
    let o = run(&["schema"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let props = &v["properties"];
    for key in ["experiment", "output_dir", "seed", "grid", "tolerances", "state"] {
        assert!(props.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn unknown_field_is_a_validation_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &MGF.replace("alpha_steps = 9", "alpha_steps = 9\nalpha_stps = 3"));
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bad.toml:"), "{err}");
    assert!(err.contains("alpha_stps"), "{err}");
}

#[test]
fn missing_input_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", &MGF.replace("product_mixed.toml", "absent.toml"));
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.toml"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_numbers_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n.toml", &MGF.replace("n = [4, 6]", "n = [6, 4]"));
    let o = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("increasing"));
}

#[test]
fn oversized_volume_hits_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &MGF.replace("n = [4, 6]", "n = [4, 30]"));
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn validate_accepts_the_shipped_configs() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(configs).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let o = run(&["validate", p.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
            count += 1;
        }
    }
    assert!(count >= 8);
}
