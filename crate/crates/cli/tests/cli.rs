use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radshoot::{Params, SystemSpec};
use radshoot_cli::parse_config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

const SIGN_CHANGING: &str =
    "[system]\nname = \"sign_changing\"\nn = 3\n[system.params]\np = 5\n\n[experiment]\na = 2.0\n";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn radshoot(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radshoot"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_schema(name: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("schemas/{name}.schema.json"));
    let schema = read_json(&path);
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        panic!("{name} output violates its schema: {msgs:?}");
    };
}

fn stderr_report(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().next().expect("an error line on stderr");
    let report: Value = serde_json::from_str(line).unwrap();
    assert_schema("error", &report);
    report
}

#[test]
fn zero_system_shot_never_hits() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[system]\nname = \"zero\"\n[experiment]\na = 2.0\nalpha = [1.0, 1.0]\n",
    );
    let out_dir = tmp.path().join("out");
    let out = radshoot("shoot", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&out_dir.join("outcome.json"));
    assert_schema("shoot", &doc);
    assert_eq!(doc["outcome"]["kind"], "NoHitUpTo");
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("r,u1,u2,du1,du2\n"));
    assert!(out_dir.join("plot.py").exists());
}

#[test]
fn certificate_text_for_the_critical_system() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SIGN_CHANGING);
    let out_dir = tmp.path().join("out");
    let out = radshoot("pohozaev", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(0));
    let expected =
        "Certified — Lemma: sign-changing merged identity, coefficient n/(p+1)−(n−2)/2 = 0";
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).lines().next(),
        Some(expected)
    );
    assert_eq!(
        std::fs::read_to_string(out_dir.join("certificate.txt")).unwrap(),
        format!("{expected}\n")
    );
    let doc = read_json(&out_dir.join("pohozaev.json"));
    assert_schema("pohozaev", &doc);
    assert_eq!(doc["certificate"]["status"], "certified");
    assert_eq!(doc["balls"][0]["found"], false);
}

#[test]
fn find_reports_a_ground_state_candidate() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SIGN_CHANGING);
    let out_dir = tmp.path().join("out");
    let out = radshoot("find", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = read_json(&out_dir.join("candidate.json"));
    assert_schema("find", &doc);
    assert!(doc["candidate"]["achieved_r"].as_f64().unwrap() >= 50.0);
    assert_eq!(doc["ground_state"], true);
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t_lo,t_hi,t_mid,r_mid,h_mid\n"));
}

#[test]
fn every_subcommand_matches_its_schema() {
    let tmp = TempDir::new().unwrap();
    let subcritical = SIGN_CHANGING.replace("p = 5", "p = 3")
        + "k = 8\nradii = [1.0]\nsamples = 500\ndeltas = [1e-2]\nestimate_samples = 5\n";
    let cfg = write_config(tmp.path(), &subcritical);
    for (command, file) in [
        ("shoot", "outcome"),
        ("sweep", "sweep"),
        ("degree", "degree"),
        ("find", "candidate"),
        ("dirichlet", "dirichlet"),
        ("pohozaev", "pohozaev"),
        ("check", "check"),
    ] {
        let out_dir = tmp.path().join(command);
        let out = radshoot(command, &cfg, &out_dir, &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_schema(command, &read_json(&out_dir.join(format!("{file}.json"))));
    }
    let dirichlet = read_json(&tmp.path().join("dirichlet/dirichlet.json"));
    assert_eq!(dirichlet["balls"][0]["result"]["status"], "found");
    assert!(tmp.path().join("dirichlet/profile_0.csv").exists());
    let pohozaev = read_json(&tmp.path().join("pohozaev/pohozaev.json"));
    assert_eq!(pohozaev["certificate"]["status"], "inconclusive");
    let merged = pohozaev["balls"][0]["identities"][0]["residual"]
        .as_f64()
        .unwrap();
    assert!(merged <= 1e-4);
    let degree = read_json(&tmp.path().join("degree/degree.json"));
    assert_eq!(degree["report"]["degree"], 1);
}

#[test]
fn identical_runs_write_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &(SIGN_CHANGING.to_string()
            + "k = 8\nsamples = 500\ndeltas = [1e-2]\nestimate_samples = 5\n"),
    );
    for command in ["sweep", "find", "check"] {
        let a = tmp.path().join(format!("{command}_a"));
        let b = tmp.path().join(format!("{command}_b"));
        radshoot(command, &cfg, &a, &["--seed", "7", "--threads", "2"]);
        radshoot(command, &cfg, &b, &["--seed", "7"]);
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            let x = std::fs::read(a.join(&name)).unwrap();
            let y = std::fs::read(b.join(&name)).unwrap();
            assert!(x == y, "{command}: {name:?} differs");
        }
    }
}

#[test]
fn formats_select_the_files() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SIGN_CHANGING);
    let json_only = tmp.path().join("json");
    radshoot("shoot", &cfg, &json_only, &["--format", "json"]);
    assert!(json_only.join("outcome.json").exists());
    assert!(!json_only.join("trajectory.csv").exists());
    let csv_only = tmp.path().join("csv");
    radshoot("shoot", &cfg, &csv_only, &["--format", "csv"]);
    assert!(!csv_only.join("outcome.json").exists());
    assert!(csv_only.join("trajectory.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");

    let cfg = write_config(tmp.path(), "[sytem]\nname = \"zero\"\n");
    let out = radshoot("shoot", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    let report = stderr_report(&out);
    assert_eq!(report["error"], "validation_error");
    assert_eq!(report["key"], "sytem");

    let cfg = write_config(
        tmp.path(),
        "[system]\nname = \"zero\"\n\n[experiment\na = 1\n",
    );
    let out = radshoot("shoot", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["line"], 4);

    let cfg = write_config(tmp.path(), "[system]\nname = \"zero\"\n");
    let out = radshoot("find", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["key"], "experiment.a");

    let out = radshoot("shoot", &tmp.path().join("missing.toml"), &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["error"], "io_error");

    let out = radshoot("launch", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_report(&out)["error"], "usage_error");
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[system]\nname = \"custom\"\nf = [\"-u1^2\"]\n[experiment]\nalpha = [1.0]\n",
    );
    let out = radshoot("shoot", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    let doc = read_json(&tmp.path().join("out/outcome.json"));
    assert_eq!(doc["outcome"]["kind"], "Blowup");

    let cfg = write_config(tmp.path(), SIGN_CHANGING);
    let out = radshoot(
        "find",
        &cfg,
        &tmp.path().join("b"),
        &["--set", "experiment.budget=20"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_report(&out)["error"], "numerical_failure");
}

#[test]
fn failed_checks_exit_with_four() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[system]\nname = \"custom\"\nf = [\"u2 - 2*u1\", \"u1\"]\n[experiment]\na = 1.0\nsamples = 500\n",
    );
    let out_dir = tmp.path().join("out");
    let out = radshoot("check", &cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(4));
    let doc = read_json(&out_dir.join("check.json"));
    assert_schema("check", &doc);
    assert_eq!(doc["ok"], false);
}

#[test]
fn custom_config_reproduces_the_builtin() {
    let cfg = parse_config(
        "[system]\nname = \"custom\"\nn = 3\nf = [\"u2^p - u1^p\", \"u1^p\"]\n[system.params]\np = 5\n",
        &[],
    )
    .unwrap();
    let custom = cfg.system_spec().unwrap();
    let params: Params = [("p".to_string(), 5.0)].into_iter().collect();
    let builtin = SystemSpec::builtin("sign_changing", &params).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let u = [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
        let (a, b) = (custom.eval_f(&u).unwrap(), builtin.eval_f(&u).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
