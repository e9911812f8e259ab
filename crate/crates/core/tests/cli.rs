use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_recurlab");

const PERTURB: &str = r#"
[system]
kind = "rotation"
alpha = [0.6180339887498949]
level = 10

[perturb]
delta = 0.03125
epsilon = 0.1
check_period = 64
check_fraction = 0.9
"#;

const RECURRENCE: &str = r#"
seed = 42
samples = 100

[system]
kind = "rotation"
alpha = [0.6180339887498949]

[recurrence]
horizon = 20000
start = 10000
m = 10
l = 200
k = 0.5
"#;

fn run(dir: &Path, sub: &str, config: &str, extra: &[&str]) -> (i32, String) {
    let cfg = dir.join(format!("{sub}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .env_remove("RECURLAB_THREADS")
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn perturb_run_writes_report_and_passes_its_check() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let (code, err) = run(tmp.path(), "perturb", PERTURB, &["--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let summary = String::from_utf8(read(&out, "summary.txt")).unwrap();
    let disp: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("max_displacement = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(disp <= 1.0 / 32.0);
    assert!(summary.contains("status = ok"));
    for f in ["histogram.csv", "permutation.gprm", "manifest.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn failed_assertion_exits_nonzero_with_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let (code, err) = run(
        tmp.path(),
        "perturb",
        PERTURB,
        &["--out", out.to_str().unwrap(), "--set", "perturb.check_period=2"],
    );
    assert_eq!(code, 1);
    assert!(err.contains("fraction(2)"), "{err}");
    let summary = String::from_utf8(read(&out, "summary.txt")).unwrap();
    assert!(summary.contains("status = failed"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let (c1, e1) = run(tmp.path(), "recurrence", RECURRENCE, &["--out", a.to_str().unwrap(), "--threads", "1"]);
    let (c4, e4) = run(tmp.path(), "recurrence", RECURRENCE, &["--out", b.to_str().unwrap(), "--threads", "4"]);
    assert_eq!((c1, c4), (0, 0), "{e1}{e4}");
    for f in ["scores.csv", "window.csv", "summary.txt"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn invalid_values_fail_closed() {
    let mutations: &[(&str, &str)] = &[
        ("perturb.delta", "0.0001"),
        ("perturb.delta", "-1"),
        ("perturb.epsilon", "1.5"),
        ("perturb.check_fraction", "2"),
        ("system.level", "40"),
        ("system.alpha", "[0.1, 0.2, \"x\"]"),
        ("system.kind", "\"spiral\""),
        ("samples", "0"),
        ("threads", "0"),
        ("seed", "-3"),
        ("perturb.typo", "1"),
    ];
    let tmp = tempfile::tempdir().unwrap();
    for (i, (key, value)) in mutations.iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let set = format!("{key}={value}");
        let (code, err) = run(tmp.path(), "perturb", PERTURB, &["--out", out.to_str().unwrap(), "--set", &set]);
        assert_eq!(code, 2, "{set}: {err}");
        assert!(!out.exists(), "{set} left artifacts");
    }
}

#[test]
fn parse_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = PERTURB.replace("epsilon = 0.1", "epsilon = \"lots\"");
    let (code, err) = run(tmp.path(), "perturb", &bad, &["--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 9"), "{err}");
}

#[test]
fn scenario_key_must_match_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("scenario = \"hitting\"\n{PERTURB}");
    let (code, err) = run(tmp.path(), "perturb", &cfg, &["--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("scenario"), "{err}");
}

fn recipe(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

fn summary_value(dir: &Path, key: &str) -> String {
    let text = String::from_utf8(read(dir, "summary.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("no `{key}` in summary"))
}

#[test]
fn shipped_recipes_run_and_report_expected_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[(&str, &str, &str, fn(&str) -> bool)] = &[
        ("recurrence", "golden-recurrence.toml", "score.median", |v| (0.44..=0.48).contains(&v.parse::<f64>().unwrap())),
        ("perturb", "golden-perturb.toml", "fraction(64)", |v| v.parse::<f64>().unwrap() >= 0.9),
        ("hitting", "towerized-hitting.toml", "score.median", |v| v.parse::<f64>().unwrap() >= 0.5),
        ("correlations", "cat-correlations.toml", "verdict.p4", |v| v == "consistent-with-decay"),
        ("correlations", "towerized-correlations.toml", "verdict.p1", |v| v == "not-decaying"),
        ("dimension", "dimension.toml", "slope", |v| (v.parse::<f64>().unwrap() - 2.0).abs() <= 0.05),
        ("bc", "cat-bc.toml", "fraction", |v| v.parse::<f64>().unwrap() >= 0.99),
        ("mapdist", "mapdist.toml", "distance", |v| v.parse::<f64>().unwrap() < 0.03125),
    ];
    for (i, (sub, file, key, check)) in cases.iter().enumerate() {
        let out = tmp.path().join(format!("r{i}"));
        let (code, err) = run(tmp.path(), sub, &recipe(file), &["--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{file}: {err}");
        let v = summary_value(&out, key);
        assert!(check(&v), "{file}: {key} = {v}");
    }
}
