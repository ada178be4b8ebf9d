use std::path::Path;
use std::process::Command;

fn devopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_devopt"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = "\
problem = huber_tv
size = 16
angles = 16
iters = 20
test_problems = 2
reference_budget = 1000
";

#[test]
fn run_writes_curves_and_export_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}solvers = gd, nesterov, random\n"));
    let out = dir.path().join("out");
    let st = devopt().arg("run").arg(&cfg).arg("--out").arg(&out).env_remove("DEVOPT_OUT_DIR").output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let stdout = String::from_utf8_lossy(&st.stdout);
    assert!(stdout.contains("certificate checks: 38 passed, 0 failed"), "{stdout}");
    for f in ["gd.csv", "nesterov.csv", "random.csv", "manifest.json", "trace.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // the env var wins over the flag
    let env_out = dir.path().join("from-env");
    let st = devopt()
        .arg("export")
        .arg(out.join("trace.json"))
        .arg("--out")
        .arg(dir.path().join("ignored"))
        .env("DEVOPT_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert!(st.status.success());
    assert!(!dir.path().join("ignored").exists());
    for f in ["gd.csv", "nesterov.csv", "random.csv", "manifest.json"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(env_out.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_then_verify_with_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}solvers = gd, learned\ntrain_steps = 2\n"));
    let params = dir.path().join("nets.params");
    let st = devopt().arg("train").arg(&cfg).arg("--output").arg(&params).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let header = std::fs::read(&params).unwrap();
    assert!(header.starts_with(b"devopt-params v1 kind=smooth"));

    let st = devopt().arg("verify").arg(&cfg).arg("--checkpoint").arg(&params).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(String::from_utf8_lossy(&st.stdout).contains("certificate checks: 38 passed, 0 failed"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eps = 2\n");
    let st = devopt().arg("verify").arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("eps"));
    let st = devopt().arg("verify").arg(dir.path().join("absent.cfg")).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}
