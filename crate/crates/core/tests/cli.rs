use std::process::Command;

fn agfem(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_agfem"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("agfem-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn selftest_passes() {
    let out = agfem(&["selftest", "--levels", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("selftest dim=2 m=3"));
}

#[test]
fn convergence_writes_csv_from_config_file() {
    let config = scratch("run.cfg");
    let csv = scratch("conv.csv");
    std::fs::write(&config, "levels = 3..4\nextension = standard\n").unwrap();
    let out = agfem(&[
        "convergence",
        "--config",
        config.to_str().unwrap(),
        "--stabilization",
        "alg2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("slopes"));
}

#[test]
fn bad_flags_fail_cleanly() {
    let out = agfem(&["convergence", "--space", "bogus", "--levels", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = agfem(&["convergence", "--geometry", "teapot", "--levels", "3"]);
    assert!(!out.status.success());
}

#[test]
fn demo_writes_vtk() {
    let vtk = scratch("demo.vtk");
    let out = agfem(&[
        "demo",
        "--geometry",
        "halfspace",
        "--levels",
        "3",
        "--out",
        vtk.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(std::fs::read_to_string(&vtk)
        .unwrap()
        .starts_with("# vtk DataFile"));
}
