use std::process::Command;

fn ffrsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ffrsim")).args(args).output().unwrap()
}

fn small_config(dir: &std::path::Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "defaults = \"paper\"\nnum_site_rows = 2\nnum_site_cols = 3\nfemtos_per_cell = 2\nmacro_ues_per_cell = 6\niterations = 10\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn verify_prints_counts() {
    let out = ffrsim(&["verify", "--instances", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "100/100 pareto pass, 100/100 kkt pass");
}

#[test]
fn zero_drops_is_a_usage_error() {
    assert_eq!(ffrsim(&["run", "--drops", "0"]).status.code(), Some(2));
}

#[test]
fn unknown_flags_and_modes_are_usage_errors() {
    let out = ffrsim(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(ffrsim(&["run", "--modes", "subband,nope"]).status.code(), Some(2));
    assert_eq!(ffrsim(&["run", "--direction", "sideways"]).status.code(), Some(2));
}

#[test]
fn run_then_compare_with_itself() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = ffrsim(&[
        "run", "--config", &cfg, "--drops", "2", "--seed", "3", "--modes", "subband,orthog", "--direction", "ul",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("cdf_orthog_ul.csv").exists());
    assert!(!out_dir.join("cdf_subband_dl.csv").exists());
    let summary = out_dir.join("summary.json");
    let s = summary.to_str().unwrap();
    let cmp = ffrsim(&["compare", s, s]);
    assert_eq!(cmp.status.code(), Some(0));
    let text = String::from_utf8_lossy(&cmp.stdout);
    let deltas: Vec<&str> = text.lines().skip(1).map(|l| l.split_whitespace().last().unwrap()).collect();
    assert!(!deltas.is_empty());
    assert!(deltas.iter().all(|d| d.parse::<f64>().unwrap() == 0.0), "{text}");
}

#[test]
fn trace_writes_one_file_per_direction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = ffrsim(&["trace", "--config", &cfg, "--drop", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for d in ["dl", "ul"] {
        let text = std::fs::read_to_string(dir.path().join(format!("trace_1_{d}.csv"))).unwrap();
        assert!(text.starts_with("iter,receiver,subband,q_db,target_db,s"));
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn missing_report_fails() {
    assert_ne!(ffrsim(&["compare", "/nonexistent/a.json", "/nonexistent/b.json"]).status.code(), Some(0));
}
