use std::process::Command;

fn hyra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyra"))
}

const TINY: &str = "slots = 3\nsamples = 1\nseeds = [1]\n\n[[slices]]\nue_count = 2\ndelay_budget_ms = 1.0\n\n[[slices]]\nue_count = 1\ndelay_budget_ms = 2.0\n";

#[test]
fn verify_exits_zero() {
    let out = hyra().args(["verify", "--trials", "200", "--seed", "7"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().count() >= 10 && !text.contains("FAIL"));
}

#[test]
fn schedule_prints_split_and_levels() {
    let out = hyra().args(["schedule", "--etas", "2,1,4,3", "--slices", "0,0,1,1", "--dedicated", "0,0", "--shared", "4"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("ue slice eta y_ded y_sh total"));
    assert!(text.contains("shared level"));
    // stage one is empty with no dedicated budget
    for line in text.lines().skip(1).take(4) {
        assert_eq!(line.split_whitespace().nth(3), Some("0.000000"), "{line}");
    }
}

#[test]
fn export_mip_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let lp = dir.path().join("m.lp");
    let out = hyra().args(["export-mip", "--kind", "hyra", "--config"]).arg(&cfg).arg("--out").arg(&lp).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(lp.exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("re-parse ok"));
}

#[test]
fn run_writes_tables_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let res = dir.path().join("res");
    let out = hyra().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&res).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "per_seed.csv", "resolved_config.toml"] {
        assert!(res.join(f).exists(), "{f}");
    }
}

#[test]
fn bad_config_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, TINY.replace("ue_count = 1", "ue_count = 0")).unwrap();
    let out = hyra().arg("optimize").arg("--config").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("slices[1].ue_count"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = hyra().args(["optimize", "--bogus"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}
