use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kolab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolab"))
        .args(args)
        .current_dir(dir)
        .env_remove("KOLAB_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn assembles_and_runs_echo() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("echo.asm"), "mov out\n").unwrap();
    let asm = kolab(&["vm", "asm", "echo.asm"], dir.path());
    assert!(asm.status.success());
    let bits = stdout(&asm).trim().to_string();
    let run = kolab(
        &["vm", "run", "--program", &bits, "--input", "0110"],
        dir.path(),
    );
    assert!(stdout(&run).starts_with("halted 0110 in "));
    let starved = kolab(
        &[
            "--budget",
            "0",
            "vm",
            "run",
            "--program",
            &bits,
            "--input",
            "0110",
        ],
        dir.path(),
    );
    assert_eq!(stdout(&starved).trim(), "budget exceeded");
}

#[test]
fn budget_defaults_come_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kolab"))
        .args(["cx", "exact", "1"])
        .env("KOLAB_BUDGET", "77")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(stdout(&out).contains("\"budget\": 77"));
}

#[test]
fn profile_csv_has_the_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolab(&["profile", "0111", "--out", "p.csv"], dir.path());
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i,logsize,j,p,x,budget,maxlen"));
    assert_eq!(lines.count(), 5);
    // U is undefined on the empty index, so there is no profile to draw
    assert!(!kolab(&["profile", "-"], dir.path()).status.success());
}

#[test]
fn singleton_game_emits_six_verified_witnesses_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "game",
        "th1",
        "--list",
        "singleton",
        "--kmax",
        "6",
        "--stages",
        "16",
    ];
    let a = kolab(&[&args[..], &["--out", "a.json"]].concat(), dir.path());
    let b = kolab(&[&args[..], &["--out", "b.json"]].concat(), dir.path());
    assert!(a.status.success() && b.status.success());
    let ja = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(ja, fs::read(dir.path().join("b.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&ja).unwrap();
    assert_eq!(report["witnesses"].as_array().unwrap().len(), 6);
    assert_eq!(report["passed"], true);
    assert!(kolab(&["verify", "a.json"], dir.path()).status.success());
}

#[test]
fn invalid_kmax_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolab(&["game", "th1", "--kmax", "64"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kmax=64"));
}

#[test]
fn tampered_witness_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kolab(
        &["game", "th1", "--kmax", "3", "--list", "below:2", "--out", "w.json"],
        dir.path()
    )
    .status
    .success());
    let mut report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("w.json")).unwrap()).unwrap();
    report["witnesses"][2]["x"] = "111".into();
    fs::write(dir.path().join("bad.json"), report.to_string()).unwrap();
    let out = kolab(&["verify", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clause output failed"));
}

#[test]
fn config_file_runs_and_transcript_replays() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.toml"),
        "game = \"th1t\"\nkmax = 4\nstage_limit = 12\nlist = \"below:2\"\ntransport = true\n",
    )
    .unwrap();
    let run = kolab(
        &[
            "game",
            "th1t",
            "--config",
            "c.toml",
            "--out",
            "r.json",
            "--transcript",
            "t.txt",
        ],
        dir.path(),
    );
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(
        report["transported"]["witnesses"].as_array().unwrap().len(),
        4
    );
    assert!(
        kolab(&["replay", "t.txt", "--config", "c.toml"], dir.path())
            .status
            .success()
    );

    assert!(kolab(
        &[
            "game",
            "th1",
            "--kmax",
            "4",
            "--transcript",
            "u.txt",
            "--out",
            "u.json"
        ],
        dir.path()
    )
    .status
    .success());
    let replay = kolab(&["replay", "u.txt"], dir.path());
    assert!(replay.status.success());
    assert!(stdout(&replay).contains("reproduced"));
}

#[test]
fn constants_report_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolab(&["num", "constants"], dir.path());
    let c: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(c["c_smn"], 19);
    assert_eq!(c["log_rule"], "ceil(log2 k)");
}
