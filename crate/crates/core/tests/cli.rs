use std::path::Path;
use std::process::{Command, Output};

use stochflock::harness::sinks::{read_ndjson, Metadata, Record, ReportLine};

fn stochflock(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochflock"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STOCHFLOCK_OUT")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn metadata(dir: &Path) -> Record<Metadata> {
    read_ndjson(&dir.join("metadata.json")).unwrap().remove(0)
}

#[test]
fn verify_battery_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stochflock(&["verify"], tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn invalid_configuration_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--set", "scheme.h=-1"],
        vec!["run", "--set", "scheme.bogus=1"],
        vec!["run", "--set", "scheme.viscosity.mu=0"],
        vec!["run", "--config", "/nonexistent/config.toml"],
        vec!["sweep", "--axis", "eps", "--values", "0.1,-0.1"],
    ] {
        let o = stochflock(&args, tmp.path());
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn positivity_breach_exits_3_and_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("breach.toml");
    std::fs::write(
        &cfg,
        "[scheme]\neps = 0.0\nrho_floor = 0.05\n\n[initial.u]\nkind = \"compressive\"\namplitude = 400.0\nwavenumber = 1\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = stochflock(&["run", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3));
    let report: Vec<Record<ReportLine>> = read_ndjson(&out.join("report.ndjson")).unwrap();
    assert!(matches!(report[0].body, ReportLine::Breach { step: Some(1), .. }));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let files = ["metadata.json", "trajectory.ndjson", "report.ndjson", "summary.csv"];
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let o = stochflock(&["ensemble", "--paths", "8", "--seed", "5", "--threads", threads], &dir);
        assert!(o.status.success());
        runs.push(files.map(|f| read(&dir, f)));
    }
    for (i, f) in files.iter().enumerate() {
        assert!(runs[0][i] == runs[1][i], "{f} differs");
    }
}

#[test]
fn report_rerenders_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (src, dst) = (tmp.path().join("src"), tmp.path().join("dst"));
    assert!(stochflock(&["sweep", "--axis", "eps", "--values", "0.1,0.05"], &src)
        .status
        .success());
    let o = stochflock(&["report", "--from", src.to_str().unwrap()], &dst);
    assert!(o.status.success());
    assert_eq!(read(&src, "report.ndjson"), read(&dst, "report.ndjson"));
    assert_eq!(read(&src, "summary.csv"), read(&dst, "summary.csv"));
}

#[test]
fn config_hash_tracks_semantic_fields_only() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, extra: &[&str]| {
        let dir = tmp.path().join(name);
        let mut args = vec!["run"];
        args.extend_from_slice(extra);
        assert!(stochflock(&args, &dir).status.success());
        metadata(&dir)
    };
    let base = run("base", &[]);
    let moved = run("moved", &[]);
    let default_file = run(
        "file",
        &[
            "--config",
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml"),
        ],
    );
    let finer = run("finer", &["--set", "scheme.h=0.005"]);
    let reseeded = run("reseeded", &["--seed", "9"]);

    assert_eq!(base.header.config_hash, moved.header.config_hash);
    assert_eq!(base.header.config_hash, default_file.header.config_hash);
    assert_ne!(base.header.config_hash, finer.header.config_hash);
    assert_ne!(base.header.config_hash, reseeded.header.config_hash);
    assert_eq!(reseeded.header.seed, 9);
    assert!(base.body.noise_tail > 0.0);
    assert_eq!(base.header.schema_version, 1);
}

#[test]
fn particles_command_reports_alignment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = stochflock(&["particles", "--set", "particles.steps=40"], tmp.path());
    assert!(o.status.success());
    let report: Vec<Record<ReportLine>> = read_ndjson(&tmp.path().join("report.ndjson")).unwrap();
    let p = report
        .iter()
        .find_map(|r| match &r.body {
            ReportLine::Particles(p) => Some(p.clone()),
            _ => None,
        })
        .expect("particle summary");
    assert_eq!(p.steps, 40);
    assert!(p.variance_final < p.variance_initial);
    assert!(p.momentum_drift < 1e-12);
}
