use std::path::Path;
use std::process::{Command, Output};

fn panoseld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panoseld"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixtures() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

#[test]
fn reference_scored_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixtures().join("metadata/trio.csv");
    let report = dir.path().join("out.json");
    let out = panoseld(&[
        "score",
        "--ref",
        f.to_str().unwrap(),
        "--pred",
        f.to_str().unwrap(),
        "--threshold",
        "20",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("headline: ER 0.00 (micro) | F 100.0% LE 0.00 LR 100.0%"),
        "{text}"
    );
    assert!(text.contains("clapping"));
    let json = std::fs::read_to_string(report).unwrap();
    assert!(json.contains("\"threshold_deg\": 20.0"));
}

#[test]
fn missing_prediction_names_the_path() {
    let f = fixtures().join("metadata/trio.csv");
    let out = panoseld(&[
        "score",
        "--ref",
        f.to_str().unwrap(),
        "--pred",
        "/no/such/pred.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/pred.csv"));
}

#[test]
fn unmatched_stem_warns_and_scores_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let (r, p) = (dir.path().join("ref"), dir.path().join("pred"));
    std::fs::create_dir_all(&r).unwrap();
    std::fs::create_dir_all(&p).unwrap();
    std::fs::write(r.join("a.csv"), "0,0,0,10,0\n").unwrap();
    std::fs::write(r.join("b.csv"), "0,1,0,10,0\n").unwrap();
    std::fs::write(p.join("a.csv"), "0,0,0,10,0\n").unwrap();
    let out = panoseld(&[
        "score",
        "--ref",
        r.to_str().unwrap(),
        "--pred",
        p.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(
        stderr(&out).contains("no prediction for reference b"),
        "{}",
        stderr(&out)
    );
    assert!(stdout(&out).contains("headline: ER 0.00"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let out = panoseld(&["generate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = panoseld(&["generate", "--config", "/no/such/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/config.toml"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "workers = 1\n").unwrap();
    let out = panoseld(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--workers",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_shipped_fixtures_in_marker_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let meta = fixtures().join("metadata");
    std::fs::write(
        &cfg,
        format!(
            "metadata_dir = {:?}\nmin_duration_frames = 0\n",
            meta.to_str().unwrap()
        ),
    )
    .unwrap();
    let report = dir.path().join("verify.json");
    let out = panoseld(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("alignment: ok"));
    assert!(report.exists());
}

#[test]
fn generate_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("metadata");
    std::fs::create_dir_all(&meta).unwrap();
    std::fs::write(meta.join("good.csv"), "0,0,0,10,0\n").unwrap();
    std::fs::write(meta.join("bad.csv"), "0,0,0,10\n").unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "output_format = \"png\"\nmin_duration_frames = 0\nwidth = 192\nheight = 96\ntile_size = 20\n",
    )
    .unwrap();
    let out = panoseld(&[
        "generate",
        "--config",
        cfg.to_str().unwrap(),
        "--marker-mode",
        "--fps",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("clip=good status=ok frames=1"), "{text}");
    assert!(text.contains("clip=bad status=failed"));
    assert!(dir.path().join("out/good/frame_000000.png").exists());
    assert!(dir.path().join("out/good.json").exists());
}
