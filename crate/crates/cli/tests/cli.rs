use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sizegate(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sizegate"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_body(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

/// A small synthetic dataset written by the CLI itself.
fn fixture(dir: &Path) {
    let out = sizegate(&["synth", "fx", "--regions", "40", "--classes", "6", "--seed", "3"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn eval_reproduces_the_expected_report() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path());
    let out = sizegate(&["eval", "--config", "fx/config.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("Method"));

    let got: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("fx/out/report.json")).unwrap()).unwrap();
    let want: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fx/expected_report.json")).unwrap()).unwrap();
    assert_eq!(got["cells"].as_array().unwrap().len(), 16);
    assert_eq!(got, want);
    assert!(tmp.path().join("fx/out/report.txt").exists());
}

#[test]
fn eval_subset_gives_one_cell_plus_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path());
    let out = sizegate(
        &["eval", "--config", "fx/config.toml", "--modes", "area", "--regimes", "auto"],
        tmp.path(),
    );
    assert!(out.status.success());
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fx/out/report.json")).unwrap()).unwrap();
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[0]["method"], "ML baseline");
    assert_eq!(cells[1]["mode"], "area");
    assert_eq!(cells[1]["regime"], "auto_gate");
}

#[test]
fn reports_do_not_depend_on_job_count() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path());
    let run = |jobs: &str| {
        let out = sizegate(&["eval", "--config", "fx/config.toml", "--jobs", jobs], tmp.path());
        assert!(out.status.success());
        fs::read(tmp.path().join("fx/out/report.json")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn validate_passes_through_regions_without_crops() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::copy(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/illustrative_kb.json"),
        dir.join("kb.json"),
    )
    .unwrap();
    let line = r#"{"region_id":"r1","bbox2d":[0,0,40,60],"ranking":[{"class":"mug","score":0.1},{"class":"book","score":0.2}]}"#;
    fs::write(dir.join("rankings.jsonl"), format!("{line}\n")).unwrap();
    fs::write(dir.join("c.toml"), "kb = \"kb.json\"\nrankings = \"rankings.jsonl\"\n").unwrap();

    let out = sizegate(
        &["validate", "--config", "c.toml", "--regime", "all", "--trace", "trace.jsonl"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let corrected: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let original: Value = serde_json::from_str(line).unwrap();
    assert_eq!(corrected["ranking"], original["ranking"]);

    let trace: Value = serde_json::from_str(fs::read_to_string(dir.join("trace.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(trace["validated"], false);
    assert_eq!(trace["skipped"], "missing_depth_crop");
}

#[test]
fn missing_kb_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "kb = \"nope.json\"\nrankings = \"r.jsonl\"\n").unwrap();
    let out = sizegate(&["eval", "--config", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let body = error_body(&out);
    assert_eq!(body["error"]["kind"], "config");
    assert_eq!(body["error"]["exit_code"], 3);
    assert!(body["error"]["message"].as_str().unwrap().contains("nope.json"));

    // no kb configured at all
    fs::write(tmp.path().join("c.toml"), "").unwrap();
    let out = sizegate(&["validate", "--config", "c.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn module_errors_get_their_own_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("kb.json"), "[]").unwrap();
    fs::write(dir.join("c.toml"), "kb = \"kb.json\"\nrankings = \"r.jsonl\"\n").unwrap();
    let kb = sizegate(&["validate", "--config", "c.toml"], dir);

    fs::copy(
        concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/illustrative_kb.json"),
        dir.join("kb.json"),
    )
    .unwrap();
    fs::write(dir.join("r.jsonl"), "{not json}\n").unwrap();
    let ingest = sizegate(&["validate", "--config", "c.toml"], dir);

    let quantize = sizegate(&["quantize", "--dims", "-1,0.1,0.1", "--bbox", "10,10"], dir);

    let codes: Vec<Option<i32>> = [&kb, &ingest, &quantize].iter().map(|o| o.status.code()).collect();
    assert_eq!(codes, [Some(4), Some(5), Some(7)]);
    assert_eq!(error_body(&kb)["error"]["kind"], "knowledge_base");
    assert_eq!(error_body(&ingest)["error"]["kind"], "ingest");
}

#[test]
fn print_config_shows_defaults_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sizegate"))
        .arg("--print-config")
        .env("SIZEGATE_TOP_K", "7")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    for needle in [
        "epsilon = 0.04",
        "min_count_i = 3",
        "top_k = 7",
        "area_thresholds = [0.007, 0.05, 0.35, 0.79]",
        "depth_thresholds = [0.1, 0.2, 0.4]",
        "ar_threshold = 1.4",
        "mu = 0.2",
    ] {
        assert!(text.contains(needle), "missing `{needle}` in:\n{text}");
    }

    let bad = Command::new(env!("CARGO_BIN_EXE_sizegate"))
        .arg("--print-config")
        .env("SIZEGATE_EPSILOM", "0.1")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn quantize_worked_example() {
    let tmp = tempfile::tempdir().unwrap();
    // 0.06 x 0.1 front face = 0.006 m²
    let out = sizegate(&["quantize", "--dims", "0.05,0.06,0.1", "--bbox", "100,140"], tmp.path());
    assert!(out.status.success());
    let obs: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(obs["area_bin"], "XS");
    assert_eq!(obs["depth_bin"], "flat");
    assert_eq!(obs["ar_bin"], "ttw");
}

#[test]
fn estimate_reads_a_crop() {
    let tmp = tempfile::tempdir().unwrap();
    fixture(tmp.path());
    let rankings = fs::read_to_string(tmp.path().join("fx/rankings.jsonl")).unwrap();
    let first: Value = serde_json::from_str(rankings.lines().next().unwrap()).unwrap();
    let px = |i: usize| first["bbox2d"][i].as_f64().unwrap() as u32;
    let origin = format!("{},{}", px(0), px(1));
    let crop = format!("fx/{}", first["depth_crop"].as_str().unwrap());
    let out = sizegate(&["estimate", &crop, "--origin", &origin], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dims: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let depth = dims["depth_m"].as_f64().unwrap();
    let others: Vec<f64> = dims["other_m"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(depth > 0.0 && others.iter().all(|&o| o >= depth));
}

#[test]
fn match_depth_example_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("rgb.csv"), "frame_id,timestamp\na,1.0\nb,2.0\n").unwrap();
    fs::write(dir.join("depth.csv"), "frame_id,timestamp\nd1,1.15\nd2,2.30\n").unwrap();
    let out = sizegate(&["match-depth", "rgb.csv", "depth.csv"], dir);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "rgb_frame,depth_frame\na,d1\nb,\n");
}
