use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cartan_core::cli::{BATCH_HEADER, CSV_HEADER};
use serde_json::Value;
use tempfile::TempDir;

const CIRCLE: &str = r#"{"body": {"type": "disc", "radius": 1},
    "phi": [1, 0, 1, 0, 0], "T": 6.283185307179586, "nodes": 201}"#;

const SEPARATRIX: &str = r#"{"body": {"type": "polygon", "vertices": [[1,-1],[1,1],[-1,1],[-1,-1]]},
    "phi": [0, 1, 1, -0.5, 1], "T": 8, "nodes": 161,
    "dwell": [{"arrival": 1, "duration": 2.0}]}"#;

const ELLIPSE: &str = r#"{"body": {"type": "ellipse", "a": 2, "b": 1},
    "phi": [0.5, 0, 1, 0, 0.2], "T": 5, "nodes": 51}"#;

fn cartan(args: &[&str], dir: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cartan"));
    cmd.args(args).current_dir(dir);
    match threads {
        Some(n) => cmd.env("CARTAN_NUM_THREADS", n),
        None => cmd.env_remove("CARTAN_NUM_THREADS"),
    };
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
}

fn col(header: &str, name: &str) -> usize {
    header.split(',').position(|c| c == name).unwrap()
}

fn stderr_payload(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("payload {text:?}: {e}"))
}

#[test]
fn circle_run_closes_with_enclosed_area() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "circle.json", CIRCLE);
    let out = cartan(&["run", "--config", "circle.json", "--oracle"], dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("circle.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    let data = rows(&csv);
    assert_eq!(data.len(), 201);
    let last = data.last().unwrap();
    assert!((last[col(CSV_HEADER, "t")] - TAU).abs() < 1e-12);
    assert!(last[col(CSV_HEADER, "x")].abs() < 1e-6);
    assert!(last[col(CSV_HEADER, "y")].abs() < 1e-6);
    assert!((last[col(CSV_HEADER, "z")] - PI).abs() < 1e-6);

    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("circle.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["case"]["case"], "periodic");
    // The config next to the outputs is left alone.
    assert_eq!(fs::read_to_string(dir.path().join("circle.json")).unwrap(), CIRCLE);
    assert!((meta["period"].as_f64().unwrap() - TAU).abs() < 1e-6);
    assert!(meta["audits"]["oracle"].is_object());
    assert!(meta["audits"]["solver_vs_oracle"].as_f64().unwrap() < 1e-6);
}

#[test]
fn abnormal_along_y_is_a_straight_line() {
    let dir = TempDir::new().unwrap();
    write_config(
        dir.path(),
        "abn.json",
        r#"{"body": {"type": "disc", "radius": 1}, "phi": [0, 0, 0, 1, 0], "T": 3, "nodes": 31,
            "mode": {"kind": "abnormal", "s": 1, "pattern": "along_y"}}"#,
    );
    let out = cartan(&["run", "--config", "abn.json"], dir.path(), None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("abn.csv")).unwrap();
    let data = rows(&csv);
    let c = |n| col(CSV_HEADER, n);
    let (u1, u2) = (data[0][c("u1")], data[0][c("u2")]);
    assert!(u1.hypot(u2) > 0.5);
    for r in &data {
        let t = r[c("t")];
        assert!((r[c("x")] - u1 * t).abs() < 1e-12 && (r[c("y")] - u2 * t).abs() < 1e-12);
        for k in ["z", "v", "w"] {
            assert!(r[c(k)].abs() < 1e-12, "{k} = {}", r[c(k)]);
        }
        assert_eq!((r[c("u1")], r[c("u2")]), (u1, u2));
    }
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("abn.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["case"]["case"], "abnormal");
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("syntax.json", r#"{"body": {"type": "disc", "radius": 1}, "phi": [1, 0"#),
        ("unknown.json", r#"{"body": {"type": "disc", "radius": 1}, "phi": [1, 0, 1, 0, 0], "T": 1, "nodes": 3, "colour": 1}"#),
        ("short_phi.json", r#"{"body": {"type": "disc", "radius": 1}, "phi": [1, 0, 1], "T": 1, "nodes": 3}"#),
        ("off_polar.json", r#"{"body": {"type": "disc", "radius": 1}, "phi": [2, 0, 1, 0, 0], "T": 1, "nodes": 3}"#),
        ("bad_body.json", r#"{"body": {"type": "disc", "radius": -1}, "phi": [1, 0, 1, 0, 0], "T": 1, "nodes": 3}"#),
    ];
    for (name, text) in cases {
        write_config(dir.path(), name, text);
        let od = dir.path().join(format!("out_{name}"));
        let out = cartan(&["run", "--config", name, "--out-dir", od.to_str().unwrap()], dir.path(), None);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let payload = stderr_payload(&out);
        assert_eq!(payload["exit_code"], 2, "{name}");
        assert!(!od.exists() || fs::read_dir(&od).unwrap().next().is_none(), "{name} wrote outputs");
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = cartan(&["run", "--config", "absent.json"], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_payload(&out)["exit_code"], 1);
}

#[test]
fn oracle_stall_exits_3_with_payload() {
    let dir = TempDir::new().unwrap();
    // h = (1, 0) is an edge normal of the square: the control is not unique.
    write_config(
        dir.path(),
        "stall.json",
        r#"{"body": {"type": "polygon", "vertices": [[1,-1],[1,1],[-1,1],[-1,-1]]},
            "phi": [1, 0, 0, 0, 0], "T": 2, "nodes": 11}"#,
    );
    let out = cartan(&["run", "--config", "stall.json", "--oracle"], dir.path(), None);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let payload = stderr_payload(&out);
    assert_eq!(payload["exit_code"], 3);
    assert_eq!(payload["module"], "oracle");
    assert!(payload["message"].as_str().unwrap().len() > 0);
}

#[test]
fn svg_is_well_formed_with_three_panels() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "circle.json", CIRCLE);
    let out = cartan(&["run", "--config", "circle.json", "--svg"], dir.path(), None);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("circle.svg")).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let polylines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    // Trajectory and isoperimetrix, θ(t), U and U*.
    assert_eq!(polylines.len(), 5);
    for p in &polylines {
        let pts = p.attribute("points").unwrap();
        assert!(pts.split_whitespace().all(|xy| xy.split(',').all(|c| c.parse::<f64>().unwrap().is_finite())));
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "sep.json", SEPARATRIX);
    let mut seen = Vec::new();
    for (k, threads) in [None, Some("1"), Some("4")].into_iter().enumerate() {
        let od = format!("out{k}");
        let out = cartan(&["run", "--config", "sep.json", "--svg", "--out-dir", &od], dir.path(), threads);
        assert!(out.status.success());
        let read = |ext: &str| fs::read(dir.path().join(&od).join(format!("sep.{ext}"))).unwrap();
        seen.push((read("csv"), read("meta.json"), read("svg")));
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

fn summary_without_times(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(BATCH_HEADER));
    let wall = col(BATCH_HEADER, "wall_time_s");
    lines
        .map(|l| {
            let mut cells: Vec<&str> = l.split(',').collect();
            cells[wall] = "";
            cells.join(",")
        })
        .collect()
}

#[test]
fn batch_of_empty_directory() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("in")).unwrap();
    let out = cartan(&["batch", "--dir", "in", "--out", "summary.csv"], dir.path(), None);
    assert!(out.status.success());
    assert!(summary_without_times(&dir.path().join("summary.csv")).is_empty());
}

#[test]
fn batch_runs_every_config_in_order() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    write_config(&input, "b_sep.json", SEPARATRIX);
    write_config(&input, "a_circle.json", CIRCLE);
    write_config(&input, "c_ellipse.json", ELLIPSE);
    fs::write(input.join("notes.txt"), "not a config").unwrap();

    let mut summaries = Vec::new();
    for threads in ["1", "3"] {
        let out = cartan(&["batch", "--dir", "in", "--out", &format!("s{threads}/summary.csv")], dir.path(), Some(threads));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let s = dir.path().join(format!("s{threads}"));
        let lines = summary_without_times(&s.join("summary.csv"));
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("\"a_circle.json\",ok,periodic,"));
        assert!(lines[1].starts_with("\"b_sep.json\",ok,separatrix,"));
        assert!(lines[2].starts_with("\"c_ellipse.json\",ok,"));
        for stem in ["a_circle", "b_sep", "c_ellipse"] {
            assert!(s.join(format!("{stem}.csv")).is_file() && s.join(format!("{stem}.meta.json")).is_file());
        }
        summaries.push((lines, fs::read(s.join("b_sep.csv")).unwrap()));
    }
    assert_eq!(summaries[0], summaries[1]);
}

#[test]
fn batch_reports_failures_and_continues() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    write_config(&input, "a.json", CIRCLE);
    write_config(&input, "b.json", r#"{"body": {"type": "disc", "radius": 1}, "phi": [3, 0, 1, 0, 0], "T": 1, "nodes": 3}"#);
    write_config(&input, "c.json", ELLIPSE);
    let out = cartan(&["batch", "--dir", "in", "--out", "summary.csv"], dir.path(), Some("2"));
    assert_eq!(out.status.code(), Some(1));
    let lines = summary_without_times(&dir.path().join("summary.csv"));
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("\"a.json\",ok,"));
    assert!(lines[1].starts_with("\"b.json\",failed,,,,2,"), "{}", lines[1]);
    assert!(lines[2].starts_with("\"c.json\",ok,"));
    assert!(dir.path().join("a.csv").is_file() && dir.path().join("c.csv").is_file());
    assert!(!dir.path().join("b.csv").exists());
}

#[test]
fn batch_in_place_skips_its_own_metadata() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "circle.json", CIRCLE);
    write_config(dir.path(), "ellipse.json", ELLIPSE);
    for _ in 0..2 {
        let out = cartan(&["batch", "--dir", ".", "--out", "summary.csv"], dir.path(), None);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(summary_without_times(&dir.path().join("summary.csv")).len(), 2);
    }
    assert_eq!(fs::read_to_string(dir.path().join("circle.json")).unwrap(), CIRCLE);
}

#[test]
fn output_names_may_not_overwrite_the_config() {
    let dir = TempDir::new().unwrap();
    let text = r#"{"body": {"type": "disc", "radius": 1}, "phi": [1, 0, 1, 0, 0], "T": 1, "nodes": 3,
        "outputs": {"json": "self.json"}}"#;
    write_config(dir.path(), "self.json", text);
    let out = cartan(&["run", "--config", "self.json"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read_to_string(dir.path().join("self.json")).unwrap(), text);
    assert!(!dir.path().join("self.csv").exists());
}
