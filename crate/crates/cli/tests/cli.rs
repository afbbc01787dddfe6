use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

/// Keeps the end-to-end runs short.
const FAST: [&str; 6] = [
    "--set",
    "svm.repeats=5",
    "--set",
    "mvar.max_order=3",
    "--set",
    "synth.epochs_per_class=12",
];

fn mipdc(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mipdc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn mipdc")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn synth(tmp: &TempDir) -> PathBuf {
    let out = tmp.path().join("synth");
    let o = mipdc(&[&["synth"][..], &FAST].concat(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn missing_input_is_an_io_failure_and_leaves_nothing() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = mipdc(&["power", "--set", "input.signal=/nonexistent/rec.csv"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[load]"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn configuration_errors_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = mipdc(&["all", "--set", "svm.kernel=linear"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("svm.kernel"));

    let o = mipdc(&["all", "--config", "/nonexistent/mipdc.ini"], &out);
    assert_eq!(o.status.code(), Some(2));

    let o = mipdc(&["all", "--set", "screen.alpha=0"], &out);
    assert_eq!(o.status.code(), Some(1));

    let o = mipdc(&["frobnicate"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn unstable_synthetic_model_is_rejected_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = mipdc(&["synth", "--set", "synth.class1_edges=CZ>C4:1:2;C4>CZ:1:2"], &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[synth]"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn existing_output_directory_survives_a_failed_run() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let o = mipdc(&["power", "--set", "input.signal=/nonexistent/rec.csv"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(read_dir(&out), vec![("keep.txt".to_string(), b"x".to_vec())]);
}

#[test]
fn synthetic_dataset_round_trips_through_the_input_path() {
    let tmp = TempDir::new().unwrap();
    let data = synth(&tmp);
    let header = fs::read_to_string(data.join("synth.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 16);
    assert!(header.contains("CZ") && header.contains("C4"));
    let events = fs::read_to_string(data.join("synth.events.csv")).unwrap();
    assert_eq!(events.lines().count(), 1 + 24);

    let truth: serde_json::Value = serde_json::from_slice(&fs::read(data.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["classes"].as_array().unwrap().len(), 2);

    let other = TempDir::new().unwrap();
    let again = synth(&other);
    assert_eq!(
        fs::read(data.join("synth.csv")).unwrap(),
        fs::read(again.join("synth.csv")).unwrap()
    );

    let out = tmp.path().join("power");
    let signal = format!("input.signal={}", data.join("synth.csv").display());
    let o = mipdc(&["power", "--set", &signal, "--set", "svm.repeats=5"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["data"]["channels"].as_array().unwrap().len(), 16);
    assert_eq!(report["data"]["epochs_class1"], 12);
    assert_eq!(report["data"]["epochs_class2"], 12);
    assert_eq!(report["power"]["feature"]["channel_name"], "P4");
    assert!(report["synth"].is_null() && report["connectivity"].is_null());
}

#[test]
fn unit_alpha_lists_every_directed_pair() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = mipdc(
        &[&["connectivity", "--set", "screen.alpha=1"][..], &FAST].concat(),
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for band in ["alpha", "beta"] {
        let csv = fs::read_to_string(out.join(format!("edges_{band}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 16 * 15, "{band}");
        assert!(csv.starts_with("from,to,band_low,band_high,p_value,predominant\n"));
    }
}

#[test]
fn all_writes_well_formed_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = mipdc(&[&["all"][..], &FAST].concat(), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let files = read_dir(&out);
    let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
    for expected in [
        "report.json",
        "synth.csv",
        "ground_truth.json",
        "rsq_map.csv",
        "rsq_map.svg",
        "edges_alpha.csv",
        "flows_beta_class2.csv",
        "flows_beta.svg",
    ] {
        assert!(names.contains(&expected), "missing {expected} in {names:?}");
    }
    assert!(!names.iter().any(|n| n.starts_with(".mipdc-staging")));
    for (name, bytes) in &files {
        if name.ends_with(".svg") {
            let text = std::str::from_utf8(bytes).unwrap();
            let doc = roxmltree::Document::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(doc.root_element().tag_name().name(), "svg");
        }
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let listed: Vec<&str> = report["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(listed_sorted, names);
    let rsq = fs::read_to_string(out.join("rsq_map.csv")).unwrap();
    assert_eq!(rsq.lines().count(), 1 + 16);
}

#[test]
fn embedded_config_reproduces_the_report() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let o = mipdc(&[&["all", "--seed", "3"][..], &FAST].concat(), &first);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read(first.join("report.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_slice(&report).unwrap();

    let mut ini = String::new();
    for (k, v) in parsed["config"].as_object().unwrap() {
        ini.push_str(&format!("{k} = {}\n", v.as_str().unwrap()));
    }
    let config = tmp.path().join("replay.ini");
    fs::write(&config, ini).unwrap();
    let second = tmp.path().join("second");
    let o = mipdc(&["all", "--jobs", "2", "--config", config.to_str().unwrap()], &second);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_dir(&first), read_dir(&second));
}

#[test]
fn defaults_prints_a_loadable_config() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mipdc"))
        .arg("defaults")
        .output()
        .unwrap();
    assert!(o.status.success());
    let path = tmp.path().join("defaults.ini");
    fs::write(&path, &o.stdout).unwrap();
    let out = tmp.path().join("out");
    let o = mipdc(
        &[&["synth", "--config", path.to_str().unwrap()][..], &FAST].concat(),
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}
