use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use openbox::scene::{read_annotations, write_annotations};
use serde_json::Value;

fn openbox(args: &[&str]) -> Output {
    openbox_env(args, &[])
}

fn openbox_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_openbox"));
    cmd.args(args).env_remove("OPENBOX_CONFIG").env_remove("OPENBOX_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn empty_scene(root: &Path) -> PathBuf {
    let scene = root.join("empty");
    fs::create_dir_all(scene.join("frames")).unwrap();
    scene
}

fn effective(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("effective_config.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_scene_succeeds_with_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let scene = empty_scene(dir.path());
    let out = dir.path().join("out");
    let o = openbox(&["annotate", "--scene", s(&scene), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read_annotations(&out.join("annotations.json")).unwrap().is_empty());
    assert!(out.join("report.json").is_file());
}

#[test]
fn missing_scene_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = openbox(&["annotate", "--scene", s(&dir.path().join("nope")), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error:"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let scene = empty_scene(dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"cluster_eps": 0.5, "vote_tau": 0.2}"#).unwrap();
    let out = dir.path().join("out");
    let o = openbox(&[
        "annotate",
        "--scene",
        s(&scene),
        "--out",
        s(&out),
        "--config",
        s(&cfg),
        "--set",
        "cluster_eps=0.9",
        "--seed",
        "17",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let e = effective(&out);
    assert_eq!(e["cluster_eps"], 0.9);
    assert_eq!(e["vote_tau"], 0.2);
    assert_eq!(e["seed"], 17);
    assert_eq!(e["refine_alpha"], 0.3);
}

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scene = empty_scene(dir.path());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"refine_beta": 0.25}"#).unwrap();
    let out = dir.path().join("out");
    let o = openbox_env(&["annotate", "--scene", s(&scene), "--out", s(&out)], &[("OPENBOX_CONFIG", &cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(effective(&out)["refine_beta"], 0.25);
}

#[test]
fn unknown_config_keys_fail() {
    let dir = tempfile::tempdir().unwrap();
    let scene = empty_scene(dir.path());
    let out = dir.path().join("out");
    let o = openbox(&["annotate", "--scene", s(&scene), "--out", s(&out), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"clusterEps": 0.5}"#).unwrap();
    let o = openbox(&["annotate", "--scene", s(&scene), "--out", s(&out), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_config_value_fails() {
    let dir = tempfile::tempdir().unwrap();
    let scene = empty_scene(dir.path());
    let o = openbox(&["annotate", "--scene", s(&scene), "--out", s(&dir.path().join("o")), "--set", "vote_tau=-1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_lists_every_config_key() {
    let o = openbox(&["annotate", "--help"]);
    assert!(o.status.success());
    let help = String::from_utf8_lossy(&o.stdout);
    let defaults: Value = serde_json::from_str(&openbox::config::PipelineConfig::default().to_json()).unwrap();
    for key in defaults.as_object().unwrap().keys() {
        assert!(help.contains(key.as_str()), "help does not mention {key}");
    }
}

#[test]
fn synth_eval_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let o = openbox(&["synth", "--preset", "car-before-wall", "--seed", "3", "--out", s(&scene)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let check = openbox(&["check", "--scene", s(&scene)]);
    assert!(check.status.success(), "{}", stderr(&check));

    // Truth scored against itself is perfect.
    let truth = scene.join("truth").join("annotations.json");
    let out = dir.path().join("eval");
    let o = openbox(&[
        "eval",
        "--pred",
        s(&truth),
        "--reference",
        s(&truth),
        "--scene",
        s(&scene),
        "--out",
        s(&out),
        "--threshold",
        "0.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("eval_report.json")).unwrap()).unwrap();
    let first = &report["cells"][0];
    assert_eq!(first["ap"], 1.0, "{report}");
    assert!(fs::read_to_string(out.join("eval_curves.csv")).unwrap().starts_with("class_label,"));

    // A prediction on a frame the reference does not have is an error.
    let mut shifted = read_annotations(&truth).unwrap();
    shifted[0].frame = 999;
    let bad = dir.path().join("bad.json");
    write_annotations(&shifted, &bad).unwrap();
    let o = openbox(&["eval", "--pred", s(&bad), "--reference", s(&truth), "--out", s(&dir.path().join("e2"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("999"), "{}", stderr(&o));

    let flat = dir.path().join("boxes.txt");
    let o = openbox(&["export", "--annotations", s(&truth), "--out", s(&flat)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = fs::read_to_string(&flat).unwrap().lines().count();
    assert_eq!(lines, read_annotations(&truth).unwrap().len());

    let o = openbox(&["export", "--annotations", s(&truth), "--format", "kitti", "--out", s(&flat)]);
    assert_eq!(o.status.code(), Some(1));
}
