//! End-to-end runs of the `anticipate` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const SMALL: &[&str] = &[
    "--set",
    "synth.videos=3",
    "--set",
    "synth.min_frames=40",
    "--set",
    "synth.max_frames=50",
    "--set",
    "model.gc_channels=6",
    "--set",
    "model.tcn_channels=6",
    "--set",
    "model.tcn_layers=4",
    "--set",
    "train.epochs=2",
    "--set",
    "split.test=synth003",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_anticipate"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn anticipate")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    det: PathBuf,
    ann: PathBuf,
    root: PathBuf,
}

fn workspace() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let det = root.join("det.csv");
    let ann = root.join("ann.csv");
    let mut args = vec!["synth", "--out-detections", s(&det), "--out-annotations", s(&ann)];
    args.extend_from_slice(SMALL);
    ok(&args);
    Workspace { _dir: dir, det, ann, root }
}

fn train(w: &Workspace, name: &str) -> PathBuf {
    let ck = w.root.join(name);
    let mut args = vec![
        "train",
        "--detections",
        s(&w.det),
        "--annotations",
        s(&w.ann),
        "--checkpoint",
        s(&ck),
        "--seed",
        "7",
    ];
    args.extend_from_slice(SMALL);
    ok(&args);
    ck
}

#[test]
fn train_is_reproducible_and_evaluate_writes_report() {
    let w = workspace();
    let a = train(&w, "a.ckpt");
    let b = train(&w, "b.ckpt");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let mut args = vec![
        "evaluate",
        "--detections",
        s(&w.det),
        "--annotations",
        s(&w.ann),
        "--checkpoint",
        s(&a),
    ];
    args.extend_from_slice(SMALL);
    let report = String::from_utf8(ok(&args).stdout).unwrap();
    assert_eq!(report.lines().next().unwrap(), "task,class,horizon,metric,value,n_frames");
    assert!(report.contains("instrument,mean,2,inMAE,"));
    // Everything but the wall-clock latency row must repeat exactly.
    let metrics = |r: &str| -> Vec<String> {
        r.lines().filter(|l| !l.contains(",latency_s,")).map(String::from).collect()
    };
    let again = String::from_utf8(ok(&args).stdout).unwrap();
    assert_eq!(metrics(&report), metrics(&again));
    assert!(report.contains("instrument,all,all,latency_s,"));
}

#[test]
fn evaluate_without_checkpoint_is_usage_error() {
    let out = run(&["evaluate", "--detections", "d.csv", "--annotations", "a.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_input_file_is_io_error() {
    let out = run(&[
        "evaluate",
        "--detections",
        "/nonexistent/d.csv",
        "--annotations",
        "/nonexistent/a.csv",
        "--checkpoint",
        "/nonexistent/m.ckpt",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_is_rejected() {
    let out = run(&["synth", "--out-detections", "d", "--out-annotations", "a", "--set", "model.depth=3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.depth"));
}

#[test]
fn help_enumerates_config_keys() {
    let out = ok(&["train", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["model.horizons", "loss.alpha", "train.learning_rate", "split.test"] {
        assert!(text.contains(key), "{key} missing from help");
    }
}

#[test]
fn stream_answers_every_frame() {
    let w = workspace();
    let ck = train(&w, "m.ckpt");
    let det = std::fs::read_to_string(&w.det).unwrap();
    let lines: Vec<&str> = det.lines().skip(1).filter(|l| l.starts_with("synth001,")).collect();
    let last_frame: usize = lines.iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).max().unwrap();

    let mut child = bin()
        .args(["infer", "--stream", "--checkpoint", s(&ck)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        let mut stdin = child.stdin.take().unwrap();
        for l in &lines {
            writeln!(stdin, "{l}").unwrap();
        }
    }
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = text.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    assert_eq!(&header[..3], &["video_id", "frame", "latency_s"]);
    assert_eq!(header.len(), 3 + 3 * 5);
    let rows: Vec<Vec<&str>> = rows.map(|r| r.split(',').collect()).collect();
    assert_eq!(rows.len(), last_frame);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[1].parse::<usize>().unwrap(), i + 1);
        assert!(r[2].parse::<f64>().unwrap() <= 0.030);
        for (k, v) in r[3..].iter().enumerate() {
            let h = [2.0, 3.0, 5.0][k / 5];
            let v: f64 = v.parse().unwrap();
            assert!(v >= 0.0 && v <= h);
        }
    }
}

#[test]
fn batch_infer_matches_stream() {
    let w = workspace();
    let ck = train(&w, "m.ckpt");
    let out_path = w.root.join("pred.csv");
    ok(&["infer", "--checkpoint", s(&ck), "--detections", s(&w.det), "--out", s(&out_path)]);
    let batch = std::fs::read_to_string(&out_path).unwrap();

    let mut child = bin()
        .args(["infer", "--stream", "--checkpoint", s(&ck)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&std::fs::read(&w.det).unwrap()).unwrap();
    let streamed = String::from_utf8(child.wait_with_output().unwrap().stdout).unwrap();

    // Drop the timing column before comparing.
    let strip = |t: &str| -> Vec<String> {
        t.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(2);
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip(&batch), strip(&streamed));
}

#[test]
fn plot_data_has_one_row_per_frame_class_horizon() {
    let w = workspace();
    let ck = train(&w, "m.ckpt");
    let out = w.root.join("plot.csv");
    let mut args = vec![
        "plot-data",
        "--detections",
        s(&w.det),
        "--annotations",
        s(&w.ann),
        "--checkpoint",
        s(&ck),
        "--out",
        s(&out),
    ];
    args.extend_from_slice(SMALL);
    ok(&args);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "video_id,frame,class,horizon,gt,pred");
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert_eq!(rows.len() % 15, 0);
    assert!(rows.iter().all(|r| r.starts_with("synth003,")));
}

#[test]
fn import_cholec80_writes_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let mut phase = String::from("Frame\tPhase\n");
    for f in 0..75 {
        phase.push_str(&format!("{f}\tPreparation\n"));
    }
    std::fs::write(dir.path().join("video01-phase.txt"), phase).unwrap();
    std::fs::write(
        dir.path().join("video01-tool.txt"),
        "Frame\tGrasper\tBipolar\tHook\tScissors\tClipper\tIrrigator\tSpecimenBag\n\
         0\t1\t0\t0\t0\t0\t0\t0\n25\t0\t1\t0\t0\t0\t0\t0\n50\t0\t1\t0\t0\t0\t0\t0\n",
    )
    .unwrap();
    let out = dir.path().join("ann.csv");
    let d = s(dir.path());
    ok(&["import-cholec80", "--phase-dir", d, "--tool-dir", d, "--out-annotations", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("video_id,track,label,start_frame,end_frame"));
    assert!(text.contains("video01,phase,Preparation,1,3"));
    assert!(text.contains("video01,instrument,Bipolar,2,3"));
}

#[test]
fn ablate_writes_nine_rows() {
    let w = workspace();
    let out = w.root.join("ablation.csv");
    let mut args = vec![
        "ablate",
        "--detections",
        s(&w.det),
        "--annotations",
        s(&w.ann),
        "--out",
        s(&out),
        "--seed",
        "3",
    ];
    args.extend_from_slice(SMALL);
    ok(&args);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("GC,GPK,TC,HL_2,HL_3,HL_5,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 9);
    assert!(rows[8].ends_with(",1"));
}
