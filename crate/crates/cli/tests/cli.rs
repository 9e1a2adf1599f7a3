//! End-to-end runs of the `kplsrt` binary on synthetic worlds.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kpls_retarget::evaluation::synthetic::bounding_box_diagonal;
use kpls_retarget::FaceRig;
use tempfile::TempDir;

fn kplsrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kplsrt"))
        .args(args)
        .env_remove("KPLSRT_CONFIG")
        .output()
        .expect("kplsrt runs")
}

fn ok(args: &[&str]) -> String {
    let out = kplsrt(args);
    assert!(
        out.status.success(),
        "kplsrt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let world = dir.join("world");
    let mut args = vec!["synth", "--out-dir", s(&world), "--seed", "0"];
    args.extend_from_slice(extra);
    ok(&args);
    world
}

fn train(world: &Path, model: &Path) -> String {
    ok(&[
        "train",
        "--source",
        s(&world.join("source.csv")),
        "--target",
        s(&world.join("target.csv")),
        "--model",
        s(model),
    ])
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn missing_input_names_the_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere.csv");
    let out = kplsrt(&[
        "train",
        "--source",
        s(&missing),
        "--target",
        s(&missing),
        "--model",
        s(&dir.path().join("m.json")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nowhere.csv"), "{err}");
}

#[test]
fn train_and_retarget_pipeline() {
    let dir = TempDir::new().unwrap();
    let world = synth(dir.path(), &["--frames", "500"]);
    let model = dir.path().join("model.json");
    let summary = train(&world, &model);
    assert!(summary.contains("dims 135->111"), "{summary}");
    assert!(summary.contains("N=48"), "{summary}");

    let first = std::fs::read(&model).unwrap();
    train(&world, &model);
    assert_eq!(
        first,
        std::fs::read(&model).unwrap(),
        "retraining changed the model file"
    );

    let output = dir.path().join("out.csv");
    let args = |input: &Path| {
        vec![
            "retarget".to_string(),
            "--model".into(),
            s(&model).into(),
            "--input".into(),
            s(input).into(),
            "--output".into(),
            s(&output).into(),
        ]
    };
    let run = |input: &Path| {
        let a = args(input);
        kplsrt(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };

    let out = run(&world.join("sequence.csv"));
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(data_rows(&output), 500);
    let header = std::fs::read_to_string(&output).unwrap();
    assert!(header.starts_with("frame,p0x,p0y,p0z,"));
    assert!(header.lines().next().unwrap().ends_with("p36z"));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = run(&empty);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(data_rows(&output), 0);

    // target-side frames have 37 points, the model expects 45
    let out = run(&world.join("target.csv"));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("37") && err.contains("45"), "{err}");

    let info = ok(&["inspect", "--model", s(&model)]);
    assert!(info.contains("method: kpls_rbf"), "{info}");
}

#[test]
fn identity_world_cycles_exactly() {
    let dir = TempDir::new().unwrap();
    let world = synth(dir.path(), &["--identity", "true", "--frames", "30"]);
    let report = dir.path().join("report.json");
    ok(&[
        "eval-cyclic",
        "--world-dir",
        s(&world),
        "--report",
        s(&report),
        "--kernel",
        "linear",
        "--components",
        "48",
        "--methods",
        "kpls_linear",
    ]);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let e_d = json["reports"][0]["e_d"].as_f64().unwrap();
    let rig: FaceRig =
        serde_json::from_str(&std::fs::read_to_string(world.join("rig_a.json")).unwrap()).unwrap();
    let diagonal = bounding_box_diagonal(rig.neutral_vertices());
    assert!(
        e_d <= 1e-6 * diagonal,
        "e_d = {e_d:e}, diagonal = {diagonal}"
    );
}

#[test]
fn default_world_ordering_and_report_determinism() {
    let dir = TempDir::new().unwrap();
    let world = synth(dir.path(), &[]);
    let report = dir.path().join("report.json");
    let frames = dir.path().join("frames.csv");
    let eval = || {
        ok(&[
            "eval-cyclic",
            "--world-dir",
            s(&world),
            "--report",
            s(&report),
            "--frames-csv",
            s(&frames),
        ])
    };
    let stdout = eval();
    assert!(stdout.contains("kpls_rbf <= linear_pls"), "{stdout}");
    assert!(stdout.contains("kpls_rbf <= rbf_interp"), "{stdout}");
    assert_eq!(data_rows(&frames), 3 * 100);
    let first = std::fs::read(&report).unwrap();
    eval();
    assert_eq!(
        first,
        std::fs::read(&report).unwrap(),
        "re-evaluation changed the report"
    );
}

#[test]
fn config_file_supplies_values() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("project.toml");
    let world = dir.path().join("small");
    std::fs::write(
        &config,
        format!(
            "seed = 5\nout_dir = {:?}\n[world]\npairs = 12\nsequence_frames = 7\n",
            s(&world)
        ),
    )
    .unwrap();
    let stdout = ok(&["--config", s(&config), "synth"]);
    assert!(
        stdout.contains("seed=5") && stdout.contains("N=12"),
        "{stdout}"
    );
    assert_eq!(data_rows(&world.join("sequence.csv")), 7);

    std::fs::write(&config, "colour = \"blue\"\n").unwrap();
    let out = kplsrt(&["--config", s(&config), "synth"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("project.toml"));
}
