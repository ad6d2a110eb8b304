use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fnn_core::dataset::{make_split, Dataset, DatasetKind};
use fnn_core::engine::{save_checkpoint, train_epoch, CheckpointMeta};
use fnn_core::{Architecture, ForgetClock, Network, Rng};

fn fnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnn"))
        .args(args)
        .env_remove("FNN_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn data_root() -> Option<PathBuf> {
    let root = std::env::var_os("FNN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    root.join("digits/train-images-idx3-ubyte")
        .is_file()
        .then_some(root)
}

macro_rules! require_data {
    () => {
        match data_root() {
            Some(root) => root,
            None => {
                eprintln!("digit data not found; skipping");
                return;
            }
        }
    };
}

fn write_config(dir: &Path, data: &Path, extra: &str) -> PathBuf {
    let path = dir.join("experiment.cfg");
    fs::write(
        &path,
        format!(
            "dataset = digits\ndata_dir = {}\noutput_dir = out\nmodel = mlp\n{extra}",
            data.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn verify_theory_exit_codes() {
    let ok = fnn(&["verify-theory"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    assert_eq!(code(&fnn(&["verify-theory", "--activation", "sigmoid"])), 1);
    assert_eq!(code(&fnn(&["verify-theory", "--trials", "0"])), 2);
}

#[test]
fn missing_data_file_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tmp.path().join("nowhere"), "");
    let out = fnn(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train-images-idx3-ubyte"), "{err}");
}

#[test]
fn missing_data_dir_without_env_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(&cfg, "model = mlp\n").unwrap();
    let out = fnn(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("FNN_DATA_DIR"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), tmp.path(), "schedule.epochs = 3\n");
    let out = fnn(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedule.epochs"));
}

#[test]
fn train_smoke_writes_all_artifacts_deterministically() {
    let data = require_data!();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &data, "");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let out = fnn(&[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--subset",
            "200",
            "--out",
            dir.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["metrics.csv", "optimal_points.csv", "curve.svg", "config.txt"] {
            assert!(dir.join(f).is_file(), "{f} missing");
        }
        assert!(dir.join("checkpoints/last_good.ckpt").is_file());
        outputs.push((
            fs::read(dir.join("metrics.csv")).unwrap(),
            fs::read(dir.join("curve.svg")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(csv.lines().count(), 31, "header plus 5 x (2 + 4) rows");
}

#[test]
fn baseline_smoke_and_zero_epochs() {
    let data = require_data!();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &data, "schedule.turns = 1\n");
    let dir = tmp.path().join("base");
    let args = |dir: &Path| {
        vec![
            "baseline".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--subset".into(),
            "200".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
            "-q".into(),
        ]
    };
    let a: Vec<String> = args(&dir);
    let out = fnn(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    // Initial evaluation plus one turn's worth (2 + 4) of fine-tuning epochs.
    assert_eq!(csv.lines().count(), 1 + 1 + 6);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,initial,0,0,"));

    let cfg0 = write_config(tmp.path(), &data, "baseline.epochs = 0\n");
    let dir0 = tmp.path().join("zero");
    let out = fnn(&[
        "baseline",
        "--config",
        cfg0.to_str().unwrap(),
        "--subset",
        "200",
        "--out",
        dir0.to_str().unwrap(),
        "-q",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(dir0.join("metrics.csv")).unwrap().lines().count(), 2);
}

#[test]
fn mia_audits_checkpoints() {
    let data = require_data!();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &data, "");
    let arch = Architecture::mlp(&[1, 28, 28], &[32, 16], 10).unwrap();

    let fresh = Network::new(arch.clone(), &mut Rng::new(5));
    let fresh_path = tmp.path().join("fresh.ckpt");
    save_checkpoint(&fresh, &CheckpointMeta::default(), &fresh_path).unwrap();
    let out = fnn(&["mia", "--checkpoint", fresh_path.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let score = parse_score(&out);
    assert!((score - 0.5).abs() <= 0.05, "fresh network scored {score}");

    // Overfit: 20 epochs on the forget set alone.
    let loaded = Dataset::load(DatasetKind::Digits, data.join("digits")).unwrap();
    let train = loaded.train.truncated(2000);
    let split = make_split(&train.labels, 1000 * 2000 / 60000, 0).unwrap();
    let mut net = Network::new(arch, &mut Rng::new(6));
    let mut rng = Rng::new(7);
    for _ in 0..20 {
        let mut order = split.forget.clone();
        rng.shuffle(&mut order);
        train_epoch(&mut net, &train.images, &train.labels, &order, 16, 0.05, &ForgetClock::disabled()).unwrap();
    }
    let overfit_path = tmp.path().join("overfit.ckpt");
    save_checkpoint(&net, &CheckpointMeta::default(), &overfit_path).unwrap();
    let out = fnn(&[
        "mia",
        "--checkpoint",
        overfit_path.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--subset",
        "2000",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let score = parse_score(&out);
    assert!(score > 0.6, "overfit network scored {score}");

    let bad = tmp.path().join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let out = fnn(&["mia", "--checkpoint", bad.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

fn parse_score(out: &Output) -> f64 {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .find_map(|l| l.strip_prefix("mia_score "))
        .expect("score line")
        .trim()
        .parse()
        .unwrap()
}

fn sample_csv(rows: usize) -> String {
    let mut csv = String::from(fnn_core::engine::CSV_HEADER);
    csv.push('\n');
    for g in 1..=rows {
        let turn = (g - 1) / 6 + 1;
        let within = (g - 1) % 6 + 1;
        let (phase, e) = if within <= 2 {
            ("learning", within)
        } else {
            ("unlearning", within - 2)
        };
        let acc = 0.9 + 0.002 * g as f64;
        csv.push_str(&format!(
            "{turn},{phase},{e},{g},0.100000,{acc:.6},0.530000,{acc:.6}\n"
        ));
    }
    csv
}

#[test]
fn plot_structure_and_idempotence() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("metrics.csv");
    fs::write(&csv, sample_csv(30)).unwrap();
    let svg_a = tmp.path().join("a.svg");
    let svg_b = tmp.path().join("b.svg");
    for svg in [&svg_a, &svg_b] {
        assert_eq!(code(&fnn(&["plot", csv.to_str().unwrap(), svg.to_str().unwrap()])), 0);
    }
    let a = fs::read_to_string(&svg_a).unwrap();
    assert_eq!(a, fs::read_to_string(&svg_b).unwrap());
    assert_eq!(a.matches("<polyline").count(), 3);
    assert!(a.contains(r#"viewBox="0 0 800 480""#));
    // y(0.5) of a [36, 424] plot area.
    assert!(a.contains(r#"class="chance" x1="64.00" y1="230.00""#), "{a}");
    assert!(a.contains(r#"class="optimal""#));

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, format!("{}\n", fnn_core::engine::CSV_HEADER)).unwrap();
    assert_eq!(code(&fnn(&["plot", empty.to_str().unwrap(), svg_a.to_str().unwrap()])), 2);
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&fnn(&["plot", empty.to_str().unwrap(), svg_a.to_str().unwrap()])), 2);
}
