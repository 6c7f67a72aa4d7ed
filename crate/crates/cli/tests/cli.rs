use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use transop::inference::objective;
use transop::{io, CoefficientVector, PointPair, TransportModel};

fn transop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transop"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = transop(dir, args);
    assert!(
        out.status.success(),
        "transop {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn synth_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    for name in ["a.csv", "b.csv"] {
        ok(
            p,
            &[
                "synth", "--kind", "rotation", "--n", "500", "--seed", "7", "--out", name,
            ],
        );
    }
    let a = fs::read(p.join("a.csv")).unwrap();
    assert_eq!(a, fs::read(p.join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 501);
    let other = ok(p, &["synth", "--n", "500", "--seed", "8"]).stdout;
    assert_ne!(other, fs::read(p.join("a.csv")).unwrap());
}

#[test]
fn bench_reports_one_row_per_pair_and_method() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &["bench", "--pairs", "100", "--methods", "prox,subgrad"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("pair_index,method,iterations,final_objective,recon_error,wall_time_ns")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 200);
    assert_eq!(rows.iter().filter(|r| r.contains(",prox,")).count(), 100);
    assert_eq!(rows.iter().filter(|r| r.contains(",subgrad,")).count(), 100);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let out = transop(p, &["synth", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(transop(p, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(transop(p, &[]).status.code(), Some(1));

    fs::write(p.join("typo.cfg"), "n = 10\nradus = 2\n").unwrap();
    let out = transop(p, &["synth", "--config", "typo.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("radus") && msg.contains("typo.cfg"), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1);

    fs::write(p.join("bad.cfg"), "zeta = lots\n").unwrap();
    let out = transop(p, &["bench", "--pairs", "2", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));

    let out = transop(p, &["bench", "--pairs", "2", "--methods", "newton"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("newton"));
}

#[test]
fn runtime_failures_exit_with_two_and_name_the_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let out = transop(p, &["train", "--pairs", "missing_pairs.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("missing_pairs.csv"), "{msg}");
    assert_eq!(msg.trim_end().lines().count(), 1);

    let out = transop(p, &["stability", "--model", "nope.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.json"));

    fs::write(p.join("broken.json"), "{\"dim\": 2}").unwrap();
    let out = transop(p, &["stability", "--model", "broken.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("broken.json"));

    fs::write(p.join("ragged.csv"), "x0,x1\n1,2\n3\n").unwrap();
    let out = transop(p, &["pair", "--data", "ragged.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("ragged.csv"));
}

#[test]
fn missing_output_directory_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let out = transop(
        dir.path(),
        &["synth", "--n", "5", "--out", "no/such/dir/data.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("no").exists());
}

fn grid_oracle(model: &TransportModel, pair: &PointPair, zeta: f64) -> f64 {
    let eval = |c: f64| {
        objective(
            &model.dictionary,
            &CoefficientVector(vec![c]),
            &pair.z0.z,
            &pair.z1.z,
            zeta,
        )
        .unwrap()
    };
    let mut best = (f64::INFINITY, 0.0);
    for k in -30_000..=30_000 {
        let c = k as f64 * 1e-4;
        let e = eval(c);
        if e < best.0 {
            best = (e, c);
        }
    }
    best.1
}

#[test]
fn trained_model_recovers_a_held_out_rotation() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(
        p,
        &[
            "synth",
            "--n",
            "2000",
            "--radius",
            "3",
            "--seed",
            "1",
            "--pairs-out",
            "pairs.csv",
            "--out",
            "data.csv",
        ],
    );
    fs::write(
        p.join("train.cfg"),
        "lr_psi = 0.1\nzeta = 0.1\nepochs = 20\ngamma = 1e-6\n",
    )
    .unwrap();
    ok(
        p,
        &[
            "train",
            "--pairs",
            "pairs.csv",
            "--config",
            "train.cfg",
            "--seed",
            "2",
            "--out",
            "model.json",
        ],
    );

    let (s, c) = 0.3f64.sin_cos();
    let z0 = vec![3.0 * 0.6f64.cos(), 3.0 * 0.6f64.sin()];
    let z1 = vec![c * z0[0] - s * z0[1], s * z0[0] + c * z0[1]];
    let held_out = PointPair::new(z0, z1);
    fs::write(
        p.join("held_out.csv"),
        io::pairs_csv(std::slice::from_ref(&held_out)),
    )
    .unwrap();
    fs::write(p.join("infer.cfg"), "zeta = 1e-3\n").unwrap();
    let out = ok(
        p,
        &[
            "infer",
            "--model",
            "model.json",
            "--pairs",
            "held_out.csv",
            "--config",
            "infer.cfg",
        ],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let reported = row[1];

    let model = TransportModel::load(&p.join("model.json")).unwrap();
    let oracle = grid_oracle(&model, &held_out.scaled(model.latent_scale), 1e-3);
    assert!(
        (reported - oracle).abs() < 5e-3,
        "reported {reported}, oracle {oracle}"
    );
    // The learned operator is a rescaled rotation generator, so the angle comes back
    // through the operator's off-diagonal entry.
    let psi = &model.dictionary.operators()[0];
    let angle = reported * (psi[(1, 0)] - psi[(0, 1)]) / 2.0;
    assert!((angle - 0.3).abs() < 1e-2, "angle {angle}");
}

/// Runs every subcommand in `dir` and returns the produced files by name.
fn full_pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let run = |args: &[&str]| ok(dir, args);
    run(&[
        "synth",
        "--n",
        "300",
        "--radius",
        "3",
        "--seed",
        "4",
        "--pairs-out",
        "pairs.csv",
        "--model-out",
        "truth.json",
        "--out",
        "rot.csv",
    ]);
    run(&[
        "pair", "--data", "rot.csv", "--k", "4", "--seed", "5", "--out", "idx.csv",
    ]);
    fs::write(
        dir.join("train.cfg"),
        "lr_psi = 0.05\nepochs = 2\nbatch_size = 100\n",
    )
    .unwrap();
    run(&[
        "train",
        "--pairs",
        "idx.csv",
        "--data",
        "rot.csv",
        "--operators",
        "2",
        "--config",
        "train.cfg",
        "--seed",
        "6",
        "--log",
        "train_log.csv",
        "--out",
        "model.json",
    ]);
    run(&[
        "infer",
        "--model",
        "model.json",
        "--pairs",
        "pairs.csv",
        "--seed",
        "7",
        "--out",
        "coef.csv",
    ]);
    run(&[
        "infer",
        "--model",
        "model.json",
        "--pairs",
        "pairs.csv",
        "--method",
        "subgrad",
        "--seed",
        "7",
        "--out",
        "coef_sub.csv",
    ]);
    run(&[
        "sample",
        "--model",
        "truth.json",
        "--data",
        "rot.csv",
        "--count",
        "2",
        "--noise",
        "0.01",
        "--seed",
        "8",
        "--out",
        "samples.csv",
    ]);
    run(&[
        "paths",
        "--model",
        "model.json",
        "--pairs",
        "pairs.csv",
        "--t",
        "0,0.5,1,1.5",
        "--seed",
        "9",
        "--out",
        "paths.csv",
    ]);
    run(&[
        "stability",
        "--model",
        "model.json",
        "--trace",
        "0",
        "--point",
        "1,0",
        "--trace-out",
        "trace.csv",
        "--out",
        "stability.csv",
    ]);
    run(&[
        "synth",
        "--kind",
        "two-class",
        "--n",
        "40",
        "--seed",
        "10",
        "--model-out",
        "cat.json",
        "--out",
        "two.csv",
    ]);
    run(&["classifier", "--data", "two.csv", "--out", "clf.json"]);
    fs::write(dir.join("enc.cfg"), "epochs = 3\nhidden = 8\n").unwrap();
    run(&[
        "encoder",
        "--model",
        "cat.json",
        "--classifier",
        "clf.json",
        "--data",
        "two.csv",
        "--config",
        "enc.cfg",
        "--seed",
        "11",
        "--log",
        "enc_log.csv",
        "--out",
        "enc.json",
    ]);
    run(&[
        "spread",
        "--encoder",
        "enc.json",
        "--data",
        "two.csv",
        "--out",
        "spread.csv",
    ]);
    run(&[
        "sample",
        "--model",
        "cat.json",
        "--data",
        "two.csv",
        "--encoder",
        "enc.json",
        "--seed",
        "12",
        "--out",
        "enc_samples.csv",
    ]);
    run(&[
        "bench",
        "--pairs",
        "20",
        "--no-timing",
        "--seed",
        "13",
        "--out",
        "bench.csv",
    ]);

    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|path: PathBuf| {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&path).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn every_command_is_reproducible_under_a_fixed_seed() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = full_pipeline(a.path());
    let second = full_pipeline(b.path());
    assert_eq!(first.len(), 22);
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        assert!(x == y, "{name} differs between runs");
        assert!(!x.is_empty(), "{name} is empty");
    }
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, {
        let mut v = names.clone();
        v.dedup();
        v
    });
}

#[test]
fn stdout_matches_out_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["synth", "--n", "20", "--seed", "3", "--out", "f.csv"]);
    let stdout = ok(p, &["synth", "--n", "20", "--seed", "3"]).stdout;
    assert_eq!(stdout, fs::read(p.join("f.csv")).unwrap());
}

#[test]
fn config_values_match_flags() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("s.cfg"), "n = 12\nradius = 2.5\nseed = 5\n").unwrap();
    let from_cfg = ok(p, &["synth", "--config", "s.cfg"]).stdout;
    let from_flags = ok(p, &["synth", "--n", "12", "--radius", "2.5", "--seed", "5"]).stdout;
    assert_eq!(from_cfg, from_flags);
    let overridden = ok(p, &["synth", "--config", "s.cfg", "--n", "13"]).stdout;
    assert_eq!(String::from_utf8(overridden).unwrap().lines().count(), 14);
}
