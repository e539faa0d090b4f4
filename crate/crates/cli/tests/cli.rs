use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geovo::evaluation::{cut_snippets, SnippetStride};
use geovo::geometry::rotation_angle;
use geovo::io;
use geovo::synth::perturb_pose;
use geovo::Trajectory;

fn geovo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geovo")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "exit {:?}, stderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses a one-row CSV into (header, values).
fn row(text: &str) -> Vec<(String, f64)> {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',');
    let values = lines.next().unwrap().split(',').map(|v| v.parse::<f64>().unwrap());
    header.map(str::to_string).zip(values).collect()
}

fn get(r: &[(String, f64)], key: &str) -> f64 {
    r.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no column {key}")).1
}

fn synth(dir: &Path, seed: &str) {
    ok(&geovo(&["synth", "--out", s(dir), "--seed", seed, "--views", "3"]));
}

fn frame_args(dir: &Path, motions: &str) -> Vec<String> {
    let p = |f: &str| dir.join(f).to_str().unwrap().to_string();
    vec![
        "--target".into(),
        p("target.pgm"),
        "--depth".into(),
        p("target.depth"),
        "--k-target".into(),
        p("target.k"),
        "--source".into(),
        p("source1.pgm"),
        "--source".into(),
        p("source2.pgm"),
        "--k-source".into(),
        p("source1.k"),
        "--k-source".into(),
        p("source2.k"),
        "--motions".into(),
        p(motions),
        "--matches".into(),
        p("matches1.txt"),
        "--matches".into(),
        p("matches2.txt"),
    ]
}

#[test]
fn synth_then_loss_at_truth_is_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5");
    let mut args = vec!["loss".to_string()];
    args.extend(frame_args(dir.path(), "motions.txt"));
    let r = row(&ok(&geovo(&args.iter().map(String::as_str).collect::<Vec<_>>())));
    assert!(get(&r, "photometric") <= 1e-3);
    assert!(get(&r, "geometric") <= 1e-8);
}

#[test]
fn eval_depth_identical_maps() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "1");
    let d = dir.path().join("target.depth");
    let r = row(&ok(&geovo(&["eval-depth", "--pred", s(&d), "--gt", s(&d), "--cap", "80"])));
    for k in ["abs_rel", "sq_rel", "rmse", "rmse_log"] {
        assert_eq!(get(&r, k), 0.0);
    }
    for k in ["a1", "a2", "a3"] {
        assert_eq!(get(&r, k), 1.0);
    }
}

#[test]
fn eval_odom_identical_files_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let traj = Trajectory::from_poses(
        (0..12)
            .map(|i| {
                geovo::RigidMotion::new(
                    geovo::geometry::axis_angle(&geovo::nalgebra::Vector3::y(), 0.05 * i as f64),
                    geovo::nalgebra::Vector3::new(0.3 * i as f64, 0.0, i as f64 + 0.01 * (i * i) as f64),
                )
                .unwrap()
            })
            .collect(),
    );
    let poses = dir.path().join("gt.txt");
    io::write_pose_file(&poses, &traj).unwrap();
    let svg = dir.path().join("o.svg");
    let csv = dir.path().join("odom.csv");
    ok(&geovo(&["eval-odom", "--pred", s(&poses), "--gt", s(&poses), "--svg", s(&svg), "--out", s(&csv)]));
    let r = row(&fs::read_to_string(&csv).unwrap());
    assert!(get(&r, "median") <= 1e-12);
    assert!(get(&r, "snippet_ate_mean") <= 1e-12);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(geovo(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(geovo(&["eval-depth", "--pred", "x.depth"]).status.code(), Some(2));
    assert_eq!(geovo(&["synth", "--seed", "minus-one"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one_with_name() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1 0 0 0 0 1 0 0 0 0 1\n").unwrap();
    let out = geovo(&["eval-odom", "--pred", s(&bad), "--gt", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MalformedLine"));

    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "alhpa = 0.85\n").unwrap();
    let out = geovo(&["--config", s(&cfg), "eval-odom", "--pred", s(&bad), "--gt", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ConfigError"));

    let m = dir.path().join("m.txt");
    fs::write(&m, "MATCHES v1 5 9 9 9 9\n1 1 1 1\n1 1 1 1\n1 1 1 1\n1 1 1 1\n").unwrap();
    let out = geovo(&["fmatrix", "--matches", s(&m)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CountMismatch"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    synth(a.path(), "9");
    synth(b.path(), "9");
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 11);
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
    let m = a.path().join("matches1.txt");
    let first = ok(&geovo(&["fmatrix", "--matches", s(&m), "--seed", "4"]));
    let second = ok(&geovo(&["fmatrix", "--matches", s(&m), "--seed", "4"]));
    assert_eq!(first, second);
    assert_eq!(get(&row(&first), "inliers"), 200.0);
}

#[test]
fn fmatrix_writes_sampled_inliers() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "2");
    let inl = dir.path().join("inliers.txt");
    ok(&geovo(&["fmatrix", "--matches", s(&dir.path().join("matches1.txt")), "--inliers-out", s(&inl)]));
    assert_eq!(io::read_match_file(&inl).unwrap().len(), 100);
}

#[test]
fn refine_moves_perturbed_poses_toward_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    let truth = io::read_pose_file(dir.path().join("motions.txt")).unwrap();
    let start: Vec<_> = truth.poses().iter().enumerate().map(|(i, m)| perturb_pose(m, 1.0, 0.05, i as u64).unwrap()).collect();
    io::write_pose_file(dir.path().join("start.txt"), &Trajectory::from_poses(start.clone())).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "preset = pairwise_matching\nmax_iters = 40\n").unwrap();
    let out = dir.path().join("refined.txt");
    let trace = dir.path().join("trace.csv");
    let mut args = vec![
        "--config".to_string(),
        s(&cfg).into(),
        "refine".into(),
        "--out".into(),
        s(&out).into(),
        "--trace-out".into(),
        s(&trace).into(),
    ];
    args.extend(frame_args(dir.path(), "start.txt"));
    ok(&geovo(&args.iter().map(String::as_str).collect::<Vec<_>>()));
    let refined = io::read_pose_file(&out).unwrap();
    for (i, (s0, truth)) in start.iter().zip(truth.poses()).enumerate() {
        let err = |m: &geovo::RigidMotion| rotation_angle(&(m.rotation * truth.rotation.transpose())).to_degrees();
        assert!(err(&refined.poses()[i]) < 0.5 * err(s0), "source {i}");
    }
    let losses: Vec<f64> =
        fs::read_to_string(&trace).unwrap().lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn chain_recovers_gauge_fixed_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let traj = Trajectory::from_poses(
        (0..15)
            .map(|i| {
                let a = 0.03 * i as f64;
                geovo::RigidMotion::new(
                    geovo::geometry::axis_angle(&geovo::nalgebra::Vector3::new(0.1, 1.0, 0.0), a),
                    geovo::nalgebra::Vector3::new(a.sin() * 4.0, 0.1, i as f64),
                )
                .unwrap()
            })
            .collect(),
    );
    let sn = dir.path().join("snippets.txt");
    io::write_snippet_file(&sn, &cut_snippets(&traj, 5, SnippetStride::EveryFrame).unwrap()).unwrap();
    let chained = io::parse_poses(&ok(&geovo(&["chain", "--snippets", s(&sn)]))).unwrap();
    for (a, b) in chained.poses().iter().zip(traj.gauge_fixed().poses()) {
        assert!((a.rotation - b.rotation).amax() <= 1e-10);
        assert!((a.translation - b.translation).amax() <= 1e-10);
    }
}

#[test]
fn warp_at_truth_reproduces_target() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6");
    let p = |f: &str| dir.path().join(f);
    let out = ok(&geovo(&[
        "warp",
        "--source",
        s(&p("source1.pgm")),
        "--depth",
        s(&p("target.depth")),
        "--motion",
        s(&p("motions.txt")),
        "--k-source",
        s(&p("source1.k")),
        "--k-target",
        s(&p("target.k")),
        "--out",
        s(&p("warped.pgm")),
    ]));
    assert_eq!(out.trim(), "valid_pixels,3072");
    let target = io::read_image_file(p("target.pgm")).unwrap();
    let warped = io::read_image_file(p("warped.pgm")).unwrap();
    let mean_abs = target.data().iter().zip(warped.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / target.data().len() as f64;
    // 8-bit quantization on both images plus interpolation of quantized data
    assert!(mean_abs < 4.0 / 255.0, "{mean_abs}");
}
