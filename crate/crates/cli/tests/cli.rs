use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use invnet_core::data::{sparse_signal_synth, LabeledDataset};
use invnet_core::interpret::{explain_linear, ImportanceRanking, LinearBoundary};
use invnet_core::io::{
    ranking_to_csv, read_dataset, read_index_set, read_model, write_dataset,
    write_model, write_with_header,
};
use invnet_core::net::{train, InvNetModel, TrainConfig};
use invnet_core::{DenseMatrix, SeededRng};
use tempfile::TempDir;

fn invnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = invnet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails_with(dir: &Path, args: &[&str], code: i32) -> String {
    let out = invnet(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_two_moons_writes_both_classes() {
    let dir = TempDir::new().unwrap();
    let stdout = ok(dir.path(), &["simulate", "--kind", "two-moons", "--n", "2000", "--noise", "0.1", "--out", "m.csv"]);
    assert!(stdout.contains("n = 2000, d = 2, class 0 = 1000, class 1 = 1000"));
    let ds = read_dataset(&dir.path().join("m.csv")).unwrap();
    assert_eq!(ds.len(), 2000);
    assert_eq!(ds.class_counts(), (1000, 1000));
    let text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(text.contains("# seed = 0"));
}

#[test]
fn simulate_sparse_writes_support_sidecar() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--kind", "sparse", "--n", "1000", "--d", "200", "--k", "10", "--seed", "7", "--out", "s.csv"]);
    let support = read_index_set(&dir.path().join("s.support.csv")).unwrap();
    assert_eq!(support.len(), 10);
    let expected = sparse_signal_synth(1000, 200, 10, 0.1, &mut SeededRng::new(7)).unwrap();
    assert_eq!(support, expected.ground_truth_support().unwrap());
    assert_eq!(read_dataset(&dir.path().join("s.csv")).unwrap().dim(), 200);
}

#[test]
fn simulate_rejects_unknown_kind_and_bad_paths() {
    let dir = TempDir::new().unwrap();
    fails_with(dir.path(), &["simulate", "--kind", "spiral", "--out", "x.csv"], 2);
    fails_with(dir.path(), &["simulate", "--out", "missing/x.csv"], 4);
    fails_with(dir.path(), &["simulate", "--kind", "axis", "--n", "3", "--out", "x.csv"], 2);
}

#[test]
fn train_with_zero_epochs_serializes_the_initialization() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--kind", "axis", "--n", "40", "--out", "a.csv"]);
    ok(dir.path(), &["train", "--data", "a.csv", "--model-out", "m.toml", "--epochs", "0", "--seed", "5"]);
    let model = read_model(&dir.path().join("m.toml")).unwrap();
    let ds = read_dataset(&dir.path().join("a.csv")).unwrap();
    let init = train(&ds, &TrainConfig { epochs: 0, seed: 5, ..TrainConfig::default() }).unwrap().model;
    assert_eq!(model, init);
    assert_eq!(data_lines(&dir.path().join("m.loss.csv")), ["epoch,mean_loss"]);
}

#[test]
fn train_reports_held_out_accuracy_and_logs_loss() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--kind", "two-moons", "--n", "400", "--seed", "2", "--out", "m.csv"]);
    let stdout = ok(
        dir.path(),
        &["train", "--data", "m.csv", "--model-out", "m.toml", "--loss-out", "loss.csv", "--epochs", "7"],
    );
    assert!(stdout.contains("held-out accuracy"), "{stdout}");
    assert!(stdout.contains("(n = 80)"));
    assert_eq!(data_lines(&dir.path().join("loss.csv")).len(), 8);
}

#[test]
fn malformed_dataset_reports_row_and_column() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.csv"), "subject_id,label,f0,f1\na,0,1.0,2.0\nb,1,oops,2.0\n").unwrap();
    let err = fails_with(dir.path(), &["train", "--data", "bad.csv", "--model-out", "m.toml"], 2);
    assert!(err.contains("row 3, column 3"), "{err}");
    fails_with(dir.path(), &["train", "--data", "absent.csv", "--model-out", "m.toml"], 4);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--kind", "axis", "--n", "40", "--out", "a.csv"]);
    fs::write(dir.path().join("run.toml"), "format_version = 1\n[train]\nepochs = 2\nseed = 4\n").unwrap();
    ok(dir.path(), &["--config", "run.toml", "train", "--data", "a.csv", "--model-out", "m.toml", "--epochs", "3"]);
    let loss = fs::read_to_string(dir.path().join("m.loss.csv")).unwrap();
    assert!(loss.contains("# epochs = 3") && loss.contains("# seed = 4"));
    assert_eq!(data_lines(&dir.path().join("m.loss.csv")).len(), 4);

    fs::write(dir.path().join("bad.toml"), "format_version = 1\n[train]\nepoch = 2\n").unwrap();
    fails_with(dir.path(), &["--config", "bad.toml", "train", "--data", "a.csv", "--model-out", "m.toml"], 2);
    fs::write(dir.path().join("old.toml"), "format_version = 9\n").unwrap();
    fails_with(dir.path(), &["--config", "old.toml", "train", "--data", "a.csv", "--model-out", "m.toml"], 2);
}

fn small_dataset(dir: &Path) -> LabeledDataset {
    let rows = [[0.5, -1.0, 2.0], [1.5, 0.25, -0.5], [-2.0, 1.0, 0.0], [0.0, 3.0, 1.0]];
    let ds = LabeledDataset::new(
        DenseMatrix::from_rows(&rows.map(|r| r.to_vec())).unwrap(),
        vec![0, 1, 0, 1],
    )
    .unwrap();
    write_dataset(&dir.join("d.csv"), &ds, &[]).unwrap();
    ds
}

#[test]
fn explain_with_identity_model_matches_linear_explanation() {
    let dir = TempDir::new().unwrap();
    let ds = small_dataset(dir.path());
    let (w, b) = (vec![1.0, -2.0, 0.5, 0.0], 0.25);
    let model = InvNetModel::identity(3, 2, 4, w.clone(), b).unwrap();
    write_model(&dir.path().join("id.toml"), &model, &[]).unwrap();
    ok(dir.path(), &["explain", "--model", "id.toml", "--data", "d.csv", "--out-dir", "ex"]);

    let boundary = LinearBoundary::new(w, b).unwrap();
    let lines = data_lines(&dir.path().join("ex/explanations.csv"));
    assert_eq!(lines[0], "subject_id,feature_index,x,x_p,explanation,importance");
    assert_eq!(lines.len(), 1 + 4 * 3);
    for (i, row) in ds.features().row_iter().enumerate() {
        let mut padded = row.to_vec();
        padded.push(0.0);
        let expected = explain_linear(&boundary, &padded).unwrap();
        for j in 0..3 {
            let fields: Vec<&str> = lines[1 + 3 * i + j].split(',').collect();
            assert_eq!(fields[0], format!("s{i}"));
            let got: f64 = fields[4].parse().unwrap();
            assert!((got - expected.explanation[j]).abs() < 1e-12, "sample {i} feature {j}");
        }
    }
    // every feature gets a histogram when d <= 3
    for j in 0..3 {
        let svg = fs::read_to_string(dir.path().join(format!("ex/hist_{j}.svg"))).unwrap();
        assert!(svg.contains("explanation f"));
    }
    assert_eq!(data_lines(&dir.path().join("ex/ranking.csv")).len(), 4);
    assert_eq!(data_lines(&dir.path().join("ex/separation.csv")).len(), 4);
}

#[test]
fn explain_rejects_dimension_mismatch() {
    let dir = TempDir::new().unwrap();
    small_dataset(dir.path());
    let model = InvNetModel::identity(2, 1, 4, vec![1.0, 1.0], 0.0).unwrap();
    write_model(&dir.path().join("m.toml"), &model, &[]).unwrap();
    let err = fails_with(dir.path(), &["explain", "--model", "m.toml", "--data", "d.csv", "--out-dir", "ex"], 2);
    assert!(err.contains("dimension"), "{err}");
}

#[test]
fn select_counts_follow_the_fraction() {
    let dir = TempDir::new().unwrap();
    let scores: Vec<f64> = (0..19_900).map(|k| ((k * 7919) % 19_900) as f64).collect();
    let ranking = ImportanceRanking::from_scores(scores).unwrap();
    write_with_header(&dir.path().join("r.csv"), &[], &ranking_to_csv(&ranking)).unwrap();

    ok(dir.path(), &["select", "--ranking", "r.csv", "--fraction", "0.1", "--out", "top.csv"]);
    let top = read_index_set(&dir.path().join("top.csv")).unwrap();
    assert_eq!(top.len(), 1990);
    assert_eq!(top[..], ranking.order[..1990]);

    ok(dir.path(), &["select", "--ranking", "r.csv", "--fraction", "1.0", "--out", "all.csv"]);
    assert_eq!(read_index_set(&dir.path().join("all.csv")).unwrap(), ranking.order);

    fails_with(dir.path(), &["select", "--ranking", "r.csv", "--fraction", "0", "--out", "x.csv"], 2);
    fails_with(dir.path(), &["select", "--ranking", "r.csv", "--fraction", "1.5", "--out", "x.csv"], 2);
}

#[test]
fn regress_with_ground_truth_subset_beats_all_features() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["simulate", "--kind", "sparse", "--n", "200", "--d", "60", "--k", "5", "--noise", "1", "--seed", "3", "--out", "s.csv"],
    );
    let stdout = ok(
        dir.path(),
        &["regress", "--data", "s.csv", "--subset", "s.support.csv", "--out-dir", "reg", "--svr-epochs", "20"],
    );
    assert!(stdout.contains("chosen lambda per fold, score, full"), "{stdout}");
    let summary = data_lines(&dir.path().join("reg/summary.csv"));
    assert_eq!(summary[0], "target,metric,full,selected");
    let mse: Vec<f64> = summary[1].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    assert!(mse[1] <= mse[0], "{summary:?}");
    let folds = data_lines(&dir.path().join("reg/cv_score_full.csv"));
    assert_eq!(folds.len(), 1 + 10 + 1);
    assert!(dir.path().join("reg/cv_score_selected.csv").exists());
}

#[test]
fn regress_rejects_missing_target() {
    let dir = TempDir::new().unwrap();
    small_dataset(dir.path());
    fails_with(dir.path(), &["regress", "--data", "d.csv", "--target", "srs", "--out-dir", "reg"], 2);
    fails_with(dir.path(), &["regress", "--data", "d.csv", "--out-dir", "reg"], 2);
}

fn polyline_points(svg: &str) -> Vec<(f64, f64)> {
    let start = svg.find("<polyline points=\"").expect("curve drawn") + 18;
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end]
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn plot_boundary_identity_model_draws_a_straight_curve() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--kind", "axis", "--n", "100", "--out", "a.csv"]);
    let model = InvNetModel::identity(2, 2, 4, vec![0.3, 1.0], -0.1).unwrap();
    write_model(&dir.path().join("id.toml"), &model, &[]).unwrap();
    let stdout = ok(dir.path(), &["plot-boundary", "--model", "id.toml", "--data", "a.csv", "--out", "b.svg"]);
    assert!(stdout.starts_with("side-count: "));
    let svg = fs::read_to_string(dir.path().join("b.svg")).unwrap();
    assert!(svg.contains("feature domain") && svg.contains("input domain"));
    let pts = polyline_points(&svg);
    assert!(pts.len() > 10);
    let (a, b) = (pts[0], pts[pts.len() - 1]);
    for p in &pts {
        let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        assert!(cross.abs() / len < 0.01, "point {p:?} off the line");
    }
}

#[test]
fn plot_boundary_needs_planar_data() {
    let dir = TempDir::new().unwrap();
    small_dataset(dir.path());
    let model = InvNetModel::identity(3, 1, 4, vec![1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
    write_model(&dir.path().join("m.toml"), &model, &[]).unwrap();
    let err = fails_with(dir.path(), &["plot-boundary", "--model", "m.toml", "--data", "d.csv", "--out", "b.svg"], 2);
    assert!(err.contains("unsupported dimension"), "{err}");
}

fn write_series(path: &Path, header: &str, rows: &[Vec<f64>]) {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

#[test]
fn ingest_three_rois_in_pair_order() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("ts")).unwrap();
    let rows = vec![
        vec![1.0, 2.0, 0.0],
        vec![2.0, 4.5, 1.0],
        vec![3.0, 5.0, -1.0],
        vec![4.0, 8.5, 0.5],
    ];
    write_series(&dir.path().join("ts/subj.csv"), "a,b,c", &rows);
    fs::write(dir.path().join("labels.csv"), "subject_id,label,target_srs\nsubj,1,42\n").unwrap();
    ok(dir.path(), &["ingest", "--input-dir", "ts", "--labels", "labels.csv", "--out", "c.csv"]);
    let ds = read_dataset(&dir.path().join("c.csv")).unwrap();
    assert_eq!(ds.feature_names(), ["c1_2", "c1_3", "c2_3"]);
    assert_eq!(ds.labels(), [1]);
    assert_eq!(ds.target("srs").unwrap(), [42.0]);
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    let pearson = |a: Vec<f64>, b: Vec<f64>| {
        let (ma, mb) = (a.iter().sum::<f64>() / 4.0, b.iter().sum::<f64>() / 4.0);
        let c: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        c / (va * vb).sqrt()
    };
    let expected = [pearson(col(0), col(1)), pearson(col(0), col(2)), pearson(col(1), col(2))];
    for (got, want) in ds.features().row(0).iter().zip(expected) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn ingest_bootstrap_copies_per_subject() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("ts")).unwrap();
    let mut rng = SeededRng::new(1);
    for s in ["b", "a"] {
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.standard_normal()).collect()).collect();
        write_series(&dir.path().join(format!("ts/{s}.csv")), "w,x,y,z", &rows);
    }
    ok(dir.path(), &["ingest", "--input-dir", "ts", "--out", "c.csv", "--copies", "50", "--block-len", "8", "--seed", "2"]);
    let ds = read_dataset(&dir.path().join("c.csv")).unwrap();
    assert_eq!(ds.len(), 100);
    assert_eq!(ds.sample_ids()[0], "a#b0");
    assert_eq!(ds.sample_ids()[50], "b#b0");
    let first = fs::read(dir.path().join("c.csv")).unwrap();
    ok(dir.path(), &["ingest", "--input-dir", "ts", "--out", "c.csv", "--copies", "50", "--block-len", "8", "--seed", "2"]);
    assert_eq!(fs::read(dir.path().join("c.csv")).unwrap(), first);
}

#[test]
fn ingest_errors_name_the_problem() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("ts")).unwrap();
    let flat = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
    write_series(&dir.path().join("ts/s.csv"), "roi_a,roi_b", &flat);
    let err = fails_with(dir.path(), &["ingest", "--input-dir", "ts", "--out", "c.csv"], 3);
    assert!(err.contains("roi_b"), "{err}");

    fs::write(dir.path().join("ts/s.csv"), "a,b\n1,2\n3\n4,5\n").unwrap();
    let err = fails_with(dir.path(), &["ingest", "--input-dir", "ts", "--out", "c.csv"], 2);
    assert!(err.contains("row 3"), "{err}");

    fails_with(dir.path(), &["ingest", "--input-dir", "nowhere", "--out", "c.csv"], 4);
}

#[test]
fn eval_reports_metrics() {
    let dir = TempDir::new().unwrap();
    small_dataset(dir.path());
    let model = InvNetModel::identity(3, 1, 4, vec![0.0, 1.0, 0.0, 0.0], -0.5).unwrap();
    write_model(&dir.path().join("m.toml"), &model, &[]).unwrap();
    let stdout = ok(dir.path(), &["eval", "--model", "m.toml", "--data", "d.csv", "--out", "metrics.csv"]);
    // logits -1.5, -0.25, 0.5, 2.5 against labels 0, 1, 0, 1
    assert!(stdout.contains("accuracy = 0.5"), "{stdout}");
    assert!(stdout.contains("true_positives = 1"));
    assert_eq!(data_lines(&dir.path().join("metrics.csv"))[1], "accuracy,0.5");
}
