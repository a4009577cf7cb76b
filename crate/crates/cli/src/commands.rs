//! Command implementations. Each command resolves its parameters (defaults,
//! then the config file section, then flags), checks its paths, computes, and
//! writes outputs whose header comments record everything needed to rerun it.

use std::fs;
use std::path::{Path, PathBuf};

use invnet_core::data::{
    axis_clusters, bootstrap_connectivity, diagonal_clusters_elongated, pearson_connectivity,
    sparse_signal_synth, two_moons, vectorize_upper,
};
use invnet_core::interpret::{explain_dataset, mean_of_explanations, select_top};
use invnet_core::io::{
    cv_report_to_csv, explanations_to_csv, index_set_to_csv, loss_history_to_csv, ranking_to_csv,
    read_dataset, read_index_set, read_model, read_ranking, read_subject_table, read_time_series,
    write_dataset, write_model, write_with_header,
};
use invnet_core::net::{train, InvNetModel, TrainConfig};
use invnet_core::validation::{classification_metrics, nested_cv, standardized_mean_difference, CvReport};
use invnet_core::data::LabeledDataset;
use invnet_core::{DenseMatrix, Error, Result, SeededRng};

use crate::config::{
    provenance, ExplainParams, IngestParams, PlotParams, RegressParams, RunConfig, SelectParams,
    SimulateParams, TrainParams,
};
use crate::plots::{boundary_figure, feature_histograms};
use crate::{Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    if let Some(path) = &cli.config {
        require_file(path)?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => {
            let mut p = cfg.simulate.unwrap_or_default();
            set(&mut p.kind, a.kind);
            set(&mut p.n, a.n);
            set(&mut p.noise, a.noise);
            set(&mut p.separation, a.separation);
            set(&mut p.along_sd, a.along_sd);
            set(&mut p.d, a.d);
            set(&mut p.k, a.k);
            set(&mut p.seed, a.seed);
            simulate(&p, &a.out)
        }
        Command::Train(a) => {
            let mut p = cfg.train.unwrap_or_default();
            set(&mut p.learning_rate, a.learning_rate);
            set(&mut p.epochs, a.epochs);
            set(&mut p.batch_size, a.batch_size);
            set(&mut p.hidden_dim, a.hidden_dim);
            set(&mut p.num_blocks, a.num_blocks);
            set(&mut p.holdout, a.holdout);
            set(&mut p.seed, a.seed);
            let loss_out = a.loss_out.unwrap_or_else(|| a.model_out.with_extension("loss.csv"));
            train_cmd(&p, &a.data, &a.model_out, &loss_out)
        }
        Command::Explain(a) => {
            let mut p = cfg.explain.unwrap_or_default();
            set(&mut p.hist_top, a.hist_top);
            set(&mut p.bins, a.bins);
            explain(&p, &a.model, &a.data, &a.out_dir)
        }
        Command::Select(a) => {
            let mut p = cfg.select.unwrap_or_default();
            set(&mut p.fraction, a.fraction);
            select(&p, &a.ranking, &a.out)
        }
        Command::Regress(a) => {
            let mut p = cfg.regress.unwrap_or_default();
            if !a.targets.is_empty() {
                p.targets = a.targets;
            }
            set(&mut p.folds, a.folds);
            set(&mut p.inner_folds, a.inner_folds);
            set(&mut p.lambda_grid, a.lambda_grid);
            set(&mut p.epsilon, a.epsilon);
            set(&mut p.svr_epochs, a.svr_epochs);
            set(&mut p.seed, a.seed);
            regress(&p, &a.data, a.subset.as_deref(), &a.out_dir)
        }
        Command::PlotBoundary(a) => {
            let mut p = cfg.plot_boundary.unwrap_or_default();
            set(&mut p.samples, a.samples);
            set(&mut p.margin, a.margin);
            plot_boundary(&p, &a.model, &a.data, &a.out)
        }
        Command::Ingest(a) => {
            let mut p = cfg.ingest.unwrap_or_default();
            set(&mut p.copies, a.copies);
            set(&mut p.block_len, a.block_len);
            set(&mut p.seed, a.seed);
            ingest(&p, &a.input_dir, a.labels.as_deref(), &a.out)
        }
        Command::Eval(a) => eval(&a.model, &a.data, a.out.as_deref()),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(io_error(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

/// The parent directory of an output file must already exist.
fn require_output(path: &Path) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(io_error(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        ))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn accuracy(model: &InvNetModel, data: &LabeledDataset) -> Result<f64> {
    let mut correct = 0;
    for (row, &label) in data.features().row_iter().zip(data.labels()) {
        if model.predict(row)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Model and dataset read together, with their dimensions checked.
fn model_and_data(model: &Path, data: &Path) -> Result<(InvNetModel, LabeledDataset)> {
    require_file(model)?;
    require_file(data)?;
    let m = read_model(model)?;
    let d = read_dataset(data)?;
    if m.input_dim() != d.dim() {
        return Err(Error::Dimension {
            expected: m.input_dim(),
            got: d.dim(),
        });
    }
    Ok((m, d))
}

// ---------------------------------------------------------------- simulate

/// Sidecar file holding the ground-truth support of a sparse dataset.
pub fn support_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.support.csv"))
}

fn simulate(p: &SimulateParams, out: &Path) -> Result<()> {
    require_output(out)?;
    let mut rng = SeededRng::new(p.seed);
    let ds = match p.kind.as_str() {
        "two-moons" => two_moons(p.n, p.noise, &mut rng)?,
        "diagonal" => diagonal_clusters_elongated(p.n, p.separation, p.along_sd, &mut rng)?,
        "axis" => axis_clusters(p.n, p.separation, &mut rng)?,
        "sparse" => sparse_signal_synth(p.n, p.d, p.k, p.noise, &mut rng)?,
        other => {
            return Err(Error::Input(format!(
                "unknown kind {other:?}; expected two-moons, diagonal, axis or sparse"
            )))
        }
    };
    let header = provenance("simulate", &[], p);
    write_dataset(out, &ds, &header)?;
    if let Some(support) = ds.ground_truth_support() {
        let side = support_path(out);
        let mut header = header.clone();
        header.push("ground-truth informative feature indices".into());
        write_with_header(&side, &header, &index_set_to_csv(support))?;
        println!("support: {} indices -> {}", support.len(), show(&side));
    }
    let (c0, c1) = ds.class_counts();
    println!("n = {}, d = {}, class 0 = {c0}, class 1 = {c1}", ds.len(), ds.dim());
    Ok(())
}

// ------------------------------------------------------------------- train

/// Sorted (train, held-out) row indices.
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Input(format!("holdout must be in [0, 1), got {fraction}")));
    }
    let held = (fraction * n as f64).round() as usize;
    if fraction > 0.0 && (held == 0 || held == n) {
        return Err(Error::Input(format!(
            "holdout {fraction} of {n} samples leaves an empty split"
        )));
    }
    let perm = SeededRng::new(seed).child("holdout").permutation(n);
    let mut test = perm[..held].to_vec();
    let mut train = perm[held..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

fn train_cmd(p: &TrainParams, data: &Path, model_out: &Path, loss_out: &Path) -> Result<()> {
    require_file(data)?;
    require_output(model_out)?;
    require_output(loss_out)?;
    let config = TrainConfig {
        learning_rate: p.learning_rate,
        epochs: p.epochs,
        batch_size: p.batch_size,
        seed: p.seed,
        hidden_dim: p.hidden_dim,
        num_blocks: p.num_blocks,
    };
    config.validate()?;
    let ds = read_dataset(data)?;
    let (train_idx, test_idx) = holdout_split(ds.len(), p.holdout, p.seed)?;
    let train_set = ds.select_rows(&train_idx);
    let outcome = train(&train_set, &config)?;

    let header = provenance("train", &[("data", show(data))], p);
    write_model(model_out, &outcome.model, &header)?;
    write_with_header(loss_out, &header, &loss_history_to_csv(&outcome.loss_history))?;

    println!(
        "train accuracy = {:.4} (n = {})",
        accuracy(&outcome.model, &train_set)?,
        train_set.len()
    );
    if !test_idx.is_empty() {
        let test_set = ds.select_rows(&test_idx);
        println!(
            "held-out accuracy = {:.4} (n = {})",
            accuracy(&outcome.model, &test_set)?,
            test_set.len()
        );
    }
    if let Some(last) = outcome.loss_history.last() {
        println!("final epoch loss = {last:.6}");
    }
    Ok(())
}

// ----------------------------------------------------------------- explain

fn explain(p: &ExplainParams, model: &Path, data: &Path, out_dir: &Path) -> Result<()> {
    if p.bins == 0 {
        return Err(Error::Input("bins must be >= 1".into()));
    }
    let (m, ds) = model_and_data(model, data)?;
    create_dir(out_dir)?;
    let explanations = explain_dataset(&m, &ds)?;
    let ranking = mean_of_explanations(&explanations)?;
    let header = provenance("explain", &[("model", show(model)), ("data", show(data))], p);

    write_with_header(
        &out_dir.join("explanations.csv"),
        &header,
        &explanations_to_csv(ds.sample_ids(), &explanations),
    )?;
    write_with_header(&out_dir.join("ranking.csv"), &header, &ranking_to_csv(&ranking))?;

    let mut separation = String::from("feature_index,input_smd,explanation_smd\n");
    let two_classes = {
        let (c0, c1) = ds.class_counts();
        c0 > 0 && c1 > 0
    };
    let column = |j: usize| -> Vec<f64> { explanations.iter().map(|e| e.explanation[j]).collect() };
    if two_classes {
        for j in 0..ds.dim() {
            let input = standardized_mean_difference(&ds.features().column(j), ds.labels());
            let expl = standardized_mean_difference(&column(j), ds.labels());
            separation.push_str(&format!("{j},{},{}\n", smd_field(input)?, smd_field(expl)?));
        }
        write_with_header(&out_dir.join("separation.csv"), &header, &separation)?;
    }

    let shown = if ds.dim() <= p.hist_top { ds.dim() } else { p.hist_top };
    for &j in &ranking.order[..shown] {
        let svg = feature_histograms(
            &header,
            &ds.feature_names()[j],
            &ds.features().column(j),
            &column(j),
            ds.labels(),
            p.bins,
        );
        let path = out_dir.join(format!("hist_{j}.svg"));
        fs::write(&path, svg).map_err(|e| io_error(&path, e))?;
    }

    println!("explained {} samples x {} features", ds.len(), ds.dim());
    for (rank, &j) in ranking.order.iter().take(10).enumerate() {
        println!(
            "rank {:>2}: feature {j} ({}) mean importance {:.6}",
            rank + 1,
            ds.feature_names()[j],
            ranking.mean_importance[j]
        );
    }
    Ok(())
}

/// A constant column has no standardized difference; it is written as NaN.
fn smd_field(v: Result<f64>) -> Result<String> {
    match v {
        Ok(v) => Ok(v.to_string()),
        Err(Error::DegenerateSignal(_)) => Ok("NaN".into()),
        Err(e) => Err(e),
    }
}

// ------------------------------------------------------------------ select

fn select(p: &SelectParams, ranking: &Path, out: &Path) -> Result<()> {
    require_file(ranking)?;
    require_output(out)?;
    let r = read_ranking(ranking)?;
    let chosen = select_top(&r, p.fraction)?;
    let header = provenance("select", &[("ranking", show(ranking))], p);
    write_with_header(out, &header, &index_set_to_csv(&chosen))?;
    println!("selected {} of {} features", chosen.len(), r.dim());
    Ok(())
}

// ----------------------------------------------------------------- regress

fn safe_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn regress(p: &RegressParams, data: &Path, subset: Option<&Path>, out_dir: &Path) -> Result<()> {
    require_file(data)?;
    if let Some(s) = subset {
        require_file(s)?;
    }
    let cv = p.cv_config();
    cv.validate()?;
    let ds = read_dataset(data)?;
    let subset_idx = subset.map(read_index_set).transpose()?;
    let targets: Vec<String> = if p.targets.is_empty() {
        ds.targets().iter().map(|(n, _)| n.clone()).collect()
    } else {
        p.targets.clone()
    };
    if targets.is_empty() {
        return Err(Error::Input("dataset has no target columns".into()));
    }
    for t in &targets {
        ds.target(t)?;
    }
    create_dir(out_dir)?;
    let mut inputs = vec![("data", show(data))];
    if let Some(s) = subset {
        inputs.push(("subset", show(s)));
    }
    let resolved = RegressParams {
        targets: targets.clone(),
        ..p.clone()
    };
    let header = provenance("regress", &inputs, &resolved);

    let mut rows: Vec<(String, CvReport, Option<CvReport>)> = Vec::new();
    for t in &targets {
        let full = nested_cv(&ds, t, None, &cv)?;
        write_with_header(
            &out_dir.join(format!("cv_{}_full.csv", safe_name(t))),
            &header,
            &cv_report_to_csv(&full),
        )?;
        let selected = match &subset_idx {
            Some(idx) => {
                let r = nested_cv(&ds, t, Some(idx), &cv)?;
                write_with_header(
                    &out_dir.join(format!("cv_{}_selected.csv", safe_name(t))),
                    &header,
                    &cv_report_to_csv(&r),
                )?;
                Some(r)
            }
            None => None,
        };
        rows.push((t.clone(), full, selected));
    }

    let has_subset = subset_idx.is_some();
    let mut summary = String::from(if has_subset {
        "target,metric,full,selected\n"
    } else {
        "target,metric,full\n"
    });
    for (t, full, sel) in &rows {
        for (metric, f, s) in [
            ("mse", full.mean_mse, sel.as_ref().map(|r| r.mean_mse)),
            ("cor", full.mean_cor, sel.as_ref().map(|r| r.mean_cor)),
        ] {
            match s {
                Some(s) => summary.push_str(&format!("{t},{metric},{f},{s}\n")),
                None => summary.push_str(&format!("{t},{metric},{f}\n")),
            }
        }
    }
    write_with_header(&out_dir.join("summary.csv"), &header, &summary)?;

    let selected_label = subset_idx
        .as_ref()
        .map(|idx| format!("selected ({})", idx.len()));
    println!(
        "{:<16} {:<6} {:>14}{}",
        "target",
        "metric",
        format!("100% ({})", ds.dim()),
        selected_label
            .as_ref()
            .map(|l| format!(" {l:>16}"))
            .unwrap_or_default()
    );
    for (t, full, sel) in &rows {
        for (metric, f, s) in [
            ("MSE", full.mean_mse, sel.as_ref().map(|r| r.mean_mse)),
            ("Cor", full.mean_cor, sel.as_ref().map(|r| r.mean_cor)),
        ] {
            let name = if metric == "MSE" { t.as_str() } else { "" };
            print!("{name:<16} {metric:<6} {f:>14.4}");
            match s {
                Some(s) => println!(" {s:>16.4}"),
                None => println!(),
            }
        }
    }
    for (t, full, sel) in &rows {
        println!("chosen lambda per fold, {t}, full: {:?}", full.chosen_lambdas);
        if let Some(sel) = sel {
            println!("chosen lambda per fold, {t}, selected: {:?}", sel.chosen_lambdas);
        }
    }
    Ok(())
}

// ----------------------------------------------------------- plot-boundary

fn plot_boundary(p: &PlotParams, model: &Path, data: &Path, out: &Path) -> Result<()> {
    require_output(out)?;
    let (m, ds) = model_and_data(model, data)?;
    let header = provenance("plot-boundary", &[("model", show(model)), ("data", show(data))], p);
    let plot = boundary_figure(&header, &m, &ds, p.samples, p.margin)?;
    fs::write(out, &plot.svg).map_err(|e| io_error(out, e))?;
    println!(
        "side-count: {}/{} ({:.4}) on the side matching their label",
        plot.correct_side,
        plot.total,
        plot.correct_side as f64 / plot.total as f64
    );
    Ok(())
}

// ------------------------------------------------------------------ ingest

fn time_series_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| io_error(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Input(format!("no .csv files in {}", dir.display())));
    }
    Ok(files)
}

fn ingest(p: &IngestParams, dir: &Path, labels: Option<&Path>, out: &Path) -> Result<()> {
    if !dir.is_dir() {
        return Err(io_error(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    if let Some(l) = labels {
        require_file(l)?;
    }
    require_output(out)?;
    let files = time_series_files(dir)?;
    let table = labels.map(read_subject_table).transpose()?;
    let root = SeededRng::new(p.seed);

    let mut ids = Vec::new();
    let mut subject_rows = Vec::new();
    let mut values = Vec::new();
    let mut rois: Option<(usize, Vec<String>)> = None;
    for file in &files {
        let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let ts = read_time_series(file)?;
        match &rois {
            None => rois = Some((ts.rois(), ts.roi_names().to_vec())),
            Some((r, _)) if *r != ts.rois() => {
                return Err(Error::Input(format!(
                    "{} has {} ROIs, earlier files have {r}",
                    file.display(),
                    ts.rois()
                )))
            }
            Some(_) => {}
        }
        let subject_row = match &table {
            Some(t) => Some(t.position(&stem).ok_or_else(|| {
                Error::Input(format!("subject {stem:?} missing from the labels file"))
            })?),
            None => None,
        };
        let in_file = |e: Error| match e {
            Error::DegenerateSignal(m) => Error::DegenerateSignal(format!("{}: {m}", file.display())),
            other => other,
        };
        if p.copies == 0 {
            let v = vectorize_upper(&pearson_connectivity(&ts).map_err(in_file)?)?;
            ids.push(stem.clone());
            subject_rows.push(subject_row);
            values.extend(v.values);
        } else {
            let copies = bootstrap_connectivity(&ts, p.copies, p.block_len, &mut root.child(&stem)).map_err(in_file)?;
            for (k, v) in copies.into_iter().enumerate() {
                ids.push(format!("{stem}#b{k}"));
                subject_rows.push(subject_row);
                values.extend(v.values);
            }
        }
    }
    let (r, roi_names) = rois.expect("at least one file");
    let d = r * (r - 1) / 2;
    let names: Vec<String> = (0..r)
        .flat_map(|i| (i + 1..r).map(move |j| format!("c{}_{}", i + 1, j + 1)))
        .collect();
    let labels_out: Vec<u8> = subject_rows
        .iter()
        .map(|s| s.map_or(0, |k| table.as_ref().expect("table").labels[k]))
        .collect();
    let mut ds = LabeledDataset::new(DenseMatrix::new(ids.len(), d, values)?, labels_out)?
        .with_sample_ids(ids)?
        .with_feature_names(names)?;
    if let Some(t) = &table {
        for (name, tv) in &t.targets {
            let column = subject_rows.iter().map(|s| tv[s.expect("labelled")]).collect();
            ds = ds.with_target(name.clone(), column)?;
        }
    }

    let mut inputs = vec![("input_dir", show(dir))];
    if let Some(l) = labels {
        inputs.push(("labels", show(l)));
    }
    let mut header = provenance("ingest", &inputs, p);
    header.push(format!(
        "features: strict upper triangle of the {r} x {r} Pearson matrix, {d} columns"
    ));
    header.push("column c<i>_<j> (1-based ROIs, i < j) in row-major order: (1,2), (1,3), ..., (1,R), (2,3), ...".into());
    if table.is_none() {
        header.push("no labels file given: every label is 0".into());
    }
    for (k, name) in roi_names.iter().enumerate() {
        header.push(format!("roi {} = {name}", k + 1));
    }
    write_dataset(out, &ds, &header)?;
    println!(
        "{} subjects, {} rows, {r} ROIs, {d} features",
        files.len(),
        ds.len()
    );
    Ok(())
}

// -------------------------------------------------------------------- eval

fn eval(model: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    if let Some(o) = out {
        require_output(o)?;
    }
    let (m, ds) = model_and_data(model, data)?;
    let mut predicted = Vec::with_capacity(ds.len());
    for row in ds.features().row_iter() {
        predicted.push(m.predict(row)?);
    }
    let r = classification_metrics(&predicted, ds.labels())?;
    let body = format!(
        "metric,value\naccuracy,{}\nprecision,{}\nrecall,{}\nf1,{}\ntrue_positives,{}\ntrue_negatives,{}\nfalse_positives,{}\nfalse_negatives,{}\n",
        r.accuracy,
        r.precision,
        r.recall,
        r.f1,
        r.true_positives,
        r.true_negatives,
        r.false_positives,
        r.false_negatives
    );
    if let Some(o) = out {
        #[derive(serde::Serialize)]
        struct NoParams {}
        let header = provenance("eval", &[("model", show(model)), ("data", show(data))], &NoParams {});
        write_with_header(o, &header, &body)?;
    }
    print!("{}", body.replace(',', " = ").replacen("metric = value\n", "", 1));
    if r.degenerate {
        println!("note: precision or recall had an empty denominator and is reported as 0");
    }
    Ok(())
}
