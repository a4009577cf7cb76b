//! File formats.
//!
//! Tabular files are CSV with optional leading `#` comment lines (used to
//! record the producing command, its configuration and seed). Floats are
//! written in Rust's shortest round-trip form, so reading a file back gives
//! bit-identical values and rewriting it gives identical bytes.
//!
//! * dataset: `subject_id,label[,target_<name>…],<feature>…`
//! * time series: header of ROI names, one row per timepoint
//! * ranking: `feature_index,mean_importance,rank`
//! * index set: `feature_index`, one index per row, in rank order
//! * subject table: `subject_id,label[,target_<name>…]`
//! * model: TOML document with a `format_version` key

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, TimeSeriesTable};
use crate::error::{Error, Result};
use crate::interpret::{Explanation, ImportanceRanking};
use crate::linalg::DenseMatrix;
use crate::net::{CouplingBlock, InvNetModel, Subnet};
use crate::validation::CvReport;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const TARGET_PREFIX: &str = "target_";

fn comment_block(header: &[String]) -> String {
    let mut s = String::new();
    for line in header {
        for part in line.lines() {
            s.push_str("# ");
            s.push_str(part);
            s.push('\n');
        }
    }
    s
}

/// Writes `body` preceded by `header` as `#` comments.
pub fn write_with_header(path: &Path, header: &[String], body: &str) -> Result<()> {
    let mut s = comment_block(header);
    s.push_str(body);
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Data rows as `(line number, fields)`.
type Rows = Vec<(usize, Vec<String>)>;

/// Header and data rows, with comments skipped.
fn csv_rows(path: &Path) -> Result<(Vec<String>, Rows)> {
    let text = read_text(path)?;
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            file: file.clone(),
            row: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(|f| f.trim().to_string()).collect();
        match &header {
            None => header = Some(fields),
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(Error::Parse {
                        file: file.clone(),
                        row: line,
                        column: fields.len().min(h.len()) + 1,
                        message: format!("expected {} fields, found {}", h.len(), fields.len()),
                    });
                }
                rows.push((line, fields));
            }
        }
    }
    let header = header.ok_or_else(|| Error::Parse {
        file,
        row: 1,
        column: 1,
        message: "missing header row".into(),
    })?;
    Ok((header, rows))
}

fn parse_f64(file: &Path, row: usize, column: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            file: file.display().to_string(),
            row,
            column,
            message: format!("expected a finite number, found {field:?}"),
        }),
    }
}

fn parse_usize(file: &Path, row: usize, column: usize, field: &str) -> Result<usize> {
    field.parse::<usize>().map_err(|_| Error::Parse {
        file: file.display().to_string(),
        row,
        column,
        message: format!("expected a non-negative integer, found {field:?}"),
    })
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(fields.into_iter().collect::<Vec<_>>())
        .expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

// ---------------------------------------------------------------- datasets

pub fn dataset_to_csv(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    let head = ["subject_id".to_string(), "label".to_string()]
        .into_iter()
        .chain(ds.targets().iter().map(|(n, _)| format!("{TARGET_PREFIX}{n}")))
        .chain(ds.feature_names().iter().cloned());
    out.push_str(&csv_line(head));
    for i in 0..ds.len() {
        let fields = [ds.sample_ids()[i].clone(), ds.labels()[i].to_string()]
            .into_iter()
            .chain(ds.targets().iter().map(|(_, v)| v[i].to_string()))
            .chain(ds.features().row(i).iter().map(f64::to_string));
        out.push_str(&csv_line(fields));
    }
    out
}

pub fn write_dataset(path: &Path, ds: &LabeledDataset, header: &[String]) -> Result<()> {
    write_with_header(path, header, &dataset_to_csv(ds))
}

pub fn read_dataset(path: &Path) -> Result<LabeledDataset> {
    let (header, rows) = csv_rows(path)?;
    let file = path.display().to_string();
    let bad_header = |column: usize, message: String| Error::Parse {
        file: file.clone(),
        row: 1,
        column,
        message,
    };
    if header.len() < 3 || header[0] != "subject_id" || header[1] != "label" {
        return Err(bad_header(
            1,
            "header must start with subject_id,label and name at least one feature column".into(),
        ));
    }
    let n_targets = header[2..]
        .iter()
        .take_while(|h| h.starts_with(TARGET_PREFIX))
        .count();
    let feature_start = 2 + n_targets;
    if let Some(pos) = header[feature_start..].iter().position(|h| h.starts_with(TARGET_PREFIX)) {
        return Err(bad_header(
            feature_start + pos + 1,
            "target columns must precede all feature columns".into(),
        ));
    }
    if feature_start == header.len() {
        return Err(bad_header(header.len(), "no feature columns".into()));
    }
    let d = header.len() - feature_start;
    let mut ids = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    let mut targets = vec![Vec::with_capacity(rows.len()); n_targets];
    let mut values = Vec::with_capacity(rows.len() * d);
    for (line, fields) in &rows {
        ids.push(fields[0].clone());
        let label = match fields[1].as_str() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    file: file.clone(),
                    row: *line,
                    column: 2,
                    message: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        };
        labels.push(label);
        for (t, col) in targets.iter_mut().zip(2..feature_start) {
            t.push(parse_f64(path, *line, col + 1, &fields[col])?);
        }
        for (col, field) in fields.iter().enumerate().skip(feature_start) {
            values.push(parse_f64(path, *line, col + 1, field)?);
        }
    }
    let features = DenseMatrix::new(rows.len(), d, values)?;
    let mut ds = LabeledDataset::new(features, labels)?
        .with_sample_ids(ids)?
        .with_feature_names(header[feature_start..].to_vec())?;
    for (name, values) in header[2..feature_start].iter().zip(targets) {
        ds = ds.with_target(&name[TARGET_PREFIX.len()..], values)?;
    }
    Ok(ds)
}

// -------------------------------------------------------- subject tables

/// Per-subject labels and optional targets keyed by subject id.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTable {
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub targets: Vec<(String, Vec<f64>)>,
}

impl SubjectTable {
    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }
}

/// Reads `subject_id,label[,target_<name>…]`.
pub fn read_subject_table(path: &Path) -> Result<SubjectTable> {
    let (header, rows) = csv_rows(path)?;
    let file = path.display().to_string();
    if header.len() < 2 || header[0] != "subject_id" || header[1] != "label" {
        return Err(Error::Parse {
            file,
            row: 1,
            column: 1,
            message: "header must start with subject_id,label".into(),
        });
    }
    if let Some(pos) = header[2..].iter().position(|h| !h.starts_with(TARGET_PREFIX)) {
        return Err(Error::Parse {
            file,
            row: 1,
            column: pos + 3,
            message: format!("extra columns must be named {TARGET_PREFIX}<name>"),
        });
    }
    let mut table = SubjectTable {
        ids: Vec::with_capacity(rows.len()),
        labels: Vec::with_capacity(rows.len()),
        targets: header[2..]
            .iter()
            .map(|h| (h[TARGET_PREFIX.len()..].to_string(), Vec::with_capacity(rows.len())))
            .collect(),
    };
    for (line, fields) in &rows {
        if table.position(&fields[0]).is_some() {
            return Err(Error::Parse {
                file,
                row: *line,
                column: 1,
                message: format!("duplicate subject id {:?}", fields[0]),
            });
        }
        table.ids.push(fields[0].clone());
        table.labels.push(match fields[1].as_str() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    file,
                    row: *line,
                    column: 2,
                    message: format!("label must be 0 or 1, found {other:?}"),
                })
            }
        });
        for (k, (_, values)) in table.targets.iter_mut().enumerate() {
            values.push(parse_f64(path, *line, k + 3, &fields[k + 2])?);
        }
    }
    Ok(table)
}

// ------------------------------------------------------------- time series

pub fn read_time_series(path: &Path) -> Result<TimeSeriesTable> {
    let (header, rows) = csv_rows(path)?;
    let mut values = Vec::with_capacity(rows.len() * header.len());
    for (line, fields) in &rows {
        for (col, field) in fields.iter().enumerate() {
            values.push(parse_f64(path, *line, col + 1, field)?);
        }
    }
    TimeSeriesTable::new(DenseMatrix::new(rows.len(), header.len(), values)?, header)
}

pub fn time_series_to_csv(ts: &TimeSeriesTable) -> String {
    let mut out = csv_line(ts.roi_names().iter().cloned());
    for row in ts.values().row_iter() {
        out.push_str(&csv_line(row.iter().map(f64::to_string)));
    }
    out
}

// ------------------------------------------------------ rankings and sets

pub fn ranking_to_csv(r: &ImportanceRanking) -> String {
    let ranks = r.ranks();
    let mut out = String::from("feature_index,mean_importance,rank\n");
    for (j, (v, rank)) in r.mean_importance.iter().zip(ranks).enumerate() {
        out.push_str(&format!("{j},{v},{rank}\n"));
    }
    out
}

pub fn read_ranking(path: &Path) -> Result<ImportanceRanking> {
    let (header, rows) = csv_rows(path)?;
    if header != ["feature_index", "mean_importance", "rank"] {
        return Err(Error::Parse {
            file: path.display().to_string(),
            row: 1,
            column: 1,
            message: "expected header feature_index,mean_importance,rank".into(),
        });
    }
    let d = rows.len();
    let mut scores = vec![f64::NAN; d];
    let mut ranks = vec![0usize; d];
    for (line, f) in &rows {
        let j = parse_usize(path, *line, 1, &f[0])?;
        if j >= d || !scores[j].is_nan() {
            return Err(Error::Parse {
                file: path.display().to_string(),
                row: *line,
                column: 1,
                message: format!("feature index {j} is out of range or repeated"),
            });
        }
        scores[j] = parse_f64(path, *line, 2, &f[1])?;
        ranks[j] = parse_usize(path, *line, 3, &f[2])?;
    }
    let ranking = ImportanceRanking::from_scores(scores)?;
    if ranking.ranks() != ranks {
        return Err(Error::Format(format!(
            "{}: rank column disagrees with the importance order",
            path.display()
        )));
    }
    Ok(ranking)
}

pub fn index_set_to_csv(indices: &[usize]) -> String {
    let mut out = String::from("feature_index\n");
    for j in indices {
        out.push_str(&format!("{j}\n"));
    }
    out
}

pub fn read_index_set(path: &Path) -> Result<Vec<usize>> {
    let (header, rows) = csv_rows(path)?;
    if header != ["feature_index"] {
        return Err(Error::Parse {
            file: path.display().to_string(),
            row: 1,
            column: 1,
            message: "expected header feature_index".into(),
        });
    }
    rows.iter()
        .map(|(line, f)| parse_usize(path, *line, 1, &f[0]))
        .collect()
}

// ----------------------------------------------------------- explanations

/// Long-format per-sample export:
/// `subject_id,feature_index,x,x_p,explanation,importance`.
pub fn explanations_to_csv(ids: &[String], explanations: &[Explanation]) -> String {
    let mut out = String::from("subject_id,feature_index,x,x_p,explanation,importance\n");
    for (id, e) in ids.iter().zip(explanations) {
        let id = csv_line([id.clone()]);
        let id = id.trim_end();
        for j in 0..e.x.len() {
            out.push_str(&format!(
                "{id},{j},{},{},{},{}\n",
                e.x[j], e.x_p[j], e.explanation[j], e.importance[j]
            ));
        }
    }
    out
}

pub fn loss_history_to_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (e, l) in history.iter().enumerate() {
        out.push_str(&format!("{},{l}\n", e + 1));
    }
    out
}

/// Per-fold rows plus a final `mean` row.
pub fn cv_report_to_csv(report: &CvReport) -> String {
    let mut out = String::from("fold,mse,cor,lambda\n");
    for (f, ((m, c), l)) in report
        .fold_mse
        .iter()
        .zip(&report.fold_cor)
        .zip(&report.chosen_lambdas)
        .enumerate()
    {
        out.push_str(&format!("{},{m},{c},{l}\n", f + 1));
    }
    out.push_str(&format!("mean,{},{},\n", report.mean_mse, report.mean_cor));
    out
}

// ------------------------------------------------------------------ models

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubnetFile {
    w1: MatrixFile,
    b1: Vec<f64>,
    w2: MatrixFile,
    b2: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockFile {
    f: SubnetFile,
    g: SubnetFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    input_dim: usize,
    padded: bool,
    classifier_bias: f64,
    classifier_weights: Vec<f64>,
    blocks: Vec<BlockFile>,
}

fn matrix_file(m: &DenseMatrix) -> MatrixFile {
    MatrixFile {
        rows: m.rows(),
        cols: m.cols(),
        values: m.values().to_vec(),
    }
}

fn subnet_file(s: &Subnet) -> SubnetFile {
    SubnetFile {
        w1: matrix_file(s.w1()),
        b1: s.b1().to_vec(),
        w2: matrix_file(s.w2()),
        b2: s.b2().to_vec(),
    }
}

fn subnet_from(f: SubnetFile) -> Result<Subnet> {
    Subnet::new(
        DenseMatrix::new(f.w1.rows, f.w1.cols, f.w1.values)?,
        f.b1,
        DenseMatrix::new(f.w2.rows, f.w2.cols, f.w2.values)?,
        f.b2,
    )
}

pub fn model_to_toml(model: &InvNetModel) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        input_dim: model.input_dim(),
        padded: model.padded(),
        classifier_bias: model.bias(),
        classifier_weights: model.weights().to_vec(),
        blocks: model
            .blocks()
            .iter()
            .map(|b| BlockFile {
                f: subnet_file(b.f()),
                g: subnet_file(b.g()),
            })
            .collect(),
    };
    toml::to_string(&file).expect("model fields are plain data")
}

pub fn model_from_toml(text: &str) -> Result<InvNetModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
            file.format_version
        )));
    }
    let blocks = file
        .blocks
        .into_iter()
        .map(|b| CouplingBlock::new(subnet_from(b.f)?, subnet_from(b.g)?))
        .collect::<Result<Vec<_>>>()?;
    let model = InvNetModel::new(file.input_dim, blocks, file.classifier_weights, file.classifier_bias)?;
    if model.padded() != file.padded {
        return Err(Error::Format(format!(
            "padded flag {} contradicts input_dim {}",
            file.padded, file.input_dim
        )));
    }
    Ok(model)
}

pub fn write_model(path: &Path, model: &InvNetModel, header: &[String]) -> Result<()> {
    write_with_header(path, header, &model_to_toml(model))
}

pub fn read_model(path: &Path) -> Result<InvNetModel> {
    model_from_toml(&read_text(path)?)
}
