//! Fitness and estimation tables, learning-curve files, and the
//! machine-readable aggregate dump they can be regenerated from.
//!
//! Machine output is CSV with full round-trip precision. Human output is an
//! aligned text table: fitness and parameters rounded half-to-even to four
//! decimals, MSE in `6.41E-07` notation. All output is a pure function of
//! the records, so identical aggregates give byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiment::{AggregateResult, GridEntry, NoiseLevel, NoiseReading, Role};
use crate::filters::{FilterParams, Variant};
use crate::signal_model::benchmark_spec;

pub const AGGREGATES_FILE: &str = "aggregates.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
    #[error("missing scenario: {0}")]
    Missing(String),
    #[error("malformed aggregates file: {0}")]
    Parse(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// One finished ensemble, in the form the reports consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub noise: NoiseLevel,
    pub role: Role,
    pub variant: Variant,
    pub mu1: f64,
    pub muf: f64,
    /// Iteration used for equal-convergence calibration, if calibrated.
    pub calibration_iteration: Option<u64>,
    pub aggregate: AggregateResult,
}

impl From<&GridEntry> for ResultRecord {
    fn from(e: &GridEntry) -> Self {
        Self {
            noise: e.noise,
            role: e.role,
            variant: e.params.variant(),
            mu1: e.params.mu1(),
            muf: e.params.muf(),
            calibration_iteration: e.calibration.map(|c| c.target_iteration),
            aggregate: e.aggregate.clone(),
        }
    }
}

impl ResultRecord {
    pub fn label(&self) -> String {
        match self.role {
            Role::Lms { eta } => format!("LMS(eta={eta})"),
            Role::Mflms { alpha, f, .. } => format!("mFLMS(f={f:.2}) alpha={alpha}"),
        }
    }

    pub fn is_lms(&self) -> bool {
        matches!(self.role, Role::Lms { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub title: String,
    pub column_headers: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Indices of the LMS reference rows.
    pub highlight_rows: Vec<usize>,
    /// Index of the first column printed in scientific notation, if any.
    pub scientific_from: Option<usize>,
}

/// Label used in file names and titles, e.g. `0.30`.
pub fn noise_tag(noise: &NoiseLevel) -> String {
    format!("{:.2}", noise.nominal)
}

fn noise_caption(noise: &NoiseLevel) -> String {
    match noise.reading {
        NoiseReading::Variance => format!("sigma^2 = {}", noise_tag(noise)),
        NoiseReading::Std => format!("sigma = {}", noise_tag(noise)),
    }
}

/// Distinct values, ascending.
fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = values.collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Records of one noise level in table order: per α block (ascending), the
/// mFLMS rows in ascending `f`, then the paired LMS row.
fn table_rows(records: &[ResultRecord]) -> Result<Vec<&ResultRecord>, ReportError> {
    let first = records.first().ok_or(ReportError::Empty)?;
    let nominal = first.noise.nominal;
    if let Some(r) = records.iter().find(|r| r.noise.nominal != nominal) {
        return Err(ReportError::Parse(format!(
            "table mixes noise levels {} and {}",
            noise_tag(&first.noise),
            noise_tag(&r.noise)
        )));
    }
    let mflms = || {
        records.iter().filter_map(|r| match r.role {
            Role::Mflms { alpha, f, paired_eta } => Some((r, alpha, f, paired_eta)),
            Role::Lms { .. } => None,
        })
    };
    let alphas = sorted_unique(mflms().map(|m| m.1));
    let fs = sorted_unique(mflms().map(|m| m.2));
    if alphas.is_empty() {
        return Err(ReportError::Missing(format!(
            "no mFLMS results for noise level {}",
            noise_tag(&first.noise)
        )));
    }

    let mut rows = Vec::new();
    for &alpha in &alphas {
        let mut eta = None;
        for &f in &fs {
            let (rec, _, _, paired) = mflms()
                .find(|m| m.1 == alpha && m.2 == f)
                .ok_or_else(|| ReportError::Missing(format!("mFLMS(f={f}) alpha={alpha}")))?;
            eta = Some(paired);
            rows.push(rec);
        }
        let eta = eta.expect("fs is non-empty");
        let lms = records
            .iter()
            .find(|r| r.role == Role::Lms { eta })
            .ok_or_else(|| ReportError::Missing(format!("LMS(eta={eta})")))?;
        rows.push(lms);
    }
    Ok(rows)
}

/// Ensemble-mean fitness at every checkpoint, one row per algorithm.
pub fn fitness_table(records: &[ResultRecord]) -> Result<ReportTable, ReportError> {
    let rows = table_rows(records)?;
    let checkpoints = rows[0].aggregate.checkpoints.clone();
    if let Some(r) = rows.iter().find(|r| r.aggregate.checkpoints != checkpoints) {
        return Err(ReportError::Parse(format!("{} has different checkpoints", r.label())));
    }
    Ok(ReportTable {
        title: format!("Fitness (mean NWD) at checkpoints, {}", noise_caption(&rows[0].noise)),
        column_headers: checkpoints.iter().map(u64::to_string).collect(),
        highlight_rows: (0..rows.len()).filter(|&i| rows[i].is_lms()).collect(),
        rows: rows
            .iter()
            .map(|r| ReportRow {
                label: r.label(),
                values: r.aggregate.mean_nwd_at_checkpoints.clone(),
            })
            .collect(),
        scientific_from: None,
    })
}

/// Mean final (a, φ) estimates and MSE-of-mean, with a trailing truth row.
pub fn estimation_table(records: &[ResultRecord]) -> Result<ReportTable, ReportError> {
    let rows = table_rows(records)?;
    let (_, truth) = benchmark_spec(0.0).expect("benchmark is valid");
    let dim = truth.theta_aphi.len();
    let mut column_headers: Vec<String> = (1..=dim).map(|i| format!("theta{i}")).collect();
    column_headers.push("MSE".into());

    let mut out_rows: Vec<ReportRow> = rows
        .iter()
        .map(|r| {
            let mut values = r.aggregate.mean_final_theta_aphi.clone();
            values.push(r.aggregate.mse_of_mean);
            ReportRow { label: r.label(), values }
        })
        .collect();
    if let Some(r) = out_rows.iter().find(|r| r.values.len() != dim + 1) {
        return Err(ReportError::Parse(format!("{} has the wrong parameter count", r.label)));
    }
    let mut truth_row = truth.theta_aphi;
    truth_row.push(0.0);
    out_rows.push(ReportRow {
        label: "True values".into(),
        values: truth_row,
    });
    Ok(ReportTable {
        title: format!("Estimated parameters and MSE, {}", noise_caption(&rows[0].noise)),
        column_headers,
        highlight_rows: (0..rows.len()).filter(|&i| rows[i].is_lms()).collect(),
        rows: out_rows,
        scientific_from: Some(dim),
    })
}

/// `iteration,<series…>` with one row per checkpoint.
pub fn learning_curves(records: &[ResultRecord]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let Some(first) = records.first() else {
        wtr.write_record(["iteration"]).expect("in-memory write");
        return String::from_utf8(wtr.into_inner().expect("in-memory")).expect("utf8");
    };
    let mut header = vec!["iteration".to_string()];
    header.extend(records.iter().map(ResultRecord::label));
    wtr.write_record(&header).expect("in-memory write");
    for it in &first.aggregate.checkpoints {
        let mut row = vec![it.to_string()];
        for r in records {
            let agg = &r.aggregate;
            let cell = agg
                .checkpoints
                .iter()
                .position(|c| c == it)
                .map(|j| agg.mean_nwd_at_checkpoints[j].to_string())
                .unwrap_or_default();
            row.push(cell);
        }
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory")).expect("utf8")
}

impl ReportTable {
    /// `method,<headers…>` with full-precision values.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.column_headers.iter().cloned());
        wtr.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = vec![row.label.clone()];
            rec.extend(row.values.iter().map(f64::to_string));
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory")).expect("utf8")
    }

    /// Aligned plain-text rendering; highlighted rows are starred.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                row.values
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| match self.scientific_from {
                        Some(s) if j >= s => format_scientific(v),
                        _ => format_fixed4(v),
                    })
                    .collect()
            })
            .collect();
        let labels: Vec<String> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mark = if self.highlight_rows.contains(&i) { "* " } else { "  " };
                format!("{mark}{}", r.label)
            })
            .collect();

        let label_width = labels.iter().map(String::len).max().unwrap_or(0).max("Method".len() + 2);
        let widths: Vec<usize> = self
            .column_headers
            .iter()
            .enumerate()
            .map(|(j, h)| cells.iter().map(|c| c[j].len()).chain([h.len()]).max().unwrap_or(0))
            .collect();

        let mut out = String::new();
        out.push_str(&self.title);
        out.push('\n');
        let mut line = format!("{:<label_width$}", "  Method");
        for (h, w) in self.column_headers.iter().zip(&widths) {
            line.push_str(&format!("  {h:>w$}"));
        }
        out.push_str(line.trim_end());
        out.push('\n');
        out.push_str(&"-".repeat(line.trim_end().len()));
        out.push('\n');
        for (label, row) in labels.iter().zip(&cells) {
            let mut line = format!("{label:<label_width$}");
            for (c, w) in row.iter().zip(&widths) {
                line.push_str(&format!("  {c:>w$}"));
            }
            out.push_str(&line);
            out.push('\n');
        }
        if !self.highlight_rows.is_empty() {
            out.push_str("* paired LMS reference\n");
        }
        out
    }
}

/// Four decimals, ties to even.
pub fn format_fixed4(v: f64) -> String {
    format!("{v:.4}")
}

/// Two-decimal mantissa with a signed two-digit exponent, e.g. `6.41E-07`.
pub fn format_scientific(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

// ---------------------------------------------------------------------------
// aggregates.csv

const FIXED_COLUMNS: [&str; 15] = [
    "noise_level",
    "noise_reading",
    "noise_std",
    "role",
    "variant",
    "alpha",
    "f",
    "eta",
    "mu1",
    "muf",
    "calibration_iteration",
    "n_runs",
    "divergence_count",
    "mse_of_mean",
    "mean_per_run_mse",
];

/// Serialises records; every record must share checkpoints and dimension.
pub fn aggregates_csv(records: &[ResultRecord]) -> Result<String, ReportError> {
    let first = records.first().ok_or(ReportError::Empty)?;
    let checkpoints = &first.aggregate.checkpoints;
    let dim = first.aggregate.mean_final_theta_aphi.len();
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=dim).map(|i| format!("theta{i}")));
    header.extend(checkpoints.iter().map(|c| format!("nwd_{c}")));
    wtr.write_record(&header)?;

    for r in records {
        let agg = &r.aggregate;
        if &agg.checkpoints != checkpoints || agg.mean_final_theta_aphi.len() != dim {
            return Err(ReportError::Parse(format!("{} does not share the layout", r.label())));
        }
        let (role, alpha, f, eta) = match r.role {
            Role::Lms { eta } => ("lms", String::new(), String::new(), eta),
            Role::Mflms { alpha, f, paired_eta } => ("mflms", alpha.to_string(), f.to_string(), paired_eta),
        };
        let mut rec = vec![
            r.noise.nominal.to_string(),
            r.noise.reading.to_string(),
            r.noise.sigma().to_string(),
            role.to_string(),
            r.variant.to_string(),
            alpha,
            f,
            eta.to_string(),
            r.mu1.to_string(),
            r.muf.to_string(),
            r.calibration_iteration.map(|c| c.to_string()).unwrap_or_default(),
            agg.n_runs.to_string(),
            agg.divergence_count.to_string(),
            agg.mse_of_mean.to_string(),
            agg.mean_per_run_mse.to_string(),
        ];
        rec.extend(agg.mean_final_theta_aphi.iter().map(f64::to_string));
        rec.extend(agg.mean_nwd_at_checkpoints.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    let bytes = wtr.into_inner().map_err(|e| ReportError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf8"))
}

/// Inverse of [`aggregates_csv`].
pub fn parse_aggregates(text: &str) -> Result<Vec<ResultRecord>, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < FIXED_COLUMNS.len() || cols[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(ReportError::Parse("unexpected header".into()));
    }
    let theta_cols = cols.iter().filter(|c| c.starts_with("theta")).count();
    let checkpoints: Vec<u64> = cols
        .iter()
        .filter_map(|c| c.strip_prefix("nwd_"))
        .map(|c| c.parse().map_err(|_| ReportError::Parse(format!("bad checkpoint column `nwd_{c}`"))))
        .collect::<Result<_, _>>()?;
    if FIXED_COLUMNS.len() + theta_cols + checkpoints.len() != cols.len() {
        return Err(ReportError::Parse("unexpected columns".into()));
    }

    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = line + 2;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64, ReportError> {
            field(i)
                .parse::<f64>()
                .map_err(|_| ReportError::Parse(format!("row {row}: `{}` in column {}", field(i), cols[i])))
        };
        let int = |i: usize| -> Result<u64, ReportError> {
            field(i)
                .parse::<u64>()
                .map_err(|_| ReportError::Parse(format!("row {row}: `{}` in column {}", field(i), cols[i])))
        };
        let reading: NoiseReading = field(1)
            .parse()
            .map_err(|_| ReportError::Parse(format!("row {row}: bad noise reading")))?;
        let role = match field(3) {
            "lms" => Role::Lms { eta: num(7)? },
            "mflms" => Role::Mflms {
                alpha: num(5)?,
                f: num(6)?,
                paired_eta: num(7)?,
            },
            other => return Err(ReportError::Parse(format!("row {row}: unknown role `{other}`"))),
        };
        let variant: Variant = field(4)
            .parse()
            .map_err(|_| ReportError::Parse(format!("row {row}: bad variant")))?;
        let calibration_iteration = match field(10) {
            "" => None,
            _ => Some(int(10)?),
        };
        let base = FIXED_COLUMNS.len();
        let aggregate = AggregateResult {
            checkpoints: checkpoints.clone(),
            mean_nwd_at_checkpoints: (0..checkpoints.len())
                .map(|j| num(base + theta_cols + j))
                .collect::<Result<_, _>>()?,
            mean_final_theta_aphi: (0..theta_cols).map(|j| num(base + j)).collect::<Result<_, _>>()?,
            mse_of_mean: num(13)?,
            mean_per_run_mse: num(14)?,
            divergence_count: int(12)? as usize,
            n_runs: int(11)? as usize,
        };
        out.push(ResultRecord {
            noise: NoiseLevel::new(num(0)?, reading),
            role,
            variant,
            mu1: num(8)?,
            muf: num(9)?,
            calibration_iteration,
            aggregate,
        });
    }
    Ok(out)
}

/// Single-scenario aggregate: one header line, one data line.
pub fn run_csv(params: &FilterParams, noise: &NoiseLevel, agg: &AggregateResult) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "variant",
        "mu1",
        "muf",
        "f",
        "alpha",
        "noise_level",
        "noise_reading",
        "noise_std",
        "n_runs",
        "divergence_count",
        "mse_of_mean",
        "mean_per_run_mse",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=agg.mean_final_theta_aphi.len()).map(|i| format!("theta{i}")));
    header.extend(agg.checkpoints.iter().map(|c| format!("nwd_{c}")));
    let mut rec = vec![
        params.variant().to_string(),
        params.mu1().to_string(),
        params.muf().to_string(),
        params.f().to_string(),
        params.alpha().to_string(),
        noise.nominal.to_string(),
        noise.reading.to_string(),
        noise.sigma().to_string(),
        agg.n_runs.to_string(),
        agg.divergence_count.to_string(),
        agg.mse_of_mean.to_string(),
        agg.mean_per_run_mse.to_string(),
    ];
    rec.extend(agg.mean_final_theta_aphi.iter().map(f64::to_string));
    rec.extend(agg.mean_nwd_at_checkpoints.iter().map(f64::to_string));
    wtr.write_record(&header).expect("in-memory write");
    wtr.write_record(&rec).expect("in-memory write");
    String::from_utf8(wtr.into_inner().expect("in-memory")).expect("utf8")
}

// ---------------------------------------------------------------------------
// output trees

pub(crate) fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ReportError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| ReportError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Groups records by nominal noise level, preserving first-seen order.
fn by_noise(records: &[ResultRecord]) -> Vec<Vec<ResultRecord>> {
    let mut order: Vec<f64> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<ResultRecord>> = BTreeMap::new();
    for r in records {
        let idx = match order.iter().position(|&n| n == r.noise.nominal) {
            Some(i) => i,
            None => {
                order.push(r.noise.nominal);
                order.len() - 1
            }
        };
        groups.entry(idx).or_default().push(r.clone());
    }
    groups.into_values().collect()
}

/// Writes fitness and estimation tables (CSV and text) for every noise
/// level and one learning-curve file per (noise, f) panel. Returns the
/// written paths in order.
pub fn write_reports(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for group in by_noise(records) {
        let tag = noise_tag(&group[0].noise);
        let fitness = fitness_table(&group)?;
        written.push(write(dir, &format!("fitness_sigma{tag}.csv"), &fitness.to_csv())?);
        written.push(write(dir, &format!("fitness_sigma{tag}.txt"), &fitness.to_text())?);
        let estimation = estimation_table(&group)?;
        written.push(write(dir, &format!("estimation_sigma{tag}.csv"), &estimation.to_csv())?);
        written.push(write(dir, &format!("estimation_sigma{tag}.txt"), &estimation.to_text())?);

        let rows = table_rows(&group)?;
        let fs = sorted_unique(rows.iter().filter_map(|r| match r.role {
            Role::Mflms { f, .. } => Some(f),
            Role::Lms { .. } => None,
        }));
        for f in fs {
            // per α block: the mFLMS series at this f, then its paired LMS
            let panel: Vec<ResultRecord> = rows
                .iter()
                .filter(|r| match r.role {
                    Role::Mflms { f: rf, .. } => rf == f,
                    Role::Lms { .. } => true,
                })
                .map(|r| (*r).clone())
                .collect();
            written.push(write(
                dir,
                &format!("curves_sigma{tag}_f{f:.2}.csv"),
                &learning_curves(&panel),
            )?);
        }
    }
    Ok(written)
}

/// Writes `aggregates.csv` plus everything [`write_reports`] produces.
pub fn write_grid_outputs(records: &[ResultRecord], dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = vec![write(dir, AGGREGATES_FILE, &aggregates_csv(records)?)?];
    written.extend(write_reports(records, dir)?);
    Ok(written)
}

pub fn read_aggregates(path: &Path) -> Result<Vec<ResultRecord>, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_aggregates(&text)
}
