//! Significance tables and Markdown/SVG reports built from `results.csv`.
//!
//! For each model and metric, the Wilcoxon test pairs every
//! (dataset, scaler) value against the same dataset's baseline value, and
//! the Friedman test ranks all scalers within each dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::metrics::METRIC_NAMES;
use crate::models::ModelKind;
use crate::runner::RunRecord;
use crate::scaling::ScalerKind;
use crate::stats::{friedman, wilcoxon_signed_rank, TestOutcome};

pub use crate::runner::read_results;

/// One row of a significance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub model: String,
    pub metric: String,
    pub wilcoxon: Option<TestOutcome>,
    pub friedman: Option<TestOutcome>,
    /// Why a test was skipped, if it was.
    pub notes: Vec<String>,
}

pub const TABLE_HEADER: [&str; 7] = [
    "Model",
    "Wilcoxon stat",
    "Wilcoxon p",
    "Wilcoxon sig.",
    "Friedman stat",
    "Friedman p",
    "Friedman sig.",
];

pub fn yes_no(significant: bool) -> &'static str {
    if significant {
        "Yes"
    } else {
        "No"
    }
}

fn outcome_cells(outcome: &Option<TestOutcome>) -> [String; 3] {
    match outcome {
        Some(t) => [
            format!("{:.4}", t.statistic),
            format!("{:.4}", t.p_value),
            yes_no(t.significant).to_owned(),
        ],
        None => ["-".to_owned(), "-".to_owned(), "-".to_owned()],
    }
}

impl SignificanceRow {
    /// Model, then statistic, p and Yes/No for Wilcoxon and for Friedman.
    pub fn cells(&self) -> Vec<String> {
        let mut cells = vec![self.model.clone()];
        cells.extend(outcome_cells(&self.wilcoxon));
        cells.extend(outcome_cells(&self.friedman));
        cells
    }

    /// `Model & stat & p & Yes/No & stat & p & Yes/No`.
    pub fn table_line(&self) -> String {
        self.cells().join(" & ")
    }
}

fn model_rank(name: &str) -> (usize, String) {
    let pos = ModelKind::ALL
        .iter()
        .position(|k| k.name() == name)
        .unwrap_or(usize::MAX);
    (pos, name.to_owned())
}

fn scaler_rank(name: &str) -> (usize, String) {
    let pos = ScalerKind::ALL
        .iter()
        .position(|k| k.abbreviation() == name)
        .unwrap_or(usize::MAX);
    (pos, name.to_owned())
}

/// Metric values of successful cells keyed by (model, dataset, scaler).
/// Model and scaler keys carry their canonical rank so iteration follows
/// the usual order regardless of file row order.
type ValueTable = BTreeMap<(usize, String), BTreeMap<String, BTreeMap<(usize, String), f64>>>;

fn value_table(records: &[RunRecord], metric: &str) -> Result<ValueTable> {
    let mut table = ValueTable::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        let Some(v) = r.metric(metric) else { continue };
        let slot = table
            .entry(model_rank(&r.model))
            .or_default()
            .entry(r.dataset.clone())
            .or_default();
        if slot.insert(scaler_rank(&r.scaler), v).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate record for {}/{}/{}",
                r.dataset, r.model, r.scaler
            )));
        }
    }
    Ok(table)
}

/// One [`SignificanceRow`] per model that has values for `metric`.
/// Skipped tests leave the outcome empty and explain why in `notes`.
pub fn aggregate_significance(
    records: &[RunRecord],
    metric: &str,
    baseline: &str,
    alpha: f64,
) -> Result<Vec<SignificanceRow>> {
    if !METRIC_NAMES.contains(&metric) {
        return Err(Error::InvalidInput(format!(
            "unknown metric {metric:?} (expected one of {})",
            METRIC_NAMES.join(", ")
        )));
    }
    let table = value_table(records, metric)?;
    let baseline_key = scaler_rank(baseline);
    let mut rows = Vec::new();
    for ((_, model), by_dataset) in &table {
        let mut notes = Vec::new();
        let scalers: BTreeSet<&(usize, String)> =
            by_dataset.values().flat_map(|m| m.keys()).collect();

        let (mut a, mut b) = (Vec::new(), Vec::new());
        for values in by_dataset.values() {
            let Some(&base) = values.get(&baseline_key) else {
                continue;
            };
            for (scaler, &v) in values {
                if *scaler != baseline_key {
                    a.push(v);
                    b.push(base);
                }
            }
        }
        let wilcoxon = if a.is_empty() {
            notes.push(format!(
                "Wilcoxon skipped: no values paired with baseline {baseline}"
            ));
            None
        } else {
            Some(wilcoxon_signed_rank(&a, &b, alpha)?)
        };

        let k = scalers.len();
        let blocks: Vec<Vec<f64>> = by_dataset
            .values()
            .filter(|values| scalers.iter().all(|s| values.contains_key(*s)))
            .map(|values| scalers.iter().map(|s| values[*s]).collect())
            .collect();
        let friedman = if k < 3 {
            notes.push(format!("Friedman skipped: {k} scalers, need at least 3"));
            None
        } else if blocks.len() < 2 {
            notes.push(format!(
                "Friedman skipped: {} complete dataset(s), need at least 2",
                blocks.len()
            ));
            None
        } else {
            let flat: Vec<f64> = blocks.iter().flatten().copied().collect();
            let matrix =
                Array2::from_shape_vec((blocks.len(), k), flat).expect("rectangular blocks");
            Some(friedman(matrix.view(), alpha)?)
        };

        rows.push(SignificanceRow {
            model: model.clone(),
            metric: metric.to_owned(),
            wilcoxon,
            friedman,
            notes,
        });
    }
    Ok(rows)
}

/// Header plus one `&`-separated line per row.
pub fn render_table_lines(rows: &[SignificanceRow]) -> String {
    let mut out = TABLE_HEADER.join(" & ");
    out.push('\n');
    for row in rows {
        out.push_str(&row.table_line());
        out.push('\n');
    }
    out
}

fn markdown_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

/// Metrics reported for each task.
pub fn task_metrics(task: Task) -> &'static [&'static str] {
    match task {
        Task::Classification => &["accuracy"],
        Task::Regression => &["mae", "mse", "r2"],
    }
}

/// Whether larger values of `metric` are better.
pub fn higher_is_better(metric: &str) -> bool {
    matches!(metric, "accuracy" | "r2")
}

#[derive(Debug, Clone)]
pub struct MetricSection {
    pub task: Task,
    pub metric: String,
    pub rows: Vec<SignificanceRow>,
}

/// Significance rows for every metric that has values, classification
/// before regression.
pub fn build_sections(
    records: &[RunRecord],
    baseline: &str,
    alpha: f64,
) -> Result<Vec<MetricSection>> {
    let mut sections = Vec::new();
    for task in [Task::Classification, Task::Regression] {
        let of_task: Vec<RunRecord> = records.iter().filter(|r| r.task == task).cloned().collect();
        for &metric in task_metrics(task) {
            let rows = aggregate_significance(&of_task, metric, baseline, alpha)?;
            if !rows.is_empty() {
                sections.push(MetricSection {
                    task,
                    metric: metric.to_owned(),
                    rows,
                });
            }
        }
    }
    Ok(sections)
}

#[derive(Debug, Clone)]
pub struct ReportSettings {
    pub baseline: String,
    pub alpha: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            baseline: ScalerKind::NO.abbreviation().to_owned(),
            alpha: crate::stats::DEFAULT_ALPHA,
        }
    }
}

fn best_scaler_rows(records: &[RunRecord], metric: &str, baseline: &str) -> Vec<Vec<String>> {
    let Ok(table) = value_table(records, metric) else {
        return Vec::new();
    };
    let mut by_dataset: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for ((_, model), datasets) in &table {
        for (dataset, values) in datasets {
            let best = values
                .values()
                .copied()
                .fold(None, |acc: Option<f64>, v| match acc {
                    None => Some(v),
                    Some(a) if higher_is_better(metric) => Some(a.max(v)),
                    Some(a) => Some(a.min(v)),
                })
                .expect("non-empty");
            let winners: Vec<&str> = values
                .iter()
                .filter(|(_, &v)| v == best)
                .map(|((_, name), _)| name.as_str())
                .collect();
            let winners = if winners.len() == values.len() && values.len() > 1 {
                format!("all {} tied", values.len())
            } else {
                winners.join(", ")
            };
            let base = values
                .get(&scaler_rank(baseline))
                .map_or("-".to_owned(), |v| format!("{v:.4}"));
            by_dataset.entry(dataset.clone()).or_default().push(vec![
                dataset.clone(),
                model.clone(),
                winners,
                format!("{best:.4}"),
                base,
            ]);
        }
    }
    by_dataset.into_values().flatten().collect()
}

/// Markdown report: significance tables per metric (classification and
/// regression kept apart), best scalers per dataset, failed cells.
pub fn render_markdown(
    sections: &[MetricSection],
    records: &[RunRecord],
    settings: &ReportSettings,
    figures: &[PathBuf],
) -> String {
    let datasets: BTreeSet<&str> = records.iter().map(|r| r.dataset.as_str()).collect();
    let models: BTreeSet<&str> = records.iter().map(|r| r.model.as_str()).collect();
    let scalers: BTreeSet<&str> = records.iter().map(|r| r.scaler.as_str()).collect();
    let failed: Vec<&RunRecord> = records.iter().filter(|r| !r.is_ok()).collect();

    let mut md = String::from("# Feature scaling benchmark report\n\n");
    let _ = writeln!(
        md,
        "{} records ({} failed) over {} datasets, {} models and {} scalers. \
         Significance level {}, baseline scaler `{}`.\n",
        records.len(),
        failed.len(),
        datasets.len(),
        models.len(),
        scalers.len(),
        settings.alpha,
        settings.baseline
    );

    for task in [Task::Classification, Task::Regression] {
        let of_task: Vec<&MetricSection> = sections.iter().filter(|s| s.task == task).collect();
        if of_task.is_empty() {
            continue;
        }
        let title = match task {
            Task::Classification => "Classification",
            Task::Regression => "Regression",
        };
        let _ = writeln!(md, "## {title}\n");
        let task_records: Vec<RunRecord> =
            records.iter().filter(|r| r.task == task).cloned().collect();
        for section in of_task {
            let _ = writeln!(md, "### {}\n", section.metric);
            md.push_str(&markdown_table(
                &TABLE_HEADER,
                section.rows.iter().map(SignificanceRow::cells),
            ));
            let notes: Vec<String> = section
                .rows
                .iter()
                .flat_map(|r| r.notes.iter().map(move |n| format!("- {}: {n}", r.model)))
                .collect();
            if !notes.is_empty() {
                md.push('\n');
                md.push_str(&notes.join("\n"));
                md.push('\n');
            }
            md.push('\n');
            let direction = if higher_is_better(&section.metric) {
                "highest"
            } else {
                "lowest"
            };
            let _ = writeln!(
                md,
                "Best scaler per dataset ({direction} {}):\n",
                section.metric
            );
            md.push_str(&markdown_table(
                &[
                    "Dataset",
                    "Model",
                    "Best scaler",
                    "Value",
                    settings.baseline.as_str(),
                ],
                best_scaler_rows(&task_records, &section.metric, &settings.baseline),
            ));
            md.push('\n');
        }
    }

    if !failed.is_empty() {
        md.push_str("## Failed cells\n\n");
        for r in &failed {
            let _ = writeln!(md, "- {}/{}/{}: {}", r.dataset, r.model, r.scaler, r.status);
        }
        md.push('\n');
    }
    if !figures.is_empty() {
        md.push_str("## Figures\n\n");
        for f in figures {
            let _ = writeln!(
                md,
                "- [{}]({})",
                f.file_stem().unwrap_or_default().to_string_lossy(),
                f.display()
            );
        }
        md.push('\n');
    }
    md
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// SVG 1.1 bar chart of one value per label.
pub fn bar_chart_svg(title: &str, labels: &[String], values: &[f64]) -> String {
    let (width, height) = (60.0 + 48.0 * labels.len() as f64, 320.0);
    let (top, bottom, left) = (40.0, 260.0, 50.0);
    let lo = values.iter().copied().fold(0.0, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let y_of = |v: f64| bottom - (v - lo) / span * (bottom - top);
    let mut svg = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        width / 2.0,
        xml_escape(title)
    );
    let zero = y_of(0.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" y1=\"{zero:.2}\" x2=\"{:.2}\" y2=\"{zero:.2}\" stroke=\"black\"/>",
        width - 10.0
    );
    for (i, (label, &v)) in labels.iter().zip(values).enumerate() {
        let x = left + 48.0 * i as f64 + 6.0;
        let (y0, y1) = (y_of(v).min(zero), y_of(v).max(zero));
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y0:.2}\" width=\"36\" height=\"{:.2}\" fill=\"#4878a8\"><title>{}: {v:.4}</title></rect>",
            (y1 - y0).max(0.5),
            xml_escape(label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{}</text>",
            x + 18.0,
            bottom + 16.0,
            xml_escape(label)
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"middle\">{v:.3}</text>",
            x + 18.0,
            y0 - 3.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// One chart per (metric, model): mean metric value over datasets for
/// each scaler.
pub fn write_svg_charts(
    sections: &[MetricSection],
    records: &[RunRecord],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for section in sections {
        let of_task: Vec<RunRecord> = records
            .iter()
            .filter(|r| r.task == section.task)
            .cloned()
            .collect();
        let table = value_table(&of_task, &section.metric)?;
        for ((_, model), datasets) in &table {
            let mut sums: BTreeMap<(usize, String), (f64, usize)> = BTreeMap::new();
            for values in datasets.values() {
                for (scaler, &v) in values {
                    let e = sums.entry(scaler.clone()).or_insert((0.0, 0));
                    e.0 += v;
                    e.1 += 1;
                }
            }
            let labels: Vec<String> = sums.keys().map(|(_, s)| s.clone()).collect();
            let values: Vec<f64> = sums.values().map(|(s, n)| s / *n as f64).collect();
            let title = format!("{model}: mean {} by scaler", section.metric);
            let path = dir.join(format!("{}_{model}.svg", section.metric));
            fs::write(&path, bar_chart_svg(&title, &labels, &values))
                .map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes the Markdown report to `out` and, when `svg_dir` is given, the
/// bar charts. Returns the chart paths.
pub fn emit_report(
    sections: &[MetricSection],
    records: &[RunRecord],
    settings: &ReportSettings,
    out: &Path,
    svg_dir: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    if sections.is_empty() {
        return Err(Error::InvalidInput("no metric values to report".into()));
    }
    let figures = match svg_dir {
        Some(dir) => write_svg_charts(sections, records, dir)?,
        None => Vec::new(),
    };
    let md = render_markdown(sections, records, settings, &figures);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(out, md).map_err(|e| Error::io(out, e))?;
    Ok(figures)
}
