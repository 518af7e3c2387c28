//! Result tables, column-mean relative gains, the paraphrase-count curve,
//! and rendering to markdown, CSV and plot triples.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::artifact::ArtifactHeader;
use crate::corpus::Topic;
use crate::evaluation::{relative_gain, JournalFile, KnowledgeScore, ResultTable};
use crate::{Error, Result, Scalar};

/// Rendered in place of a missing cell.
pub const MISSING: &str = "—";

/// Canonical column order for approach tables; unknown labels follow in
/// order of first appearance.
pub const APPROACH_ORDER: [&str; 8] = [
    "Base model",
    "Base model + RAG",
    "Fine-tuned",
    "Fine-tuned + RAG",
    "FT-reg",
    "FT-par",
    "FT-reg + RAG",
    "FT-par + RAG",
];

/// How journal configs map to table columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColumnKey {
    /// One column per injection approach.
    #[default]
    Approach,
    /// One column per number of retrieved documents.
    RetrievedDocs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub task: Topic,
    pub shots: usize,
    pub model: String,
    pub cells: Vec<Option<KnowledgeScore>>,
    /// Failed questions across this row's cells, excluded from scores.
    pub failed: usize,
}

impl TableRow {
    pub fn task_label(&self) -> String {
        format!("{} ({}-shot)", self.task.display_name(), self.shots)
    }
}

/// One row per (task, model), one column per approach.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTable {
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl ScoreTable {
    pub fn column(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == label)
    }

    pub fn cell(&self, row: usize, label: &str) -> Option<KnowledgeScore> {
        self.column(label).and_then(|c| self.rows[row].cells[c])
    }

    /// Rows of one model only.
    pub fn for_model(&self, model: &str) -> ScoreTable {
        ScoreTable {
            columns: self.columns.clone(),
            rows: self.rows.iter().filter(|r| r.model == model).cloned().collect(),
        }
    }

    /// Models in row order, deduplicated.
    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model) {
                out.push(r.model.clone());
            }
        }
        out
    }

    /// Column indices holding the row maximum (all ties).
    pub fn row_max_columns(&self, row: usize) -> Vec<usize> {
        let cells = &self.rows[row].cells;
        let best = cells.iter().flatten().map(KnowledgeScore::value).max();
        match best {
            None => Vec::new(),
            Some(b) => cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_some_and(|s| s.value() == b))
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

/// Builds the score table from journals.
///
/// Models appear in `model_order` first, then in order of first appearance.
pub fn aggregate(journals: &[JournalFile], key: ColumnKey, model_order: &[String]) -> ScoreTable {
    let table = ResultTable::from_journals(journals.to_vec());
    let mut columns: Vec<String> = Vec::new();
    let mut models: Vec<String> = model_order.to_vec();
    let column_of = |c: &crate::evaluation::EvalConfig| match key {
        ColumnKey::Approach => c.approach_label(),
        ColumnKey::RetrievedDocs => format!("K={}", c.k),
    };
    for c in &table.configs {
        let col = column_of(c);
        if !columns.contains(&col) {
            columns.push(col);
        }
        if !models.contains(&c.model) {
            models.push(c.model.clone());
        }
    }
    match key {
        ColumnKey::Approach => columns.sort_by_key(|c| {
            APPROACH_ORDER
                .iter()
                .position(|a| a == c)
                .unwrap_or(APPROACH_ORDER.len())
        }),
        ColumnKey::RetrievedDocs => columns.sort_by_key(|c| c[2..].parse::<usize>().unwrap_or(usize::MAX)),
    }

    type RowKey = (Topic, usize, usize);
    let mut rows: BTreeMap<RowKey, TableRow> = BTreeMap::new();
    for c in &table.configs {
        let model_pos = models.iter().position(|m| *m == c.model).expect("collected above");
        let row = rows.entry((c.task, c.shots, model_pos)).or_insert_with(|| TableRow {
            task: c.task,
            shots: c.shots,
            model: c.model.clone(),
            cells: vec![None; columns.len()],
            failed: 0,
        });
        let col = columns.iter().position(|x| *x == column_of(c)).expect("collected above");
        let id = c.id();
        if let Some(s) = table.aggregates.get(&id) {
            row.cells[col] = Some(*s);
        }
        row.failed += table.failures.get(&id).copied().unwrap_or(0);
    }
    ScoreTable {
        columns,
        rows: rows.into_values().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnGain<T> {
    pub column: String,
    /// Mean relative gain; `None` when no row had both cells.
    pub mean: Option<T>,
    /// Rows contributing to the mean.
    pub count: usize,
    /// Rows skipped because this column's cell is missing.
    pub excluded: usize,
}

/// Mean relative gain of each column over the base column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSummary<T> {
    pub base_column: String,
    pub per_column: Vec<ColumnGain<T>>,
}

impl<T: Scalar> GainSummary<T> {
    pub fn mean(&self, column: &str) -> Option<T> {
        self.per_column
            .iter()
            .find(|c| c.column == column)
            .and_then(|c| c.mean)
    }
}

/// Relative gain per row against `base_column`, averaged per column.
///
/// Gains are summed in sorted order so the result does not depend on row
/// order.
pub fn columnwise_gain<T: Scalar>(table: &ScoreTable, base_column: &str) -> Result<GainSummary<T>> {
    let base = table
        .column(base_column)
        .ok_or_else(|| Error::invalid(format!("no column `{base_column}`")))?;
    for r in &table.rows {
        match r.cells[base] {
            Some(s) if s.correct() > 0 => {}
            _ => {
                return Err(Error::invalid(format!(
                    "base cell missing or zero for {} / {}",
                    r.task_label(),
                    r.model
                )))
            }
        }
    }
    let mut per_column = Vec::new();
    for (ci, col) in table.columns.iter().enumerate() {
        if ci == base {
            continue;
        }
        let mut gains: Vec<f64> = Vec::new();
        let mut excluded = 0;
        for r in &table.rows {
            match (r.cells[base], r.cells[ci]) {
                (Some(b), Some(i)) => gains.push(relative_gain::<f64>(&b, &i)?),
                _ => excluded += 1,
            }
        }
        gains.sort_by(f64::total_cmp);
        let mean = if gains.is_empty() {
            None
        } else {
            Some(T::from_f64_lossy(gains.iter().sum::<f64>() / gains.len() as f64))
        };
        per_column.push(ColumnGain {
            column: col.clone(),
            mean,
            count: gains.len(),
            excluded,
        });
    }
    Ok(GainSummary {
        base_column: base_column.to_string(),
        per_column,
    })
}

/// Accuracy as a function of paraphrase count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParaphraseCurve<T> {
    /// Sorted by paraphrase count.
    pub points: Vec<(u32, T)>,
    /// `(from, to, accuracy change)` per adjacent pair.
    pub deltas: Vec<(u32, u32, T)>,
    pub is_monotone_nondecreasing: bool,
    pub is_strictly_increasing: bool,
}

pub fn paraphrase_curve<T: Scalar>(mut points: Vec<(u32, T)>) -> Result<ParaphraseCurve<T>> {
    points.sort_by_key(|p| p.0);
    if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid(format!("paraphrase count {} repeated", w[0].0)));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::invalid("non-finite accuracy"));
    }
    let deltas: Vec<(u32, u32, T)> = points
        .windows(2)
        .map(|w| (w[0].0, w[1].0, w[1].1 - w[0].1))
        .collect();
    let zero = T::zero();
    Ok(ParaphraseCurve {
        is_monotone_nondecreasing: deltas.iter().all(|d| d.2 >= zero),
        is_strictly_increasing: deltas.iter().all(|d| d.2 > zero),
        points,
        deltas,
    })
}

/// Points `(n, accuracy)` from columns named `<prefix><n>` for one model.
pub fn curve_points<T: Scalar>(table: &ScoreTable, model: &str, prefix: &str) -> Vec<(u32, T)> {
    let mut out = Vec::new();
    for (ci, col) in table.columns.iter().enumerate() {
        let Some(n) = col.strip_prefix(prefix).and_then(|s| s.parse::<u32>().ok()) else {
            continue;
        };
        for r in table.rows.iter().filter(|r| r.model == model) {
            if let Some(s) = r.cells[ci] {
                out.push((n, s.to_real()));
            }
        }
    }
    out
}

fn cell_text(cell: Option<KnowledgeScore>) -> String {
    cell.map_or_else(|| MISSING.to_string(), |s| s.to_fixed(3))
}

/// Markdown table with every row maximum in bold.
pub fn render_markdown(table: &ScoreTable) -> String {
    let mut out = String::new();
    out.push_str("| Task | Model |");
    for c in &table.columns {
        let _ = write!(out, " {c} |");
    }
    out.push_str("\n|---|---|");
    for _ in &table.columns {
        out.push_str("---:|");
    }
    out.push('\n');
    for (ri, r) in table.rows.iter().enumerate() {
        let best = table.row_max_columns(ri);
        let _ = write!(out, "| {} | {} |", r.task_label(), r.model);
        for (ci, cell) in r.cells.iter().enumerate() {
            let text = cell_text(*cell);
            if best.contains(&ci) {
                let _ = write!(out, " **{text}** |");
            } else {
                let _ = write!(out, " {text} |");
            }
        }
        out.push('\n');
    }
    let failed: usize = table.rows.iter().map(|r| r.failed).sum();
    if failed > 0 {
        let _ = writeln!(out, "\n{failed} failed question(s) excluded from scores.");
    }
    out
}

fn csv_string(records: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 input")
}

pub fn render_csv(table: &ScoreTable) -> String {
    let mut records = Vec::with_capacity(table.rows.len() + 1);
    let mut head = vec!["task".to_string(), "model".to_string()];
    head.extend(table.columns.iter().cloned());
    records.push(head);
    for r in &table.rows {
        let mut rec = vec![r.task_label(), r.model.clone()];
        rec.extend(r.cells.iter().map(|c| c.map(|s| s.to_fixed(3)).unwrap_or_default()));
        records.push(rec);
    }
    csv_string(records)
}

/// `x,y,series` triples: x is the column, series is `task / model`.
pub fn render_plot_data(table: &ScoreTable) -> String {
    let mut records = vec![vec!["x".to_string(), "y".to_string(), "series".to_string()]];
    for r in &table.rows {
        for (c, cell) in table.columns.iter().zip(&r.cells) {
            if let Some(s) = cell {
                records.push(vec![
                    c.clone(),
                    s.to_fixed(3),
                    format!("{} / {}", r.task_label(), r.model),
                ]);
            }
        }
    }
    csv_string(records)
}

/// Gain summary as markdown, gains with 3 decimals.
pub fn render_gains<T: Scalar>(model: &str, g: &GainSummary<T>) -> String {
    let mut out = format!("| Model | Column | Mean relative gain vs {} | Rows | Excluded |\n|---|---|---:|---:|---:|\n", g.base_column);
    for c in &g.per_column {
        let mean = c
            .mean
            .map_or_else(|| MISSING.to_string(), |m| format!("{:.3}", m.as_f64()));
        let _ = writeln!(out, "| {model} | {} | {mean} | {} | {} |", c.column, c.count, c.excluded);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    PlotData,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            "plot-data" | "plot" => Ok(Format::PlotData),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

/// Renders `table` to `<dir>/<stem>.<ext>` with the artifact header as the
/// first line.
pub fn render(
    table: &ScoreTable,
    format: Format,
    dir: &Path,
    stem: &str,
    header: Option<&ArtifactHeader>,
) -> Result<PathBuf> {
    let (ext, body, comment) = match format {
        Format::Markdown => ("md", render_markdown(table), None),
        Format::Csv => ("csv", render_csv(table), Some("#")),
        Format::PlotData => ("plot.csv", render_plot_data(table), Some("#")),
    };
    let mut text = String::new();
    if let Some(h) = header {
        match comment {
            Some(c) => text.push_str(&h.comment_line(c)),
            None => {
                text.push_str("<!--");
                text.push_str(&h.comment_line(""));
                text.push_str(" -->");
            }
        }
        text.push('\n');
    }
    text.push_str(&body);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{stem}.{ext}"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks(s: &str) -> Option<KnowledgeScore> {
        Some(s.parse().unwrap())
    }

    fn table() -> ScoreTable {
        ScoreTable {
            columns: vec!["Base model".into(), "Base model + RAG".into(), "Fine-tuned".into()],
            rows: vec![
                TableRow {
                    task: Topic::Anatomy,
                    shots: 0,
                    model: "M".into(),
                    cells: vec![ks("0.5"), ks("0.75"), ks("0.4")],
                    failed: 0,
                },
                TableRow {
                    task: Topic::Astronomy,
                    shots: 0,
                    model: "M".into(),
                    cells: vec![ks("0.25"), ks("0.25"), None],
                    failed: 2,
                },
            ],
        }
    }

    #[test]
    fn gains_and_exclusions() {
        let g: GainSummary<f64> = columnwise_gain(&table(), "Base model").unwrap();
        assert_eq!(g.mean("Base model + RAG"), Some(0.25));
        let ft = &g.per_column[1];
        assert_eq!((ft.count, ft.excluded), (1, 1));
        assert!((ft.mean.unwrap() + 0.2).abs() < 1e-12);
        assert!(columnwise_gain::<f64>(&table(), "nope").is_err());
    }

    #[test]
    fn zero_gain_when_equal() {
        let mut t = table();
        for r in &mut t.rows {
            r.cells[1] = r.cells[0];
        }
        let g: GainSummary<f64> = columnwise_gain(&t, "Base model").unwrap();
        assert_eq!(g.mean("Base model + RAG"), Some(0.0));
    }

    #[test]
    fn markdown_bolds_ties_and_marks_missing() {
        let md = render_markdown(&table());
        let lines: Vec<_> = md.lines().collect();
        assert_eq!(lines[2], "| Anatomy (0-shot) | M | 0.500 | **0.750** | 0.400 |");
        assert_eq!(lines[3], "| Astronomy (0-shot) | M | **0.250** | **0.250** | — |");
        assert!(md.ends_with("2 failed question(s) excluded from scores.\n"));
    }

    #[test]
    fn csv_quotes_and_plot_triples() {
        let mut t = table();
        t.rows[0].model = "M, \"7B\"".into();
        let csv = render_csv(&t);
        assert!(csv.contains("\"M, \"\"7B\"\"\""), "{csv}");
        let plot = render_plot_data(&table());
        assert_eq!(plot.lines().count(), 1 + 5);
        assert!(plot.starts_with("x,y,series\n"));
    }

    #[test]
    fn curve_monotonicity() {
        let c = paraphrase_curve(vec![(0, 0.50), (1, 0.53), (2, 0.55)]).unwrap();
        assert!(c.is_monotone_nondecreasing && c.is_strictly_increasing);
        let c = paraphrase_curve(vec![(1, 0.48), (0, 0.50)]).unwrap();
        assert!(!c.is_monotone_nondecreasing);
        assert_eq!(c.points[0], (0, 0.50));
        let flat = paraphrase_curve(vec![(0, 0.5f32), (3, 0.5)]).unwrap();
        assert!(flat.is_monotone_nondecreasing && !flat.is_strictly_increasing);
        assert!(paraphrase_curve(vec![(1, 0.5), (1, 0.6)]).is_err());
    }
}
