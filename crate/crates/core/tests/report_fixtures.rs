//! Aggregation, gains and rendering over the published result tables.

mod common;

use common::*;
use injectbench_core::report::{
    aggregate, columnwise_gain, paraphrase_curve, render, render_markdown, ColumnKey, Format,
};
use injectbench_core::evaluation::{read_journal_dir, relative_gain, JournalFile, KnowledgeScore};
use injectbench_core::GainSummary;

#[test]
fn paraphrase_renders_byte_for_byte() {
    let cells = paraphrase_cells();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &model_order(&cells));
    assert_eq!(render_markdown(&table), read_fixture("paraphrase_scores_expected.md"));
}

#[test]
fn paraphrase_grid_order_relations() {
    let cells = paraphrase_cells();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &model_order(&cells));
    let rag = table.column("Base model + RAG").unwrap();
    for (i, row) in table.rows.iter().enumerate() {
        assert_eq!(table.row_max_columns(i), vec![rag], "{}", row.model);
        assert!(table.cell(i, "FT-par").unwrap().value() > table.cell(i, "FT-reg").unwrap().value());
    }
}

#[test]
fn paraphrase_grid_mistral_gain() {
    let base: KnowledgeScore = "0.481".parse().unwrap();
    let rag: KnowledgeScore = "0.875".parse().unwrap();
    let g: f64 = relative_gain(&base, &rag).unwrap();
    assert!((g - 0.8191).abs() < 1e-4, "{g}");
}

#[test]
fn approach_grid_mean_gains_match_oracle() {
    let cells = approach_cells();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &model_order(&cells));
    assert_eq!(table.rows.len(), 30);
    for (model, [rag, ft, ft_rag]) in APPROACH_MEAN_GAINS {
        let g: GainSummary = columnwise_gain(&table.for_model(model), "Base model").unwrap();
        for (col, want) in [("Base model + RAG", rag), ("Fine-tuned", ft), ("Fine-tuned + RAG", ft_rag)] {
            let got = g.mean(col).unwrap();
            assert!((got - want).abs() < 1e-6, "{model} {col}: {got} vs {want}");
        }
        assert!(g.mean("Base model + RAG").unwrap() > g.mean("Fine-tuned").unwrap());
    }
}

#[test]
fn gains_ignore_row_order() {
    let cells = approach_cells();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &[]);
    let mut shuffled = table.clone();
    shuffled.rows.reverse();
    shuffled.rows.swap(3, 17);
    let a: GainSummary = columnwise_gain(&table, "Base model").unwrap();
    let b: GainSummary = columnwise_gain(&shuffled, "Base model").unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_cells_render_as_dash_and_are_excluded() {
    let cells: Vec<Cell> = paraphrase_cells()
        .into_iter()
        .filter(|c| !(c.model == "Llama2 7B" && c.column == "FT-par"))
        .collect();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &model_order(&cells));
    let md = render_markdown(&table);
    assert!(md.contains("| Current events (0-shot) | Llama2 7B | 0.353 | **0.585** | 0.219 | — |"), "{md}");
    let g: GainSummary = columnwise_gain(&table, "Base model").unwrap();
    let par = g.per_column.iter().find(|c| c.column == "FT-par").unwrap();
    assert_eq!((par.count, par.excluded), (2, 1));
}

#[test]
fn paraphrase_grid_two_point_curves_increase() {
    let cells = paraphrase_cells();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &model_order(&cells));
    for (i, r) in table.rows.iter().enumerate() {
        let reg: f64 = table.cell(i, "FT-reg").unwrap().to_real();
        let par: f64 = table.cell(i, "FT-par").unwrap().to_real();
        let c = paraphrase_curve(vec![(0, reg), (10, par)]).unwrap();
        assert!(c.is_monotone_nondecreasing && c.is_strictly_increasing, "{}", r.model);
    }
}

#[test]
fn aggregation_is_stable_through_journal_files() {
    let dir = tempfile::tempdir().unwrap();
    let cells = paraphrase_cells();
    let journals = journals_for(&cells);
    for j in &journals {
        #[derive(serde::Serialize)]
        struct ConfigLine<'a> {
            config: &'a injectbench_core::evaluation::EvalConfig,
        }
        let path = dir.path().join(format!("{}.jsonl", j.config.id()));
        let mut text = serde_json::to_string(&ConfigLine { config: &j.config }).unwrap() + "\n";
        for r in &j.rows {
            text += &(serde_json::to_string(r).unwrap() + "\n");
        }
        std::fs::write(path, text).unwrap();
    }
    let order = model_order(&cells);
    let direct = aggregate(&journals, ColumnKey::Approach, &order);
    let reread: Vec<JournalFile> = read_journal_dir(dir.path()).unwrap();
    assert_eq!(aggregate(&reread, ColumnKey::Approach, &order), direct);
    assert_eq!(aggregate(&reread, ColumnKey::Approach, &order), aggregate(&reread, ColumnKey::Approach, &order));
}

#[test]
fn rendered_files_carry_header() {
    let dir = tempfile::tempdir().unwrap();
    let cells = paraphrase_cells();
    let table = aggregate(&journals_for(&cells), ColumnKey::Approach, &model_order(&cells));
    let header = injectbench_core::artifact::ArtifactHeader::new(11, "abc");
    for f in [Format::Markdown, Format::Csv, Format::PlotData] {
        let p = render(&table, f, dir.path(), "t", Some(&header)).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.lines().next().unwrap().contains("seed=11 manifest=abc"));
    }
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().nth(2).unwrap(), "Current events (0-shot),Mistral 7B,0.481,0.875,0.504,0.588,0.810,0.830");
}
