//! Deterministic table rendering for evaluation reports.
//!
//! Six table shapes are emitted: aggregate metrics by K (in both macro and
//! micro variants), hit rate and MRR per server, then precision, recall,
//! F1, and token reduction per server. Percentages render to one decimal
//! and MRR to four.
//!
//! Latency columns are measurements, not derived metrics, so they vary
//! run to run; they are only rendered when explicitly requested, keeping
//! default report output byte-stable for golden comparisons.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{MetricsReport, MetricsRow, Scope};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown report format `{0}` (expected md or csv)")]
    UnknownFormat(String),
    #[error("report has no rows")]
    EmptyReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

/// Render every table shape in the requested format. Output is a pure
/// function of the report contents (plus the latency toggle).
pub fn render_report(
    report: &MetricsReport,
    format: ReportFormat,
    include_latency: bool,
) -> Result<String, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    Ok(match format {
        ReportFormat::Markdown => render_markdown(report, include_latency),
        ReportFormat::Csv => render_csv(report, include_latency),
    })
}

fn pct(value: f64) -> String {
    format!("{:.1}%", value * 100.0)
}

fn pct_plain(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

fn mrr_fmt(value: f64) -> String {
    format!("{value:.4}")
}

fn ms(value: f64) -> String {
    format!("{value:.1}")
}

fn aggregate_rows<'a>(report: &'a MetricsReport, scope: &Scope) -> Vec<&'a MetricsRow> {
    report
        .ks
        .iter()
        .filter_map(|&k| report.row(scope, k))
        .collect()
}

fn server_row<'a>(report: &'a MetricsReport, tag: &str, k: usize) -> Option<&'a MetricsRow> {
    report.row(&Scope::PerServer(tag.to_string()), k)
}

fn render_markdown(report: &MetricsReport, include_latency: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Tool retrieval evaluation");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "- catalog: {} tools, hash `{}`",
        report.catalog_size, report.catalog_hash
    );
    let _ = writeln!(out, "- provider: `{}`", report.provider_id);
    let _ = writeln!(out, "- queries: {}", report.query_count);
    match report.threshold {
        Some(t) => {
            let _ = writeln!(out, "- threshold: {t}");
        }
        None => {
            let _ = writeln!(out, "- threshold: none");
        }
    }

    for (scope, label) in [
        (Scope::AggregateMacro, "macro-averaged over servers"),
        (Scope::AggregateMicro, "micro-averaged over queries"),
    ] {
        let _ = writeln!(out);
        let _ = writeln!(out, "## Aggregate metrics by K ({label})");
        let _ = writeln!(out);
        let mut header =
            "| K | Precision@K | Recall@K | F1@K | Hit Rate@K | MRR | Token Reduction |"
                .to_string();
        let mut rule = "|--:|--:|--:|--:|--:|--:|--:|".to_string();
        if include_latency {
            header.push_str(" Latency mean (ms) | Latency p95 (ms) |");
            rule.push_str("--:|--:|");
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{rule}");
        for row in aggregate_rows(report, &scope) {
            let mut line = format!(
                "| {} | {} | {} | {} | {} | {} | {} |",
                row.k,
                pct(row.precision),
                pct(row.recall),
                pct(row.f1),
                pct(row.hit_rate),
                mrr_fmt(row.mrr),
                pct(row.trr),
            );
            if include_latency {
                let _ = write!(
                    line,
                    " {} | {} |",
                    ms(row.latency_ms_mean),
                    ms(row.latency_ms_p95)
                );
            }
            let _ = writeln!(out, "{line}");
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "## Hit Rate@K (%) and MRR per server");
    let _ = writeln!(out);
    let mut header = "| K |".to_string();
    let mut rule = "|--:|".to_string();
    for tag in &report.server_tags {
        let _ = write!(header, " {tag} HR | {tag} MRR |");
        rule.push_str("--:|--:|");
    }
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{rule}");
    for &k in &report.ks {
        let mut line = format!("| {k} |");
        for tag in &report.server_tags {
            if let Some(row) = server_row(report, tag, k) {
                let _ = write!(line, " {} | {} |", pct(row.hit_rate), mrr_fmt(row.mrr));
            }
        }
        let _ = writeln!(out, "{line}");
    }

    for (title, metric) in [
        ("Precision@K (%) per server", Field::Precision),
        ("Recall@K (%) per server", Field::Recall),
        ("F1@K (%) per server", Field::F1),
        ("Token Reduction (%) per server", Field::Trr),
    ] {
        let _ = writeln!(out);
        let _ = writeln!(out, "## {title}");
        let _ = writeln!(out);
        let mut header = "| K |".to_string();
        let mut rule = "|--:|".to_string();
        for tag in &report.server_tags {
            let _ = write!(header, " {tag} |");
            rule.push_str("--:|");
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{rule}");
        for &k in &report.ks {
            let mut line = format!("| {k} |");
            for tag in &report.server_tags {
                if let Some(row) = server_row(report, tag, k) {
                    let _ = write!(line, " {} |", pct(metric.get(row)));
                }
            }
            let _ = writeln!(out, "{line}");
        }
    }
    out
}

fn render_csv(report: &MetricsReport, include_latency: bool) -> String {
    let mut out = String::new();
    for (scope, name) in [
        (Scope::AggregateMacro, "aggregate_macro"),
        (Scope::AggregateMicro, "aggregate_micro"),
    ] {
        let _ = writeln!(out, "# {name}");
        let mut header =
            "k,precision_pct,recall_pct,f1_pct,hit_rate_pct,mrr,token_reduction_pct".to_string();
        if include_latency {
            header.push_str(",latency_ms_mean,latency_ms_p95");
        }
        let _ = writeln!(out, "{header}");
        for row in aggregate_rows(report, &scope) {
            let mut line = format!(
                "{},{},{},{},{},{},{}",
                row.k,
                pct_plain(row.precision),
                pct_plain(row.recall),
                pct_plain(row.f1),
                pct_plain(row.hit_rate),
                mrr_fmt(row.mrr),
                pct_plain(row.trr),
            );
            if include_latency {
                let _ = write!(line, ",{},{}", ms(row.latency_ms_mean), ms(row.latency_ms_p95));
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out);
    }

    let _ = writeln!(out, "# per_server_hit_rate_mrr");
    let _ = writeln!(out, "k,server,hit_rate_pct,mrr");
    for &k in &report.ks {
        for tag in &report.server_tags {
            if let Some(row) = server_row(report, tag, k) {
                let _ = writeln!(
                    out,
                    "{k},{tag},{},{}",
                    pct_plain(row.hit_rate),
                    mrr_fmt(row.mrr)
                );
            }
        }
    }

    for (name, metric) in [
        ("per_server_precision", Field::Precision),
        ("per_server_recall", Field::Recall),
        ("per_server_f1", Field::F1),
        ("per_server_token_reduction", Field::Trr),
    ] {
        let _ = writeln!(out);
        let _ = writeln!(out, "# {name}");
        let _ = writeln!(out, "k,server,value_pct");
        for &k in &report.ks {
            for tag in &report.server_tags {
                if let Some(row) = server_row(report, tag, k) {
                    let _ = writeln!(out, "{k},{tag},{}", pct_plain(metric.get(row)));
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Field {
    Precision,
    Recall,
    F1,
    Trr,
}

impl Field {
    fn get(self, row: &MetricsRow) -> f64 {
        match self {
            Field::Precision => row.precision,
            Field::Recall => row.recall,
            Field::F1 => row.f1,
            Field::Trr => row.trr,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> MetricsReport {
        let row = |scope: Scope, k: usize| MetricsRow {
            scope,
            k,
            precision: 0.576,
            recall: 0.596,
            f1: 0.5858293515358362,
            hit_rate: 0.971,
            mrr: 0.9083,
            trr: 0.996,
            latency_ms_mean: 0.21,
            latency_ms_p95: 0.55,
        };
        let mut rows = Vec::new();
        for k in [1, 3] {
            rows.push(row(Scope::AggregateMacro, k));
            rows.push(row(Scope::AggregateMicro, k));
            rows.push(row(Scope::PerServer("clock".into()), k));
            rows.push(row(Scope::PerServer("files".into()), k));
        }
        MetricsReport {
            catalog_hash: "abc123".into(),
            provider_id: "reference".into(),
            catalog_size: 4,
            query_count: 2,
            ks: vec![1, 3],
            server_tags: vec!["clock".into(), "files".into()],
            threshold: None,
            rows,
            per_query: vec![],
        }
    }

    #[test]
    fn markdown_contains_all_six_table_shapes() {
        let text = render_report(&sample_report(), ReportFormat::Markdown, false).unwrap();
        assert!(text.contains("## Aggregate metrics by K (macro-averaged over servers)"));
        assert!(text.contains("## Aggregate metrics by K (micro-averaged over queries)"));
        assert!(text.contains("## Hit Rate@K (%) and MRR per server"));
        assert!(text.contains("## Precision@K (%) per server"));
        assert!(text.contains("## Recall@K (%) per server"));
        assert!(text.contains("## F1@K (%) per server"));
        assert!(text.contains("## Token Reduction (%) per server"));
    }

    #[test]
    fn formats_percentages_to_one_decimal_and_mrr_to_four() {
        let text = render_report(&sample_report(), ReportFormat::Markdown, false).unwrap();
        assert!(text.contains("57.6%"));
        assert!(text.contains("58.6%")); // f1 rendered from its own p/r at higher precision
        assert!(text.contains("97.1%"));
        assert!(text.contains("0.9083"));
        assert!(text.contains("99.6%"));
        assert!(!text.contains("Latency"));
    }

    #[test]
    fn latency_columns_are_opt_in() {
        let with = render_report(&sample_report(), ReportFormat::Markdown, true).unwrap();
        assert!(with.contains("Latency mean (ms)"));
        let csv = render_csv(&sample_report(), true);
        assert!(csv.contains("latency_ms_mean"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let report = sample_report();
        for format in [ReportFormat::Markdown, ReportFormat::Csv] {
            assert_eq!(
                render_report(&report, format, false).unwrap(),
                render_report(&report, format, false).unwrap()
            );
        }
    }

    #[test]
    fn csv_sections_are_labeled() {
        let text = render_report(&sample_report(), ReportFormat::Csv, false).unwrap();
        for section in [
            "# aggregate_macro",
            "# aggregate_micro",
            "# per_server_hit_rate_mrr",
            "# per_server_precision",
            "# per_server_recall",
            "# per_server_f1",
            "# per_server_token_reduction",
        ] {
            assert!(text.contains(section), "missing {section}");
        }
    }

    #[test]
    fn format_parsing() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!(matches!(
            "xml".parse::<ReportFormat>(),
            Err(ReportError::UnknownFormat(_))
        ));
    }

    #[test]
    fn single_query_report_renders_one_row_per_k() {
        let mut report = sample_report();
        report.ks = vec![1, 2, 3, 5, 10];
        report.rows = report
            .ks
            .iter()
            .flat_map(|&k| {
                [Scope::AggregateMacro, Scope::AggregateMicro, Scope::PerServer("clock".into())]
                    .into_iter()
                    .map(move |scope| MetricsRow {
                        scope,
                        k,
                        precision: 1.0,
                        recall: 1.0,
                        f1: 1.0,
                        hit_rate: 1.0,
                        mrr: 1.0,
                        trr: 0.5,
                        latency_ms_mean: 0.0,
                        latency_ms_p95: 0.0,
                    })
            })
            .collect();
        report.server_tags = vec!["clock".into()];
        let text = render_report(&report, ReportFormat::Markdown, false).unwrap();
        let macro_section = text
            .split("## Aggregate metrics by K (macro-averaged over servers)")
            .nth(1)
            .and_then(|rest| rest.split("##").next())
            .unwrap();
        let k_rows = macro_section
            .lines()
            .filter(|l| l.starts_with("| ") && !l.starts_with("| K"))
            .count();
        assert_eq!(k_rows, 5);
    }
}
