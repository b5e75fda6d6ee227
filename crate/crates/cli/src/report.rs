//! Render run metrics as markdown, CSV, or JSON.

use std::fmt::Write as _;

use asp_forge_core::domain::{format_false_accept, ErrorCategory, MetricsBucket, RunMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "markdown" | "md" => Some(ReportFormat::Markdown),
            "csv" => Some(ReportFormat::Csv),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

fn accuracy_pct(bucket: &MetricsBucket) -> String {
    format!("{:.1}%", bucket.accuracy * 100.0)
}

fn error_count(bucket: &MetricsBucket, category: ErrorCategory) -> usize {
    bucket.error_counts.get(&category).copied().unwrap_or(0)
}

fn row_cells(name: &str, bucket: &MetricsBucket) -> Vec<String> {
    vec![
        name.to_string(),
        bucket.total.to_string(),
        accuracy_pct(bucket),
        format!("{:.2}", bucket.avg_revisions),
        format_false_accept(bucket),
        error_count(bucket, ErrorCategory::Syntax).to_string(),
        error_count(bucket, ErrorCategory::Timeout).to_string(),
        error_count(bucket, ErrorCategory::SatIncorrect).to_string(),
        error_count(bucket, ErrorCategory::Unsat).to_string(),
    ]
}

const HEADER: [&str; 9] = [
    "benchmark",
    "problems",
    "accuracy",
    "avg revisions",
    "false-accept",
    "syntax",
    "timeout",
    "sat (incorrect)",
    "unsat",
];

pub fn render_markdown(metrics: &RunMetrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", HEADER.join(" | "));
    let _ = writeln!(out, "|{}|", vec!["---"; HEADER.len()].join("|"));
    for (tag, bucket) in &metrics.per_benchmark {
        let _ = writeln!(out, "| {} |", row_cells(tag, bucket).join(" | "));
    }
    let _ = writeln!(out, "| {} |", row_cells("overall", &metrics.overall).join(" | "));
    out
}

pub fn render_csv(metrics: &RunMetrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", HEADER.join(","));
    for (tag, bucket) in &metrics.per_benchmark {
        let _ = writeln!(out, "{}", row_cells(tag, bucket).join(","));
    }
    let _ = writeln!(out, "{}", row_cells("overall", &metrics.overall).join(","));
    out
}

pub fn render_json(metrics: &RunMetrics) -> String {
    serde_json::to_string_pretty(metrics).expect("metrics serialize")
}

pub fn render(metrics: &RunMetrics, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => render_markdown(metrics),
        ReportFormat::Csv => render_csv(metrics),
        ReportFormat::Json => render_json(metrics),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use asp_forge_core::eval::{compute_metrics, Verdict};

    fn verdicts_50_of_989() -> Vec<Verdict> {
        let mut out = Vec::new();
        for i in 0..989 {
            out.push(Verdict {
                problem_id: format!("p{i}"),
                benchmark: "zl".into(),
                correct: i >= 50,
                passed: true,
                revision_count: 1,
                error_category: if i < 50 {
                    Some(ErrorCategory::SatIncorrect)
                } else {
                    None
                },
                details: String::new(),
            });
        }
        out
    }

    #[test]
    fn markdown_contains_table4_row() {
        let metrics = compute_metrics(&verdicts_50_of_989());
        let md = render_markdown(&metrics);
        assert!(md.contains("5.06% (50/989)"), "{md}");
    }

    #[test]
    fn json_round_trips_to_same_metrics() {
        let metrics = compute_metrics(&verdicts_50_of_989());
        let json = render_json(&metrics);
        let reparsed: RunMetrics = serde_json::from_str(&json).unwrap();
        assert_eq!(reparsed, metrics);
    }

    #[test]
    fn empty_metrics_render_without_panicking() {
        let metrics = compute_metrics(&[]);
        assert!(render_markdown(&metrics).contains("overall"));
        assert!(render_csv(&metrics).contains("overall"));
    }
}
