//! Markdown reproduction log assembled from comparison tables and the
//! `key=value` run metadata written next to them.

use std::fmt::Write as _;

use crate::datagen::{CaseId, GeneratorConfig};
use crate::error::Result;
use crate::eval::{EvalConfig, EvalRun, TableRow};
use crate::models::ModelSpec;

/// One evaluated run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportInput {
    /// How the table is referred to in the document, usually its path.
    pub label: String,
    /// Ordered run metadata: `case`, `series`, `n_cycles`, `generator.*`,
    /// `model.<tag>.*`.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<TableRow>,
}

impl ReportInput {
    fn lookup(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn case(&self) -> Option<u8> {
        self.lookup("case").and_then(|v| v.parse().ok())
    }
}

/// Ordered `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_meta(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// What an evaluation run was given, for its metadata file.
#[derive(Debug, Clone, Copy)]
pub struct RunDescription<'a> {
    pub series_label: &'a str,
    pub n_cycles: usize,
    pub case: Option<CaseId>,
    pub generator: Option<&'a GeneratorConfig>,
    pub config: &'a EvalConfig,
    pub specs: &'a [ModelSpec],
}

/// `key=value` run metadata; `runs` pairs with `specs` by position.
pub fn eval_metadata(desc: &RunDescription<'_>, runs: &[(String, Result<EvalRun>)]) -> String {
    let mut meta = String::new();
    let _ = writeln!(meta, "series={}", desc.series_label);
    let _ = writeln!(meta, "n_cycles={}", desc.n_cycles);
    if let Some(case) = desc.case {
        let _ = writeln!(meta, "case={}", case.number());
    }
    let _ = writeln!(meta, "horizon={}", desc.config.horizon);
    let _ = writeln!(meta, "protocol={}", desc.config.protocol);
    let _ = writeln!(meta, "channels={}", desc.config.channels.as_str());
    let _ = writeln!(meta, "round_predictions={}", desc.config.round_predictions);
    if let Some(g) = desc.generator {
        for line in g.to_kv().lines() {
            let _ = writeln!(meta, "generator.{line}");
        }
    }
    for (spec, (tag, run)) in desc.specs.iter().zip(runs) {
        for (k, v) in spec.hyperparameters() {
            let _ = writeln!(meta, "model.{tag}.{k}={v}");
        }
        let status = match run {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("failed: {e}"),
        };
        let _ = writeln!(meta, "model.{tag}.status={status}");
    }
    meta
}

fn section(input: &ReportInput) -> String {
    let mut body = String::new();
    match input.case() {
        Some(c) => {
            let _ = writeln!(body, "## Case {c}\n");
        }
        None => body.push_str("## Series without a case preset\n\n"),
    }
    let _ = writeln!(body, "Table: `{}`", input.label);
    if let Some(series) = input.lookup("series") {
        let _ = writeln!(body, "Series: `{series}` ({} cycles)", input.lookup("n_cycles").unwrap_or("?"));
    }
    body.push('\n');

    let generator: Vec<_> = input
        .meta
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("generator.").map(|k| (k, v)))
        .collect();
    if !generator.is_empty() {
        body.push_str("### Generator\n\n");
        for (k, v) in generator {
            let _ = writeln!(body, "- {k} = {v}");
        }
        body.push('\n');
    }

    let mut models: Vec<(&str, Vec<String>)> = Vec::new();
    for (k, v) in &input.meta {
        let Some((tag, key)) = k.strip_prefix("model.").and_then(|r| r.split_once('.')) else {
            continue;
        };
        match models.iter_mut().find(|(t, _)| *t == tag) {
            Some((_, params)) => params.push(format!("{key}={v}")),
            None => models.push((tag, vec![format!("{key}={v}")])),
        }
    }
    if !models.is_empty() {
        body.push_str("### Models\n\n");
        for (tag, params) in models {
            let _ = writeln!(body, "- {tag}: {}", params.join(", "));
        }
        body.push('\n');
    }

    match input.rows.first() {
        Some(r) => {
            let _ = writeln!(body, "### Results (horizon {}, {})\n", r.horizon, r.protocol);
        }
        None => body.push_str("### Results\n\n"),
    }
    body.push_str("| model | channel | MAE | MSE | RMSE |\n|---|---|---:|---:|---:|\n");
    for r in &input.rows {
        match &r.outcome {
            Ok(m) => {
                let _ = writeln!(
                    body,
                    "| {} | {} | {:.4} | {:.4} | {:.4} |",
                    r.model_tag, r.channel, m.mae, m.mse, m.rmse
                );
            }
            Err(_) => {
                let _ = writeln!(body, "| {} | {} | failed | failed | failed |", r.model_tag, r.channel);
            }
        }
    }
    body
}

/// One section per input, cases in ascending order and unlabelled series
/// last; inputs for the same case keep their given order.
pub fn render_report(inputs: &[ReportInput]) -> String {
    let mut ordered: Vec<&ReportInput> = inputs.iter().collect();
    ordered.sort_by_key(|i| i.case().unwrap_or(u8::MAX));
    let mut doc = String::from("# Forecast comparison report\n");
    for input in ordered {
        doc.push('\n');
        doc.push_str(&section(input));
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{Channel, Metrics, Protocol};

    fn row(tag: &str, mae: f64) -> TableRow {
        TableRow {
            model_tag: tag.into(),
            channel: Channel::Cycle,
            protocol: Protocol::RecursiveMultiStep,
            horizon: 14,
            outcome: Ok(Metrics {
                mae,
                mse: mae * mae,
                rmse: mae,
            }),
        }
    }

    fn input(label: &str, case: Option<u8>) -> ReportInput {
        let mut meta = vec![("series".to_string(), format!("{label}.csv"))];
        if let Some(c) = case {
            meta.push(("case".into(), c.to_string()));
        }
        meta.push(("generator.seed".into(), "7".into()));
        meta.push(("model.huber.delta".into(), "1.35".into()));
        meta.push(("model.huber.lags".into(), "3".into()));
        ReportInput {
            label: label.into(),
            meta,
            rows: vec![row("ols", 0.5), row("huber", 0.6)],
        }
    }

    #[test]
    fn sections_follow_case_order() {
        let doc = render_report(&[input("c3", Some(3)), input("free", None), input("c1", Some(1)), input("c2", Some(2))]);
        let positions: Vec<usize> = ["## Case 1", "## Case 2", "## Case 3", "## Series without"]
            .iter()
            .map(|h| doc.find(h).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert!(doc.contains("- huber: delta=1.35, lags=3"));
        assert!(doc.contains("- seed = 7"));
    }

    #[test]
    fn row_count_preserved() {
        let mut one = input("c1", Some(1));
        one.rows[1].outcome = Err("diverged".into());
        let doc = render_report(&[one]);
        let table_rows = doc.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| model")).count();
        assert_eq!(table_rows, 2);
        assert!(doc.contains("| huber | cycle | failed |"));
    }

    #[test]
    fn meta_parsing() {
        let meta = parse_meta("# run\na=1\n\nb = two=2\nnoequals\n");
        assert_eq!(meta, vec![("a".into(), "1".into()), ("b".into(), "two=2".into())]);
    }
}
