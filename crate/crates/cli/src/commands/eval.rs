use crate::config::Settings;
use crate::errors::{data, usage};
use crate::files::{emit, pretty_json, read_records, read_text};
use crate::{EvalExtractionArgs, EvalGenerationArgs, Format, TaggerKind};
use anyhow::Result;
use cmgkit_core::extraction::{
    evaluate_extraction, extract_issues, ExtractionReport, ExtractionTable, GoldReplayTagger, LexicalClassifier,
    LexicalTagger, SpanText, StateTagger,
};
use cmgkit_core::metrics::{score_texts, BleuConfig, MetricConfig, MetricReport, Smoothing};
use cmgkit_core::schema::{DatasetRecord, IssueAnnotation};
use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

fn annotations<'a>(records: &'a [DatasetRecord], path: &Path) -> Result<Vec<&'a [IssueAnnotation]>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.annotations
                .as_deref()
                .ok_or_else(|| data(format!("{}: record {i} has no annotations", path.display())))
        })
        .collect()
}

fn spans_per_issue(records: &[DatasetRecord], anns: &[&[IssueAnnotation]]) -> Vec<Vec<SpanText>> {
    records
        .iter()
        .zip(anns)
        .flat_map(|(r, a)| r.record.issues.iter().zip(a.iter()).map(|(issue, a)| SpanText::resolve_all(issue, &a.spans)))
        .collect()
}

#[derive(Serialize)]
struct ExtractionOutput {
    report: ExtractionReport,
    table: ExtractionTable,
}

pub fn extraction(a: &EvalExtractionArgs, s: &Settings) -> Result<()> {
    let tau = s.tau()?;
    let gold_records = read_records(&a.gold)?;
    let gold_anns = annotations(&gold_records, &a.gold)?;
    let gold = spans_per_issue(&gold_records, &gold_anns);

    let predictions = match (&a.pred, a.tagger) {
        (Some(path), _) => {
            let pred_records = read_records(path)?;
            if pred_records.len() != gold_records.len() {
                return Err(data(format!(
                    "{} prediction records for {} gold records",
                    pred_records.len(),
                    gold_records.len()
                )));
            }
            let pred_anns = annotations(&pred_records, path)?;
            for (i, (p, g)) in pred_records.iter().zip(&gold_records).enumerate() {
                if p.record.issues.len() != g.record.issues.len() {
                    return Err(data(format!("record {i}: predictions and gold disagree on the issue count")));
                }
            }
            spans_per_issue(&pred_records, &pred_anns)
        }
        (None, Some(kind)) => {
            let mut replay = GoldReplayTagger::new();
            for (r, anns) in gold_records.iter().zip(&gold_anns) {
                for (issue, ann) in r.record.issues.iter().zip(anns.iter()) {
                    replay.insert(issue.clone(), ann.spans.clone());
                }
            }
            let tagger: &dyn StateTagger = match kind {
                TaggerKind::Lexical => &LexicalTagger,
                TaggerKind::Gold => &replay,
            };
            let mut out = Vec::new();
            for (i, r) in gold_records.iter().enumerate() {
                for (k, res) in extract_issues(&r.record.issues, &LexicalClassifier, tagger, s.exec()).into_iter().enumerate() {
                    let x = res.map_err(|e| data(format!("record {i} issue {k}: {e}")))?;
                    out.push(SpanText::resolve_all(&r.record.issues[k], &x.spans));
                }
            }
            out
        }
        (None, None) => return Err(usage("pass --pred or --tagger")),
    };

    let report = evaluate_extraction(&predictions, &gold, tau).map_err(|e| data(e.to_string()))?;
    let text = match a.format {
        Format::Json => pretty_json(&ExtractionOutput {
            report,
            table: report.table(),
        }),
        Format::Csv => {
            let mut out = String::from("class,precision,recall,f1,true_positives,predicted,gold\n");
            for (name, c) in [("actual", report.actual), ("expected", report.expected), ("micro", report.pooled)] {
                let _ = writeln!(
                    out,
                    "{name},{},{},{},{},{},{}",
                    c.precision, c.recall, c.f1, c.true_positives, c.predicted, c.gold
                );
            }
            out
        }
    };
    emit(a.out.as_deref(), &text)
}

/// A line is a JSON string, a JSON object holding `key` (or `text`), or
/// plain text.
fn line_text(line: &str, key: &str, path: &Path, line_no: usize) -> Result<String> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::String(s)) => Ok(s),
        Ok(Value::Object(m)) => m
            .get(key)
            .or_else(|| m.get("text"))
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| data(format!("{}:{line_no}: object has no string `{key}` or `text`", path.display()))),
        _ => Ok(line.to_string()),
    }
}

fn read_side(path: &Path, key: &str) -> Result<Vec<String>> {
    read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| line_text(l, key, path, i + 1))
        .collect()
}

fn read_pairs(path: &Path) -> Result<(Vec<String>, Vec<String>)> {
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(line).map_err(|e| data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let field = |k: &str| {
            v.get(k)
                .and_then(Value::as_str)
                .map(String::from)
                .ok_or_else(|| data(format!("{}:{}: missing string `{k}`", path.display(), i + 1)))
        };
        hyps.push(field("hypothesis")?);
        refs.push(field("reference")?);
    }
    Ok((hyps, refs))
}

fn generation_csv(report: &MetricReport) -> String {
    let mut out = String::from("example,bleu,rouge_l_p,rouge_l_r,rouge_l_f,meteor,cider,hyp_tokens,ref_tokens\n");
    let cider = |c: Option<f64>| c.map(|x| x.to_string()).unwrap_or_default();
    for (i, e) in report.per_example.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{}",
            e.bleu,
            e.rouge_l.p,
            e.rouge_l.r,
            e.rouge_l.f,
            e.meteor,
            cider(e.cider),
            e.hyp_tokens,
            e.ref_tokens
        );
    }
    let c = &report.corpus;
    let _ = writeln!(
        out,
        "corpus,{},{},{},{},{},{},{},{}",
        c.bleu_corpus,
        c.rouge_l.p,
        c.rouge_l.r,
        c.rouge_l.f,
        c.meteor,
        cider(c.cider),
        c.hyp_tokens,
        c.ref_tokens
    );
    out
}

pub fn generation(a: &EvalGenerationArgs, s: &Settings) -> Result<()> {
    if a.max_n == 0 {
        return Err(usage("--max-n must be at least 1"));
    }
    if a.beta.is_nan() || a.beta <= 0.0 {
        return Err(usage("--beta must be positive"));
    }
    let (hyps, refs) = match (&a.input, &a.hyp, &a.reference) {
        (Some(input), _, _) => read_pairs(input)?,
        (None, Some(h), Some(r)) => (read_side(h, "hypothesis")?, read_side(r, "reference")?),
        _ => return Err(usage("pass --input, or both --hyp and --ref")),
    };
    if hyps.len() != refs.len() {
        return Err(data(format!("{} hypotheses but {} references", hyps.len(), refs.len())));
    }
    let cfg = MetricConfig {
        bleu: BleuConfig {
            max_n: a.max_n,
            smoothing: if a.no_smoothing { Smoothing::None } else { Smoothing::default() },
        },
        rouge_beta: a.beta,
    };
    let report = score_texts(&hyps, &refs, cfg, s.exec()).map_err(|e| data(e.to_string()))?;
    let text = match a.format {
        Format::Json => pretty_json(&report),
        Format::Csv => generation_csv(&report),
    };
    emit(a.out.as_deref(), &text)
}
