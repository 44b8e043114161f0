use crate::config::Settings;
use crate::errors::data;
use crate::files::{emit, pretty_json, read_records, read_text, write_atomic};
use crate::{GroundAnalyzeArgs, RunPipelineArgs, StateSourceArg, TaggerKind};
use anyhow::{Context, Result};
use cmgkit_core::analysis::{analyze_grounding, histograms_csv, EmbeddingPairs};
use cmgkit_core::curator::stratify;
use cmgkit_core::extraction::{GoldReplayTagger, LexicalClassifier, LexicalTagger, StateTagger};
use cmgkit_core::pipeline::{
    embed_pairs, run_stages, Extractor, PipelineConfig, ProvenanceLog, RetrievalGenerator, StateSource,
};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct Provenance<'a> {
    log: &'a ProvenanceLog,
    generations_sha256: &'a str,
}

fn write_embeddings(path: &Path, model: &RetrievalGenerator, records: &[cmgkit_core::schema::DatasetRecord], s: &Settings) -> Result<()> {
    let (code, msg) = embed_pairs(model, records, s.exec())?;
    let pairs = EmbeddingPairs::new(code, msg).map_err(|e| data(e.to_string()))?;
    write_atomic(path, pairs.to_text().as_bytes())
}

pub fn run_pipeline(a: &RunPipelineArgs, s: &Settings) -> Result<()> {
    let seed = s.seed()?;
    let records = read_records(&a.input)?;
    let splits = stratify(&records, seed).map_err(|e| data(e.to_string()))?;

    let mut replay = GoldReplayTagger::new();
    for r in &records {
        if let Some(anns) = &r.annotations {
            for (issue, ann) in r.record.issues.iter().zip(anns) {
                replay.insert(issue.clone(), ann.spans.clone());
            }
        }
    }
    let tagger: Option<&dyn StateTagger> = match a.tagger {
        None => None,
        Some(TaggerKind::Lexical) => Some(&LexicalTagger),
        Some(TaggerKind::Gold) => Some(&replay),
    };
    let extractor = tagger.map(|tagger| Extractor {
        classifier: &LexicalClassifier,
        tagger,
    });
    let state_source = match a.state_source {
        StateSourceArg::Gold => StateSource::Gold,
        StateSourceArg::Extracted => StateSource::Extracted,
        StateSourceArg::GoldThenExtracted => StateSource::GoldThenExtracted,
    };
    let checkpoints = a.out_dir.join("checkpoints");
    std::fs::create_dir_all(&checkpoints).with_context(|| format!("creating {}", checkpoints.display()))?;
    let cfg = PipelineConfig {
        seed,
        checkpoint_dir: Some(checkpoints),
        state_source,
        skip_grounding: a.skip_grounding,
        exec: s.exec(),
    };
    let mut model = RetrievalGenerator::new();
    let outcome = run_stages(&mut model, &splits, extractor, &cfg)?;
    for w in &outcome.log.warnings {
        log::warn!("{w}");
    }
    let provenance = Provenance {
        log: &outcome.log,
        generations_sha256: &outcome.generations_sha256,
    };
    write_atomic(&a.out_dir.join("provenance.json"), pretty_json(&provenance).as_bytes())?;
    let generations: String = outcome
        .test_generations
        .iter()
        .map(|g| serde_json::to_string(g).map(|l| l + "\n"))
        .collect::<Result<_, _>>()?;
    write_atomic(&a.out_dir.join("generations.jsonl"), generations.as_bytes())?;

    if let Some(dir) = &a.emit_embeddings {
        if a.skip_grounding {
            log::warn!("--skip-grounding is set, so after.emb also comes from an ungrounded model");
        }
        let baseline_cfg = PipelineConfig {
            checkpoint_dir: None,
            skip_grounding: true,
            ..cfg
        };
        let mut baseline = RetrievalGenerator::new();
        run_stages(&mut baseline, &splits, None, &baseline_cfg)?;
        write_embeddings(&dir.join("before.emb"), &baseline, &splits.test, s)?;
        write_embeddings(&dir.join("after.emb"), &model, &splits.test, s)?;
    }
    Ok(())
}

pub fn ground_analyze(a: &GroundAnalyzeArgs, s: &Settings) -> Result<()> {
    let parse = |p: &Path| -> Result<EmbeddingPairs> {
        EmbeddingPairs::parse(&read_text(p)?).map_err(|e| data(format!("{}: {e}", p.display())))
    };
    let before = parse(&a.before)?;
    let after = parse(&a.after)?;
    let (report, hists) = analyze_grounding(&before, &after, s.bins()?, s.exec()).map_err(|e| data(e.to_string()))?;
    if let Some(path) = &a.histogram {
        write_atomic(path, histograms_csv(&hists).as_bytes())?;
    }
    emit(a.out.as_deref(), &pretty_json(&report))
}
