//! Three-stage training orchestration: extract state information, ground the
//! generator on (code diff → state text) pairs, then fine-tune it on
//! (code diff → commit message) pairs.
//!
//! Any generator implementing [`StageModel`] can be driven; the crate ships a
//! TF-IDF nearest-neighbour generator, [`RetrievalGenerator`].

mod checkpoint;
mod retrieval;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use retrieval::RetrievalGenerator;

use crate::curator::Splits;
use crate::extraction::{extract_issues, InferenceMode, IssueClassifier, StateTagger};
use crate::par::{self, Execution};
use crate::schema::{AnnotatedCommitRecord, DatasetRecord, FileChange, IssueAnnotation, StateSpan, StateType};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

pub const SEP_TOKEN: &str = "[SEP]";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("model used before training")]
    NotTrained,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("model does not provide embeddings")]
    EmbeddingUnsupported,
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingPair {
    pub source: String,
    pub target: String,
}

impl TrainingPair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Diff → concatenated state information.
pub type GroundingPair = TrainingPair;
/// Diff → commit message.
pub type FineTunePair = TrainingPair;

/// A trainable generator usable for both grounding and fine-tuning.
///
/// `generate` must be deterministic for a fixed trained state and `embed`
/// must return vectors of one fixed dimension per trained state.
pub trait StageModel: Send + Sync {
    fn kind(&self) -> &'static str;
    fn train(&mut self, pairs: &[TrainingPair]) -> Result<(), PipelineError>;
    fn generate(&self, source: &str) -> Result<String, PipelineError>;

    fn embed(&self, _text: &str) -> Result<Vec<f64>, PipelineError> {
        Err(PipelineError::EmbeddingUnsupported)
    }

    fn checkpoint(&self) -> Result<serde_json::Value, PipelineError>;
    fn restore(&mut self, state: serde_json::Value) -> Result<(), PipelineError>;

    fn inference_mode(&self) -> InferenceMode {
        InferenceMode::Serialized
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    Grounding,
    FineTuning,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Extraction => "extraction",
            Stage::Grounding => "grounding",
            Stage::FineTuning => "fine_tuning",
        }
    }
}

/// Each file contributes its filename line followed by its diff, in record order.
pub fn sequentialize_diff(files: &[FileChange]) -> String {
    files
        .iter()
        .map(|f| format!("{}\n{}", f.path, f.diff))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub index: usize,
    pub reason: String,
}

/// Grounding pairs: the sequentialized diff as source and, as target, every
/// actual-state text (issue order, then document order) followed by every
/// expected-state text, joined with `" [SEP] "`.
///
/// Records without state spans are left out; records whose spans point
/// outside their issue text are skipped and reported.
pub fn build_grounding_set(records: &[AnnotatedCommitRecord]) -> (Vec<GroundingPair>, Vec<SkippedRecord>) {
    let mut pairs = Vec::new();
    let mut skipped = Vec::new();
    'records: for (index, rec) in records.iter().enumerate() {
        let mut texts: BTreeMap<StateType, Vec<String>> = BTreeMap::new();
        for (k, (issue, ann)) in rec.record.issues.iter().zip(&rec.annotations).enumerate() {
            let mut spans: Vec<&StateSpan> = ann.spans.iter().collect();
            spans.sort_by_key(|s| (s.location, s.start));
            for span in spans {
                match span.resolve(issue) {
                    Some(text) => texts.entry(span.state_type).or_default().push(text.trim().to_string()),
                    None => {
                        skipped.push(SkippedRecord {
                            index,
                            reason: format!(
                                "issues[{k}]: span [{}, {}) outside {:?}",
                                span.start, span.end, span.location
                            ),
                        });
                        continue 'records;
                    }
                }
            }
        }
        let target = StateType::ALL
            .iter()
            .flat_map(|s| texts.get(s).into_iter().flatten())
            .filter(|t| !t.is_empty())
            .cloned()
            .collect::<Vec<_>>()
            .join(&format!(" {SEP_TOKEN} "));
        let source = sequentialize_diff(&rec.record.files);
        if target.is_empty() {
            continue;
        }
        if source.is_empty() {
            skipped.push(SkippedRecord {
                index,
                reason: "no code changes".into(),
            });
            continue;
        }
        pairs.push(TrainingPair { source, target });
    }
    (pairs, skipped)
}

/// Diff → message pairs; records with an empty diff or message are left out.
pub fn build_fine_tune_set(records: &[DatasetRecord]) -> Vec<FineTunePair> {
    records
        .iter()
        .filter_map(|r| {
            let source = sequentialize_diff(&r.record.files);
            let target = r.record.message.trim();
            (!source.is_empty() && !target.is_empty()).then(|| TrainingPair::new(source, target))
        })
        .collect()
}

/// Hex SHA-256 over `source \0 target \n` for every pair, in order.
pub fn pairs_sha256(pairs: &[TrainingPair]) -> String {
    let mut h = Sha256::new();
    for p in pairs {
        h.update(p.source.as_bytes());
        h.update([0]);
        h.update(p.target.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Where grounding targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    /// Gold annotations only.
    Gold,
    /// Extraction models only, ignoring gold annotations.
    Extracted,
    /// Gold annotations where present, extraction models elsewhere.
    #[default]
    GoldThenExtracted,
}

#[derive(Clone, Copy)]
pub struct Extractor<'a> {
    pub classifier: &'a dyn IssueClassifier,
    pub tagger: &'a dyn StateTagger,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
    pub state_source: StateSource,
    /// Fine-tune only; used for ungrounded baselines.
    pub skip_grounding: bool,
    pub exec: Execution,
}

impl PipelineConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            checkpoint_dir: None,
            state_source: StateSource::default(),
            skip_grounding: false,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: Stage,
    #[serde(flatten)]
    pub status: StageStatus,
    pub pairs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceLog {
    pub seed: u64,
    pub model_kind: String,
    pub split_sizes: [usize; 3],
    pub state_source: StateSource,
    pub gold_issues: usize,
    pub extracted_issues: usize,
    pub stages: Vec<StageLog>,
    pub warnings: Vec<String>,
    pub skipped_records: Vec<SkippedRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub hypothesis: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub log: ProvenanceLog,
    pub test_generations: Vec<Generation>,
    pub generations_sha256: String,
}

fn stage_err(stage: Stage) -> impl FnOnce(PipelineError) -> PipelineError {
    move |e| PipelineError::Stage {
        stage: stage.name(),
        source: Box::new(e),
    }
}

struct StateInfo {
    records: Vec<AnnotatedCommitRecord>,
    gold_issues: usize,
    extracted_issues: usize,
    warnings: Vec<String>,
}

fn extract_states(
    train: &[DatasetRecord],
    extractor: Option<Extractor<'_>>,
    source: StateSource,
    exec: Execution,
) -> StateInfo {
    let use_gold = source != StateSource::Extracted;
    let mut info = StateInfo {
        records: Vec::new(),
        gold_issues: 0,
        extracted_issues: 0,
        warnings: Vec::new(),
    };
    for (index, rec) in train.iter().enumerate() {
        if let (true, Some(annotations)) = (use_gold, &rec.annotations) {
            info.gold_issues += annotations.len();
            info.records.push(AnnotatedCommitRecord {
                record: rec.record.clone(),
                annotations: annotations.clone(),
            });
            continue;
        }
        let Some(ex) = extractor.filter(|_| source != StateSource::Gold) else {
            continue;
        };
        let annotations = extract_issues(&rec.record.issues, ex.classifier, ex.tagger, exec)
            .into_iter()
            .enumerate()
            .filter_map(|(k, res)| match res {
                Ok(x) => Some(IssueAnnotation {
                    issue_type: x.issue_type,
                    spans: x.spans,
                }),
                Err(e) => {
                    info.warnings.push(format!("train[{index}].issues[{k}]: {e}"));
                    None
                }
            })
            .collect::<Vec<_>>();
        if annotations.len() == rec.record.issues.len() {
            info.extracted_issues += annotations.len();
            info.records.push(AnnotatedCommitRecord {
                record: rec.record.clone(),
                annotations,
            });
        }
    }
    info
}

fn shuffled(mut pairs: Vec<TrainingPair>, seed: u64) -> Vec<TrainingPair> {
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pairs
}

/// Runs extraction → grounding → fine-tuning on the train split, then
/// generates messages for the test split.
///
/// An empty grounding set skips grounding with a warning, leaving plain
/// fine-tuning. A failing stage aborts everything after it.
pub fn run_stages(
    model: &mut dyn StageModel,
    corpus: &Splits<DatasetRecord>,
    extractor: Option<Extractor<'_>>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let mut log = ProvenanceLog {
        seed: cfg.seed,
        model_kind: model.kind().to_string(),
        split_sizes: [corpus.train.len(), corpus.valid.len(), corpus.test.len()],
        state_source: cfg.state_source,
        gold_issues: 0,
        extracted_issues: 0,
        stages: Vec::new(),
        warnings: Vec::new(),
        skipped_records: Vec::new(),
    };
    let checkpoint_path = |name: &str| cfg.checkpoint_dir.as_ref().map(|d| d.join(name));

    // extraction
    let states = if cfg.skip_grounding {
        None
    } else {
        Some(extract_states(&corpus.train, extractor, cfg.state_source, cfg.exec))
    };
    let grounding_records = match states {
        Some(info) => {
            log.gold_issues = info.gold_issues;
            log.extracted_issues = info.extracted_issues;
            log.warnings.extend(info.warnings);
            let status = if info.records.is_empty() {
                StageStatus::Skipped {
                    reason: "no gold annotations and no extraction models".into(),
                }
            } else {
                StageStatus::Completed
            };
            let mut params = BTreeMap::new();
            params.insert("state_source".into(), serde_json::to_value(cfg.state_source)?);
            params.insert("has_models".into(), extractor.is_some().into());
            log.stages.push(StageLog {
                stage: Stage::Extraction,
                status,
                pairs: info.records.len(),
                dataset_sha256: None,
                params,
                checkpoint: None,
            });
            info.records
        }
        None => {
            log.stages.push(StageLog {
                stage: Stage::Extraction,
                status: StageStatus::Skipped {
                    reason: "grounding disabled".into(),
                },
                pairs: 0,
                dataset_sha256: None,
                params: BTreeMap::new(),
                checkpoint: None,
            });
            Vec::new()
        }
    };

    // grounding
    let (grounding, skipped) = build_grounding_set(&grounding_records);
    log.skipped_records = skipped;
    let mut params = BTreeMap::new();
    params.insert("seed".into(), cfg.seed.into());
    params.insert("separator".into(), SEP_TOKEN.into());
    if grounding.is_empty() {
        let reason = if cfg.skip_grounding {
            "grounding disabled".to_string()
        } else {
            log.warnings
                .push("grounding set is empty; continuing with plain fine-tuning".into());
            "empty grounding set".to_string()
        };
        log.stages.push(StageLog {
            stage: Stage::Grounding,
            status: StageStatus::Skipped { reason },
            pairs: 0,
            dataset_sha256: None,
            params,
            checkpoint: None,
        });
    } else {
        let pairs = shuffled(grounding, cfg.seed);
        model.train(&pairs).map_err(stage_err(Stage::Grounding))?;
        let ckpt = checkpoint_path("grounded.ckpt");
        if let Some(path) = &ckpt {
            save_checkpoint(path, model, Stage::Grounding).map_err(stage_err(Stage::Grounding))?;
        }
        log.stages.push(StageLog {
            stage: Stage::Grounding,
            status: StageStatus::Completed,
            pairs: pairs.len(),
            dataset_sha256: Some(pairs_sha256(&pairs)),
            params,
            checkpoint: ckpt,
        });
    }

    // fine-tuning
    let pairs = shuffled(build_fine_tune_set(&corpus.train), cfg.seed.wrapping_add(1));
    model.train(&pairs).map_err(stage_err(Stage::FineTuning))?;
    let ckpt = checkpoint_path("finetuned.ckpt");
    if let Some(path) = &ckpt {
        save_checkpoint(path, model, Stage::FineTuning).map_err(stage_err(Stage::FineTuning))?;
    }
    let mut params = BTreeMap::new();
    params.insert("seed".into(), cfg.seed.wrapping_add(1).into());
    log.stages.push(StageLog {
        stage: Stage::FineTuning,
        status: StageStatus::Completed,
        pairs: pairs.len(),
        dataset_sha256: Some(pairs_sha256(&pairs)),
        params,
        checkpoint: ckpt,
    });

    let test_generations = generate_split(model, &corpus.test, cfg.exec)?;
    let generations_sha256 = {
        let as_pairs: Vec<TrainingPair> = test_generations
            .iter()
            .map(|g| TrainingPair::new(&g.reference, &g.hypothesis))
            .collect();
        pairs_sha256(&as_pairs)
    };
    Ok(PipelineOutcome {
        log,
        test_generations,
        generations_sha256,
    })
}

/// Generates a message for every record, in order.
pub fn generate_split(
    model: &dyn StageModel,
    records: &[DatasetRecord],
    exec: Execution,
) -> Result<Vec<Generation>, PipelineError> {
    let exec = match model.inference_mode() {
        InferenceMode::Concurrent => exec,
        InferenceMode::Serialized => Execution::Sequential,
    };
    par::map(exec, records, |r| {
        model.generate(&sequentialize_diff(&r.record.files)).map(|hypothesis| Generation {
            hypothesis,
            reference: r.record.message.clone(),
        })
    })
    .into_iter()
    .collect()
}

/// Embeds each record's sequentialized diff and its commit message.
pub fn embed_pairs(
    model: &dyn StageModel,
    records: &[DatasetRecord],
    exec: Execution,
) -> Result<crate::analysis::VectorPairs, PipelineError> {
    let exec = match model.inference_mode() {
        InferenceMode::Concurrent => exec,
        InferenceMode::Serialized => Execution::Sequential,
    };
    let rows = par::map(exec, records, |r| -> Result<_, PipelineError> {
        Ok((model.embed(&sequentialize_diff(&r.record.files))?, model.embed(&r.record.message)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(rows.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{CommitRecord, IssueRecord, IssueType, Location};

    fn annotated(spans_per_issue: Vec<(IssueRecord, Vec<StateSpan>)>) -> AnnotatedCommitRecord {
        AnnotatedCommitRecord {
            record: CommitRecord {
                message: "Fix save".into(),
                issues: spans_per_issue.iter().map(|(i, _)| i.clone()).collect(),
                files: vec![FileChange::new("A.java", "@@ -1 +1 @@\n-a\n+b")],
            },
            annotations: spans_per_issue
                .into_iter()
                .map(|(_, spans)| IssueAnnotation {
                    issue_type: IssueType::BugReport,
                    spans,
                })
                .collect(),
        }
    }

    #[test]
    fn sequentialize() {
        assert_eq!(sequentialize_diff(&[]), "");
        let one = [FileChange::new("a.txt", "@@ -1 +1 @@\n-x\n+y")];
        assert_eq!(sequentialize_diff(&one), "a.txt\n@@ -1 +1 @@\n-x\n+y");
        let two = [FileChange::new("b", "+1"), FileChange::new("a", "+2")];
        assert_eq!(sequentialize_diff(&two), "b\n+1\na\n+2");
    }

    #[test]
    fn grounding_target_ordering() {
        let issue = IssueRecord::new("Save crashes", "It should save.");
        let rec = annotated(vec![(
            issue,
            vec![
                StateSpan::new(Location::Body, StateType::Expected, 3, 14),
                StateSpan::new(Location::Title, StateType::Actual, 0, 12),
            ],
        )]);
        let (pairs, skipped) = build_grounding_set(&[rec]);
        assert!(skipped.is_empty());
        assert_eq!(pairs[0].target, "Save crashes [SEP] should save");
    }

    #[test]
    fn actual_states_of_all_issues_come_first() {
        let a = IssueRecord::new("first fails", "first should pass");
        let b = IssueRecord::new("second fails", "second should pass");
        let spans = |issue: &IssueRecord| {
            vec![
                StateSpan::new(Location::Title, StateType::Actual, 0, issue.title.chars().count()),
                StateSpan::new(Location::Body, StateType::Expected, 0, issue.body.chars().count()),
            ]
        };
        let (sa, sb) = (spans(&a), spans(&b));
        let rec = annotated(vec![(a, sa), (b, sb)]);
        let (pairs, _) = build_grounding_set(&[rec]);
        assert_eq!(
            pairs[0].target,
            "first fails [SEP] second fails [SEP] first should pass [SEP] second should pass"
        );
    }

    #[test]
    fn records_without_spans_or_with_bad_offsets() {
        let none = annotated(vec![(IssueRecord::new("t", "b"), vec![])]);
        let bad = annotated(vec![(
            IssueRecord::new("t", "b"),
            vec![StateSpan::new(Location::Body, StateType::Actual, 0, 9)],
        )]);
        let (pairs, skipped) = build_grounding_set(&[none, bad]);
        assert!(pairs.is_empty());
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].index, 1);
    }

    struct Failing;
    impl StageModel for Failing {
        fn kind(&self) -> &'static str {
            "failing"
        }
        fn train(&mut self, _pairs: &[TrainingPair]) -> Result<(), PipelineError> {
            Err(PipelineError::EmptyTrainingSet)
        }
        fn generate(&self, _source: &str) -> Result<String, PipelineError> {
            unreachable!("generation must not run after a failed stage")
        }
        fn checkpoint(&self) -> Result<serde_json::Value, PipelineError> {
            Ok(serde_json::Value::Null)
        }
        fn restore(&mut self, _state: serde_json::Value) -> Result<(), PipelineError> {
            Ok(())
        }
    }

    #[test]
    fn failing_stage_aborts() {
        let rec: DatasetRecord = annotated(vec![(
            IssueRecord::new("Save crashes", ""),
            vec![StateSpan::new(Location::Title, StateType::Actual, 0, 12)],
        )])
        .into();
        let corpus = Splits {
            train: vec![rec.clone()],
            valid: vec![],
            test: vec![rec],
        };
        let err = run_stages(&mut Failing, &corpus, None, &PipelineConfig::new(1)).unwrap_err();
        assert!(err.to_string().starts_with("grounding stage failed"), "{err}");
    }
}
