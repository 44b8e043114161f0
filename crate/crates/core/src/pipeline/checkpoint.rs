use super::{PipelineError, Stage, StageModel};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &str = "cmgkit-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes `<magic> <version> <model kind> <stage>` on the first line and the
/// model state as JSON on the second. The file is replaced atomically.
pub fn save_checkpoint(path: &Path, model: &dyn StageModel, stage: Stage) -> Result<(), PipelineError> {
    let state = model.checkpoint()?;
    let body = format!(
        "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION} {} {}\n{}\n",
        model.kind(),
        stage.name(),
        serde_json::to_string(&state)?
    );
    write_atomic(path, body.as_bytes())?;
    Ok(())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub kind: String,
    pub stage: String,
}

/// Restores `model` from a checkpoint file, checking magic, version and kind.
pub fn load_checkpoint(path: &Path, model: &mut dyn StageModel) -> Result<CheckpointHeader, PipelineError> {
    let text = fs::read_to_string(path)?;
    let (head, body) = text.split_once('\n').ok_or_else(|| bad("missing header line"))?;
    let parts: Vec<&str> = head.split(' ').collect();
    let [magic, version, kind, stage] = parts[..] else {
        return Err(bad("header must have four fields"));
    };
    if magic != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version: u32 = version.parse().map_err(|_| bad("version is not a number"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    if kind != model.kind() {
        return Err(PipelineError::Checkpoint(format!(
            "checkpoint holds a {kind} model, not {}",
            model.kind()
        )));
    }
    model.restore(serde_json::from_str(body.trim_end())?)?;
    Ok(CheckpointHeader {
        version,
        kind: kind.to_string(),
        stage: stage.to_string(),
    })
}

fn bad(msg: &str) -> PipelineError {
    PipelineError::Checkpoint(msg.to_string())
}
